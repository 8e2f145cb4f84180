#pragma once

#include "curlfem/interpolation.hpp"
#include "curlfem/transforms.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace curlfem {

/// Default exactness of the error quadrature.
inline constexpr int kErrorExactness = 8;

struct ErrorNorms {
    double l2 = 0.0;      ///< ||E - E_h||_{L2(D_h)}
    double curl = 0.0;    ///< ||curl E - curl E_h||_{L2(D_h)}
    double hcurl = 0.0;   ///< sqrt(l2^2 + curl^2)
};

/// Errors of u against a field with analytic curl over the mesh domain.
/// Throws Error if the field has no curl.
ErrorNorms error_norms(const FemFunction& u, const ComplexField& exact, int exactness = kErrorExactness);
/// Norms of the field itself over the mesh domain (the error of u = 0).
ErrorNorms field_norms(const Mesh& mesh, const ComplexField& field, int exactness = kErrorExactness);
/// H(curl; D_h) distance between Psi(E) = dT^T (E o T) and u.
ErrorNorms pullback_error(const DomainMap& map, const FemFunction& u, const ComplexField& exact,
                          int exactness = kErrorExactness);

/// Least-squares slope of log(error) against log(h). Needs >= 2 points, all positive.
double eoc(std::span<const double> h, std::span<const double> error);
/// Slope over the last `window` points (all points if fewer).
double eoc_tail(std::span<const double> h, std::span<const double> error, int window = 3);

struct ConvergenceRow {
    int level = 0;
    double h = 0.0;
    long ndof = 0;
    double l2_error = 0.0;
    double hcurl_error = 0.0;
    std::optional<double> pullback_error;
    std::optional<double> d0;
    std::optional<double> d1;
    std::optional<double> hausdorff;
    double seconds = 0.0;
};

struct ConvergenceReport {
    std::string study;
    int k = 1;
    int geo_order = 1;
    std::string materials;
    std::vector<ConvergenceRow> rows;
    /// Extra metadata copied into the JSON sidecar (configuration, warnings).
    nlohmann::json metadata = nlohmann::json::object();

    /// Rows sorted by decreasing h.
    std::vector<ConvergenceRow> sorted_rows() const;
    /// Column names present in every row, in CSV order after level,h,ndof.
    std::vector<std::string> error_columns() const;
    std::vector<double> column(const std::string& name) const;
    /// EOC of a column over the last 3 rows.
    double slope(const std::string& name) const;
};

/// level,h,ndof,l2_error,hcurl_error[,pullback_error,d0,d1]
std::string report_csv(const ConvergenceReport& report);
std::string report_svg(const ConvergenceReport& report);
nlohmann::json report_json(const ConvergenceReport& report);
/// Writes <stem>.csv, <stem>.svg and <stem>.json into the directory.
void emit_report(const ConvergenceReport& report, const std::filesystem::path& directory, const std::string& stem);

/// Smooth vector field with its Jacobian (row i = gradient of component i).
struct SmoothField {
    std::function<Vec3(const Vec3&)> value;
    std::function<Mat3(const Vec3&)> jacobian;
};

/// Sum of a few random sine modes with wave numbers |w| <= 3.
SmoothField random_smooth_field(unsigned seed);

/// Both sides of the transport inequalities on the hold-all ball of radius R:
///   sup_{D_h} |U o T - U|        <= ||T - I||_inf ||U||_{W^{1,inf}},
///   ||U o T - U||_{L2(D_h)}       <= (theta^{1/2} + 1) ||T - I||_inf ||U||_{H1}.
struct TransportCheck {
    double linf_lhs = 0.0, linf_rhs = 0.0;
    double l2_lhs = 0.0, l2_rhs = 0.0;
    double sup_t = 0.0;   ///< ||T - I|| sampled on the hold-all ball and D_h
    double vartheta = 1.0;
    double w1inf = 0.0;   ///< sup |U| + sup ||dU||_F
    double h1 = 0.0;
};

TransportCheck transport_bounds(const DomainMap& map, const Mesh& mesh, const SmoothField& field,
                                double hold_all = kHoldAllRadius);
/// Same for several fields; the map is evaluated once per sample point.
std::vector<TransportCheck> transport_bounds(const DomainMap& map, const Mesh& mesh,
                                             std::span<const SmoothField> fields, double hold_all = kHoldAllRadius);

} // namespace curlfem
