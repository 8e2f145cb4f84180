#pragma once

#include "curlfem/mesh.hpp"

#include <memory>

namespace curlfem {

/// Covariant pull-back of one cell: psi(V) = dT^T (V o T), curl psi(V) = dT^co (curl V o T).
class ElementPullback {
public:
    /// Throws Error if the Jacobian is singular at the cell's vertices or barycentre.
    explicit ElementPullback(GeometricMap map);

    const GeometricMap& map() const { return map_; }

    /// Reference point whose image is x (Newton on T_K). Throws Error if x is not
    /// in the image of the closed reference tetrahedron.
    Vec3 reference_point(const Vec3& x) const;

    template <typename Scalar>
    VectorField<Scalar> pull(const VectorField<Scalar>& field) const;

    /// Inverse action: values dT^{-T} u, curls dT curl u / det dT.
    template <typename Scalar>
    VectorField<Scalar> push(const VectorField<Scalar>& reference_field) const;

    /// Checked Jacobian at a reference point.
    Mat3 jacobian(const Vec3& xhat) const;

private:
    GeometricMap map_;
};

/// Bi-Lipschitz map T between an approximate domain and the exact one,
/// extended to the whole hold-all domain.
class DomainMap {
public:
    using PointMap = std::function<Vec3(const Vec3&)>;
    using JacobianMap = std::function<Mat3(const Vec3&)>;

    /// Central finite-difference step used when no analytic Jacobian is given.
    static constexpr double kDefaultStep = 1e-6;

    DomainMap(PointMap forward, PointMap inverse, JacobianMap jacobian = {}, JacobianMap inverse_jacobian = {},
              double fd_step = kDefaultStep);

    Vec3 forward(const Vec3& x) const { return forward_(x); }
    Vec3 inverse(const Vec3& y) const { return inverse_(y); }
    Mat3 jacobian(const Vec3& x) const;
    /// d(T^{-1})(y).
    Mat3 inverse_jacobian(const Vec3& y) const;

    bool analytic_jacobian() const { return static_cast<bool>(jacobian_); }
    double fd_step() const { return fd_step_; }

private:
    PointMap forward_, inverse_;
    JacobianMap jacobian_, inverse_jacobian_;
    double fd_step_;
};

/// Central differences with step h * max(1, |x|).
Mat3 finite_difference_jacobian(const DomainMap::PointMap& f, const Vec3& x, double h);

DomainMap identity_map();
/// T(x) = x / (1 - delta).
DomainMap dilation_map(double delta);

/// Boundary of a star-shaped (w.r.t. the origin) tetrahedral mesh seen from the
/// origin: exit radius b(d) of each ray d through the (possibly curved) boundary faces.
class RayBoundary {
public:
    explicit RayBoundary(const Mesh& mesh);

    struct Hit {
        double radius;
        /// Gradient of the exit radius w.r.t. the (unnormalised) direction.
        Vec3 gradient;
        /// Smallest barycentric parameter of the hit inside its face.
        double margin;
        int face;
    };

    /// Throws Error if no boundary face is crossed by the ray.
    Hit exit(const Vec3& direction) const;
    double min_radius() const { return min_radius_; }
    double max_radius() const { return max_radius_; }

    /// Point of boundary face i (index into faces()) at face parameters (u, v).
    Vec3 face_point(int i, double u, double v) const;
    int num_faces() const { return static_cast<int>(faces_.size()); }

private:
    struct Face {
        int mesh_face;
        int cell;
        std::array<Vec3, 3> ref; ///< reference-tet corners a, b, c
        std::array<Vec3, 3> corner;
        bool curved;
        Vec3 cap_center;
        double cap_radius;
    };
    const Mesh* mesh_;
    std::vector<Face> faces_;
    std::vector<GeometricMap> maps_;
    int grid_ = 1;
    std::vector<std::vector<int>> buckets_;
    double min_radius_ = 0.0, max_radius_ = 0.0;

    int bucket_of(double t) const;
    bool intersect(const Face& f, int i, const Vec3& d, Hit& hit) const;
};

/// Default core radius and hold-all radius of the radial map.
inline constexpr double kRadialCore = 0.5;
inline constexpr double kHoldAllRadius = 1.1;

/// Radial map of a star-shaped ball mesh onto the unit ball. Along each ray d
/// with exit radius b: [0, rho0 b] is fixed, [rho0 b, b] is stretched linearly
/// onto [rho0 b, 1], [b, R] onto [1, R], and everything beyond R is fixed.
/// The Jacobian is analytic inside a face's ray cone and uses central
/// differences with step 1e-6 h on rays that hit a face edge.
DomainMap radial_domain_map(const Mesh& mesh, double rho0 = kRadialCore, double hold_all = kHoldAllRadius);

struct DomainMetrics {
    double sup_t = 0.0;          ///< sup |T - I|
    double sup_t_inverse = 0.0;  ///< sup |T^{-1} - I|
    double sup_dt = 0.0;         ///< sup ||dT - I||
    double sup_dt_inverse = 0.0; ///< sup ||dT^{-1} - I||
    double d0 = 0.0;
    double d1 = 0.0;
    /// Smallest bound with theta^{-1} <= ||dT||, ||dT^{-1}||, det dT, det dT^{-1} <= theta.
    double vartheta = 1.0;
    std::size_t samples = 0;
};

/// Samples the quadrature points of every cell plus a barycentric lattice
/// (kBoundaryLattice subdivisions) on every boundary face.
inline constexpr int kBoundaryLattice = 8;
DomainMetrics discrepancies(const DomainMap& map, const Mesh& mesh, int cell_exactness = 4);

/// Deterministic sample points used by discrepancies().
Eigen::Matrix3Xd domain_samples(const Mesh& mesh, int cell_exactness = 4);
/// Lattice points on the boundary surface of the mesh (curved faces included).
Eigen::Matrix3Xd boundary_samples(const Mesh& mesh, int subdivisions = kBoundaryLattice);

/// Psi(U) = dT^T (U o T) on the approximate domain, curl by the cofactor rule.
template <typename Scalar>
VectorField<Scalar> pullback_solution(const DomainMap& map, const VectorField<Scalar>& field);
/// Psi^{-1}(V)(y) = dT(T^{-1} y)^{-T} V(T^{-1} y).
template <typename Scalar>
VectorField<Scalar> pushforward_solution(const DomainMap& map, const VectorField<Scalar>& field);

/// max over boundary lattice points of |1 - |x||: the Hausdorff distance
/// between the mesh boundary and the unit sphere.
double hausdorff_estimate(const Mesh& mesh, int subdivisions = kBoundaryLattice);

} // namespace curlfem
