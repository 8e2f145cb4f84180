#include "curlfem/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace curlfem {

namespace {

// Per-cell sums of (|value error|^2, |curl error|^2), reduced in cell order.
template <typename F>
Eigen::Vector2d integrate_cells(const Mesh& mesh, int exactness, F&& integrand)
{
    const auto& rule = quadrature(exactness);
    const int nc = mesh.num_cells();
    std::vector<Eigen::Vector2d> per_cell(nc, Eigen::Vector2d::Zero());
    parallel_for(static_cast<std::size_t>(nc), [&](std::size_t ci) {
        const int c = static_cast<int>(ci);
        const GeometricMap map(mesh, c);
        Eigen::Vector2d sum = Eigen::Vector2d::Zero();
        for (Eigen::Index q = 0; q < rule.size(); ++q) {
            const Vec3 xhat = rule.points.col(q);
            const double w = rule.weights(q) * std::abs(map.det(xhat));
            sum += w * integrand(c, xhat, map.point(xhat));
        }
        per_cell[c] = sum;
    });
    Eigen::Vector2d total = Eigen::Vector2d::Zero();
    for (const auto& s : per_cell)
        total += s;
    return total;
}

ErrorNorms to_norms(const Eigen::Vector2d& squares)
{
    return {std::sqrt(squares(0)), std::sqrt(squares(1)), std::sqrt(squares.sum())};
}

void require_curl(const ComplexField& f)
{
    if (!f.has_curl())
        throw Error("exact field has no curl");
}

std::string format(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

} // namespace

ErrorNorms error_norms(const FemFunction& u, const ComplexField& exact, int exactness)
{
    require_curl(exact);
    return to_norms(integrate_cells(u.mesh(), exactness, [&](int c, const Vec3& xhat, const Vec3& x) {
        const auto s = u.evaluate(c, xhat);
        return Eigen::Vector2d((exact.value(x) - s.value).squaredNorm(), (exact.curl(x) - s.curl).squaredNorm());
    }));
}

ErrorNorms field_norms(const Mesh& mesh, const ComplexField& field, int exactness)
{
    require_curl(field);
    return to_norms(integrate_cells(mesh, exactness, [&](int, const Vec3&, const Vec3& x) {
        return Eigen::Vector2d(field.value(x).squaredNorm(), field.curl(x).squaredNorm());
    }));
}

ErrorNorms pullback_error(const DomainMap& map, const FemFunction& u, const ComplexField& exact, int exactness)
{
    require_curl(exact);
    return to_norms(integrate_cells(u.mesh(), exactness, [&](int c, const Vec3& xhat, const Vec3& x) {
        const Mat3 j = map.jacobian(x);
        const Vec3 y = map.forward(x);
        const CVec3 value = j.transpose().cast<Complex>() * exact.value(y);
        const CVec3 curl = cofactor(j).cast<Complex>() * exact.curl(y);
        const auto s = u.evaluate(c, xhat);
        return Eigen::Vector2d((value - s.value).squaredNorm(), (curl - s.curl).squaredNorm());
    }));
}

double eoc(std::span<const double> h, std::span<const double> error)
{
    if (h.size() != error.size())
        throw Error("eoc: size mismatch");
    if (h.size() < 2)
        throw Error("eoc needs at least two rows");
    const std::size_t n = h.size();
    Eigen::VectorXd x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(h[i] > 0.0) || !(error[i] > 0.0))
            throw Error("eoc: non-positive h or error in row " + std::to_string(i));
        x(i) = std::log(h[i]);
        y(i) = std::log(error[i]);
    }
    const Eigen::VectorXd dx = x.array() - x.mean();
    const double sxx = dx.squaredNorm();
    if (sxx == 0.0)
        throw Error("eoc: all mesh sizes are equal");
    return dx.dot(y.array().matrix() - Eigen::VectorXd::Constant(n, y.mean())) / sxx;
}

double eoc_tail(std::span<const double> h, std::span<const double> error, int window)
{
    const std::size_t n = std::min(h.size(), static_cast<std::size_t>(std::max(window, 2)));
    return eoc(h.last(n), error.last(n));
}

std::vector<ConvergenceRow> ConvergenceReport::sorted_rows() const
{
    auto r = rows;
    std::stable_sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.h > b.h; });
    return r;
}

std::vector<std::string> ConvergenceReport::error_columns() const
{
    std::vector<std::string> cols{"l2_error", "hcurl_error"};
    auto all = [&](auto member) {
        return !rows.empty() && std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return (r.*member).has_value(); });
    };
    if (all(&ConvergenceRow::pullback_error))
        cols.push_back("pullback_error");
    if (all(&ConvergenceRow::d0) && all(&ConvergenceRow::d1)) {
        cols.push_back("d0");
        cols.push_back("d1");
    }
    return cols;
}

std::vector<double> ConvergenceReport::column(const std::string& name) const
{
    std::vector<double> out;
    for (const auto& r : sorted_rows()) {
        if (name == "h")
            out.push_back(r.h);
        else if (name == "l2_error")
            out.push_back(r.l2_error);
        else if (name == "hcurl_error")
            out.push_back(r.hcurl_error);
        else if (name == "pullback_error" && r.pullback_error)
            out.push_back(*r.pullback_error);
        else if (name == "d0" && r.d0)
            out.push_back(*r.d0);
        else if (name == "d1" && r.d1)
            out.push_back(*r.d1);
        else if (name == "hausdorff" && r.hausdorff)
            out.push_back(*r.hausdorff);
        else
            throw Error("report has no column '" + name + "' in every row");
    }
    return out;
}

double ConvergenceReport::slope(const std::string& name) const
{
    return eoc_tail(column("h"), column(name), 3);
}

std::string report_csv(const ConvergenceReport& report)
{
    const auto cols = report.error_columns();
    std::ostringstream out;
    out << "level,h,ndof";
    for (const auto& c : cols)
        out << ',' << c;
    out << '\n';
    for (const auto& r : report.sorted_rows()) {
        out << r.level << ',' << format(r.h) << ',' << r.ndof << ',' << format(r.l2_error) << ','
            << format(r.hcurl_error);
        if (cols.size() > 2 && cols[2] == "pullback_error")
            out << ',' << format(*r.pullback_error);
        if (cols.back() == "d1")
            out << ',' << format(*r.d0) << ',' << format(*r.d1);
        out << '\n';
    }
    return out.str();
}

std::string report_svg(const ConvergenceReport& report)
{
    constexpr double width = 640, height = 480, left = 80, right = 160, top = 40, bottom = 60;
    const auto h = report.column("h");
    const auto cols = report.error_columns();
    std::vector<std::vector<double>> series;
    for (const auto& c : cols)
        series.push_back(report.column(c));

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (double v : h)
        xmin = std::min(xmin, std::log10(v)), xmax = std::max(xmax, std::log10(v));
    for (const auto& s : series)
        for (double v : s)
            if (v > 0)
                ymin = std::min(ymin, std::log10(v)), ymax = std::max(ymax, std::log10(v));
    if (h.empty() || ymin > ymax)
        xmin = -1, xmax = 0, ymin = -1, ymax = 0;
    xmin = std::floor(xmin), xmax = std::ceil(xmax + 1e-12), ymin = std::floor(ymin), ymax = std::ceil(ymax + 1e-12);
    if (xmax <= xmin)
        xmax = xmin + 1;
    if (ymax <= ymin)
        ymax = ymin + 1;
    auto px = [&](double lx) { return left + (lx - xmin) / (xmax - xmin) * (width - left - right); };
    auto py = [&](double ly) { return height - bottom - (ly - ymin) / (ymax - ymin) * (height - top - bottom); };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">" << report.study << ", k=" << report.k
        << ", geometry order " << report.geo_order << "</text>\n";
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << width - left - right << "\" height=\""
        << height - top - bottom << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double d = xmin; d <= xmax + 1e-9; d += 1)
        out << "<text x=\"" << num(px(d)) << "\" y=\"" << height - bottom + 18 << "\" text-anchor=\"middle\">1e"
            << static_cast<int>(d) << "</text>\n";
    for (double d = ymin; d <= ymax + 1e-9; d += 1)
        out << "<text x=\"" << left - 6 << "\" y=\"" << num(py(d) + 4) << "\" text-anchor=\"end\">1e"
            << static_cast<int>(d) << "</text>\n";
    out << "<text x=\"" << num(px(0.5 * (xmin + xmax))) << "\" y=\"" << height - 20
        << "\" text-anchor=\"middle\">h</text>\n";

    // Reference slopes through the last H(curl) point.
    if (!h.empty()) {
        const double x1 = std::log10(h.back()), y1 = std::log10(series[1].back());
        const double x0 = std::log10(h.front());
        int i = 0;
        for (double s : {1.0, 1.5, 2.0}) {
            const double y0 = y1 + s * (x0 - x1);
            out << "<line x1=\"" << num(px(x0)) << "\" y1=\"" << num(py(y0)) << "\" x2=\"" << num(px(x1))
                << "\" y2=\"" << num(py(y1)) << "\" stroke=\"gray\" stroke-dasharray=\"" << 2 + 3 * i << ",3\"/>\n";
            out << "<text x=\"" << num(px(x0) + 4) << "\" y=\"" << num(py(y0)) << "\" fill=\"gray\">slope "
                << s << "</text>\n";
            ++i;
        }
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* colour = colours[s % 5];
        out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < h.size(); ++i)
            if (series[s][i] > 0)
                out << num(px(std::log10(h[i]))) << ',' << num(py(std::log10(series[s][i]))) << ' ';
        out << "\"/>\n";
        for (std::size_t i = 0; i < h.size(); ++i)
            if (series[s][i] > 0)
                out << "<circle cx=\"" << num(px(std::log10(h[i]))) << "\" cy=\""
                    << num(py(std::log10(series[s][i]))) << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
        out << "<text x=\"" << width - right + 10 << "\" y=\"" << top + 16 + 18 * s << "\" fill=\"" << colour
            << "\">" << cols[s] << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

nlohmann::json report_json(const ConvergenceReport& report)
{
    nlohmann::json j;
    j["study"] = report.study;
    j["k"] = report.k;
    j["geo_order"] = report.geo_order;
    j["materials"] = report.materials;
    j["metadata"] = report.metadata;
    auto& rows = j["rows"] = nlohmann::json::array();
    for (const auto& r : report.sorted_rows()) {
        nlohmann::json row{{"level", r.level},       {"h", r.h},
                           {"ndof", r.ndof},         {"l2_error", r.l2_error},
                           {"hcurl_error", r.hcurl_error}, {"seconds", r.seconds}};
        if (r.pullback_error)
            row["pullback_error"] = *r.pullback_error;
        if (r.d0)
            row["d0"] = *r.d0;
        if (r.d1)
            row["d1"] = *r.d1;
        if (r.hausdorff)
            row["hausdorff"] = *r.hausdorff;
        rows.push_back(row);
    }
    auto& slopes = j["slopes"] = nlohmann::json::object();
    if (report.rows.size() >= 2) {
        auto cols = report.error_columns();
        if (std::all_of(report.rows.begin(), report.rows.end(), [](const auto& r) { return r.hausdorff.has_value(); }))
            cols.push_back("hausdorff");
        for (const auto& c : cols) {
            try {
                slopes[c] = report.slope(c);
            } catch (const Error&) {
                slopes[c] = nullptr;
            }
        }
    }
    return j;
}

void emit_report(const ConvergenceReport& report, const std::filesystem::path& directory, const std::string& stem)
{
    std::filesystem::create_directories(directory);
    auto write = [&](const std::string& ext, const std::string& text) {
        const auto path = directory / (stem + ext);
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw Error("cannot write " + path.string());
        out << text;
    };
    write(".csv", report_csv(report));
    write(".svg", report_svg(report));
    write(".json", report_json(report).dump(2) + "\n");
}

SmoothField random_smooth_field(unsigned seed)
{
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    constexpr int modes = 3;
    std::array<Vec3, modes> amp, wave;
    std::array<double, modes> phase;
    for (int m = 0; m < modes; ++m) {
        amp[m] = Vec3(u(gen), u(gen), u(gen));
        wave[m] = Vec3(u(gen), u(gen), u(gen)) * std::sqrt(3.0);
        phase[m] = std::numbers::pi * u(gen);
    }
    SmoothField f;
    f.value = [=](const Vec3& x) {
        Vec3 v = Vec3::Zero();
        for (int m = 0; m < modes; ++m)
            v += amp[m] * std::sin(wave[m].dot(x) + phase[m]);
        return v;
    };
    f.jacobian = [=](const Vec3& x) {
        Mat3 j = Mat3::Zero();
        for (int m = 0; m < modes; ++m)
            j += amp[m] * wave[m].transpose() * std::cos(wave[m].dot(x) + phase[m]);
        return j;
    };
    return f;
}

std::vector<TransportCheck> transport_bounds(const DomainMap& map, const Mesh& mesh,
                                            std::span<const SmoothField> fields, double hold_all)
{
    // Hold-all ball: product Gauss rule in (r, cos theta) with r^2 weight, uniform in phi,
    // plus a Cartesian lattice (zero weight) for the suprema.
    constexpr int nr = 14, nt = 14, np = 28, ng = 25;
    const auto [rs, rw] = gauss_jacobi(nr, 2.0);
    const auto [ts, tw] = gauss_jacobi(nt, 0.0);
    std::vector<Vec3> ball;
    std::vector<double> ball_w;
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nt; ++j)
            for (int l = 0; l < np; ++l) {
                const double r = hold_all * (1.0 - rs(i));
                const double ct = 2.0 * ts(j) - 1.0, st = std::sqrt(1.0 - ct * ct);
                const double phi = 2.0 * std::numbers::pi * (l + 0.5) / np;
                ball.emplace_back(r * st * std::cos(phi), r * st * std::sin(phi), r * ct);
                ball_w.push_back(std::pow(hold_all, 3) * rw(i) * 2.0 * tw(j) * 2.0 * std::numbers::pi / np);
            }
    for (int a = 0; a < ng; ++a)
        for (int b = 0; b < ng; ++b)
            for (int c = 0; c < ng; ++c) {
                const Vec3 x = hold_all * (Vec3(a, b, c) * (2.0 / (ng - 1)) - Vec3::Ones());
                if (x.norm() <= hold_all)
                    ball.push_back(x), ball_w.push_back(0.0);
            }

    // D_h: cell quadrature points (weighted) followed by the boundary lattice (zero weight).
    const auto& rule = quadrature(kErrorExactness);
    const Eigen::Index nq = rule.size();
    const int nc = mesh.num_cells();
    const Eigen::Matrix3Xd bnd = boundary_samples(mesh);
    const Eigen::Index nd = nq * nc + bnd.cols();
    Eigen::Matrix3Xd xs(3, nd), txs(3, nd);
    Eigen::VectorXd ws = Eigen::VectorXd::Zero(nd);
    parallel_for(static_cast<std::size_t>(nc), [&](std::size_t ci) {
        const GeometricMap g(mesh, static_cast<int>(ci));
        for (Eigen::Index q = 0; q < nq; ++q) {
            const Vec3 xhat = rule.points.col(q);
            const Eigen::Index i = static_cast<Eigen::Index>(ci) * nq + q;
            xs.col(i) = g.point(xhat);
            ws(i) = rule.weights(q) * std::abs(g.det(xhat));
        }
    });
    xs.rightCols(bnd.cols()) = bnd;

    // ||T - I|| and theta over the hold-all points and D_h.
    constexpr std::size_t kBlock = 4096;
    const std::size_t nball = ball.size(), ntotal = nball + static_cast<std::size_t>(nd);
    const std::size_t nblocks = (ntotal + kBlock - 1) / kBlock;
    std::vector<Eigen::Vector2d> map_stats(nblocks, Eigen::Vector2d(0.0, 1.0));
    parallel_for(nblocks, [&](std::size_t blk) {
        for (std::size_t i = blk * kBlock; i < std::min(ntotal, (blk + 1) * kBlock); ++i) {
            const Vec3 x = i < nball ? ball[i] : Vec3(xs.col(static_cast<Eigen::Index>(i - nball)));
            const Vec3 tx = map.forward(x);
            if (i >= nball)
                txs.col(static_cast<Eigen::Index>(i - nball)) = tx;
            const double det = map.jacobian(x).determinant();
            map_stats[blk](0) = std::max(map_stats[blk](0), (tx - x).norm());
            map_stats[blk](1) = std::max({map_stats[blk](1), det, 1.0 / det});
        }
    });
    double sup_t = 0.0, vartheta = 1.0;
    for (const auto& m : map_stats)
        sup_t = std::max(sup_t, m(0)), vartheta = std::max(vartheta, m(1));

    std::vector<TransportCheck> out;
    for (const auto& field : fields) {
        TransportCheck t;
        t.sup_t = sup_t;
        t.vartheta = vartheta;
        double sup_u = 0.0, sup_du = 0.0, h1 = 0.0;
        for (std::size_t i = 0; i < nball; ++i) {
            const Vec3 v = field.value(ball[i]);
            const Mat3 d = field.jacobian(ball[i]);
            sup_u = std::max(sup_u, v.norm());
            sup_du = std::max(sup_du, d.norm());
            h1 += ball_w[i] * (v.squaredNorm() + d.squaredNorm());
        }
        const std::size_t nblk = (static_cast<std::size_t>(nd) + kBlock - 1) / kBlock;
        std::vector<Eigen::Vector2d> part(nblk, Eigen::Vector2d::Zero());
        parallel_for(nblk, [&](std::size_t blk) {
            for (std::size_t i = blk * kBlock; i < std::min(static_cast<std::size_t>(nd), (blk + 1) * kBlock); ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                const double diff = (field.value(txs.col(ii)) - field.value(xs.col(ii))).norm();
                part[blk](0) = std::max(part[blk](0), diff);
                part[blk](1) += ws(ii) * diff * diff;
            }
        });
        double l2 = 0.0;
        for (const auto& p : part)
            t.linf_lhs = std::max(t.linf_lhs, p(0)), l2 += p(1);
        t.w1inf = sup_u + sup_du;
        t.h1 = std::sqrt(h1);
        t.linf_rhs = t.sup_t * t.w1inf;
        t.l2_lhs = std::sqrt(l2);
        t.l2_rhs = (std::sqrt(t.vartheta) + 1.0) * t.sup_t * t.h1;
        out.push_back(t);
    }
    return out;
}

TransportCheck transport_bounds(const DomainMap& map, const Mesh& mesh, const SmoothField& field, double hold_all)
{
    return transport_bounds(map, mesh, std::span<const SmoothField>(&field, 1), hold_all).front();
}

} // namespace curlfem
