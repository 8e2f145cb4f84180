#include "curlfem/transforms.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace curlfem {

// ---------------------------------------------------------------------------
// ElementPullback
// ---------------------------------------------------------------------------

ElementPullback::ElementPullback(GeometricMap map) : map_(std::move(map))
{
    for (int i = 0; i < 4; ++i)
        jacobian(ReferenceTet::vertex(i));
    jacobian(Vec3::Constant(0.25));
}

Mat3 ElementPullback::jacobian(const Vec3& xhat) const
{
    const Mat3 j = map_.jacobian(xhat);
    const double scale = j.cwiseAbs().maxCoeff();
    if (!(j.determinant() > 1e-14 * scale * scale * scale))
        throw Error("singular Jacobian in cell " + std::to_string(map_.cell()));
    return j;
}

Vec3 ElementPullback::reference_point(const Vec3& x) const
{
    Vec3 xhat = Vec3::Constant(0.25);
    const double scale = map_.nodes().cwiseAbs().maxCoeff() + 1.0;
    for (int it = 0; it < 50; ++it) {
        const Vec3 step = map_.jacobian(xhat).partialPivLu().solve(map_.point(xhat) - x);
        xhat -= step;
        if (step.norm() <= 1e-15 * scale || map_.is_affine())
            break;
    }
    if (!ReferenceTet::contains(xhat, 1e-8) || (map_.point(xhat) - x).norm() > 1e-10 * scale)
        throw Error("point is not in cell " + std::to_string(map_.cell()));
    return xhat;
}

template <typename Scalar>
VectorField<Scalar> ElementPullback::pull(const VectorField<Scalar>& field) const
{
    using V = typename VectorField<Scalar>::Value;
    VectorField<Scalar> out;
    out.value = [self = *this, f = field.value](const Vec3& xhat) -> V {
        return self.jacobian(xhat).transpose().cast<Scalar>() * f(self.map_.point(xhat));
    };
    if (field.has_curl())
        out.curl = [self = *this, c = field.curl](const Vec3& xhat) -> V {
            return cofactor(self.jacobian(xhat)).cast<Scalar>() * c(self.map_.point(xhat));
        };
    return out;
}

template <typename Scalar>
VectorField<Scalar> ElementPullback::push(const VectorField<Scalar>& reference_field) const
{
    using V = typename VectorField<Scalar>::Value;
    VectorField<Scalar> out;
    out.value = [self = *this, f = reference_field.value](const Vec3& x) -> V {
        const Vec3 xhat = self.reference_point(x);
        return self.jacobian(xhat).transpose().inverse().cast<Scalar>() * f(xhat);
    };
    if (reference_field.has_curl())
        out.curl = [self = *this, c = reference_field.curl](const Vec3& x) -> V {
            const Vec3 xhat = self.reference_point(x);
            const Mat3 j = self.jacobian(xhat);
            return (j / j.determinant()).cast<Scalar>() * c(xhat);
        };
    return out;
}

template RealField ElementPullback::pull(const RealField&) const;
template ComplexField ElementPullback::pull(const ComplexField&) const;
template RealField ElementPullback::push(const RealField&) const;
template ComplexField ElementPullback::push(const ComplexField&) const;

// ---------------------------------------------------------------------------
// DomainMap
// ---------------------------------------------------------------------------

DomainMap::DomainMap(PointMap forward, PointMap inverse, JacobianMap jacobian, JacobianMap inverse_jacobian,
                     double fd_step)
    : forward_(std::move(forward)),
      inverse_(std::move(inverse)),
      jacobian_(std::move(jacobian)),
      inverse_jacobian_(std::move(inverse_jacobian)),
      fd_step_(fd_step)
{
    if (!forward_ || !inverse_)
        throw Error("domain map needs forward and inverse maps");
}

Mat3 finite_difference_jacobian(const DomainMap::PointMap& f, const Vec3& x, double h)
{
    const double step = h * std::max(1.0, x.norm());
    Mat3 j;
    for (int d = 0; d < 3; ++d) {
        Vec3 xp = x, xm = x;
        xp(d) += step;
        xm(d) -= step;
        j.col(d) = (f(xp) - f(xm)) / (2.0 * step);
    }
    return j;
}

Mat3 DomainMap::jacobian(const Vec3& x) const
{
    return jacobian_ ? jacobian_(x) : finite_difference_jacobian(forward_, x, fd_step_);
}

Mat3 DomainMap::inverse_jacobian(const Vec3& y) const
{
    if (inverse_jacobian_)
        return inverse_jacobian_(y);
    if (jacobian_)
        return jacobian_(inverse_(y)).inverse();
    return finite_difference_jacobian(inverse_, y, fd_step_);
}

DomainMap identity_map()
{
    auto id = [](const Vec3& x) { return x; };
    auto eye = [](const Vec3&) -> Mat3 { return Mat3::Identity(); };
    return DomainMap(id, id, eye, eye);
}

DomainMap dilation_map(double delta)
{
    if (!(delta < 1.0))
        throw Error("dilation needs delta < 1");
    const double a = 1.0 / (1.0 - delta);
    return DomainMap([a](const Vec3& x) -> Vec3 { return a * x; }, [a](const Vec3& y) -> Vec3 { return y / a; },
                     [a](const Vec3&) -> Mat3 { return a * Mat3::Identity(); },
                     [a](const Vec3&) -> Mat3 { return Mat3::Identity() / a; });
}

// ---------------------------------------------------------------------------
// RayBoundary
// ---------------------------------------------------------------------------

namespace {

int local_face(const Mesh& mesh, int cell, int face)
{
    const auto& cf = mesh.cell_faces(cell);
    return static_cast<int>(std::find(cf.begin(), cf.end(), face) - cf.begin());
}

} // namespace

RayBoundary::RayBoundary(const Mesh& mesh) : mesh_(&mesh)
{
    const auto bfaces = mesh.boundary_faces();
    if (bfaces.empty())
        throw Error("mesh has no boundary faces");
    faces_.reserve(bfaces.size());
    maps_.reserve(bfaces.size());
    double mean_cap = 0.0;
    for (int f : bfaces) {
        const int c = mesh.face_cells(f)[0];
        const int lf = local_face(mesh, c, f);
        Face face;
        face.mesh_face = f;
        face.cell = c;
        for (int i = 0; i < 3; ++i) {
            const int v = ReferenceTet::kFaces[lf][i];
            face.ref[i] = ReferenceTet::vertex(v);
            face.corner[i] = mesh.node(mesh.cell(c)[v]);
        }
        maps_.emplace_back(mesh, c);
        face.curved = !maps_.back().is_affine();
        faces_.push_back(face);
    }

    constexpr int n = 4;
    min_radius_ = std::numeric_limits<double>::infinity();
    max_radius_ = 0.0;
    for (int i = 0; i < num_faces(); ++i) {
        auto& face = faces_[i];
        Eigen::Matrix3Xd dirs(3, (n + 1) * (n + 2) / 2);
        int k = 0;
        for (int a = 0; a <= n; ++a)
            for (int b = 0; a + b <= n; ++b) {
                const Vec3 p = face_point(i, double(a) / n, double(b) / n);
                min_radius_ = std::min(min_radius_, p.norm());
                max_radius_ = std::max(max_radius_, p.norm());
                if (!(p.norm() > 0.0))
                    throw Error("boundary face passes through the origin; mesh is not star-shaped");
                dirs.col(k++) = p.normalized();
            }
        const Vec3 normal = (face.corner[1] - face.corner[0]).cross(face.corner[2] - face.corner[0]).normalized();
        min_radius_ = std::min(min_radius_, std::abs(normal.dot(face.corner[0])));
        face.cap_center = dirs.rowwise().mean().normalized();
        double r = 0.0;
        for (Eigen::Index j = 0; j < dirs.cols(); ++j)
            r = std::max(r, (dirs.col(j) - face.cap_center).norm());
        face.cap_radius = 1.1 * r + 1e-12;
        mean_cap += face.cap_radius;
    }
    mean_cap /= num_faces();
    // Lower bound for curved faces dipping below their lattice points.
    min_radius_ *= 0.99;

    grid_ = std::clamp(static_cast<int>(std::ceil(2.0 / mean_cap)), 1, 64);
    buckets_.assign(static_cast<std::size_t>(grid_) * grid_ * grid_, {});
    for (int i = 0; i < num_faces(); ++i) {
        const auto& face = faces_[i];
        std::array<int, 3> lo, hi;
        for (int d = 0; d < 3; ++d) {
            lo[d] = bucket_of(face.cap_center(d) - face.cap_radius);
            hi[d] = bucket_of(face.cap_center(d) + face.cap_radius);
        }
        for (int x = lo[0]; x <= hi[0]; ++x)
            for (int y = lo[1]; y <= hi[1]; ++y)
                for (int z = lo[2]; z <= hi[2]; ++z)
                    buckets_[(static_cast<std::size_t>(x) * grid_ + y) * grid_ + z].push_back(i);
    }
}

int RayBoundary::bucket_of(double t) const
{
    return std::clamp(static_cast<int>(std::floor((t + 1.0) * 0.5 * grid_)), 0, grid_ - 1);
}

Vec3 RayBoundary::face_point(int i, double u, double v) const
{
    const auto& f = faces_[i];
    if (!f.curved)
        return f.corner[0] + u * (f.corner[1] - f.corner[0]) + v * (f.corner[2] - f.corner[0]);
    return maps_[i].point(f.ref[0] + u * (f.ref[1] - f.ref[0]) + v * (f.ref[2] - f.ref[0]));
}

bool RayBoundary::intersect(const Face& f, int i, const Vec3& d, Hit& hit) const
{
    Mat3 m;
    m.col(0) = f.corner[1] - f.corner[0];
    m.col(1) = f.corner[2] - f.corner[0];
    m.col(2) = -d;
    auto lu = m.partialPivLu();
    if (!(std::abs(m.determinant()) > 1e-300))
        return false;
    Vec3 sol = lu.solve(-f.corner[0]);

    if (f.curved) {
        const Vec3 ru = f.ref[1] - f.ref[0], rv = f.ref[2] - f.ref[0];
        for (int it = 0; it < 30; ++it) {
            const Vec3 xhat = f.ref[0] + sol(0) * ru + sol(1) * rv;
            const Mat3 j = maps_[i].jacobian(xhat);
            m.col(0) = j * ru;
            m.col(1) = j * rv;
            const Vec3 step = m.partialPivLu().solve(maps_[i].point(xhat) - sol(2) * d);
            sol -= step;
            if (step.norm() <= 1e-15 * (1.0 + std::abs(sol(2))))
                break;
        }
        const Vec3 xhat = f.ref[0] + sol(0) * ru + sol(1) * rv;
        const Mat3 j = maps_[i].jacobian(xhat);
        m.col(0) = j * ru;
        m.col(1) = j * rv;
    }

    const double margin = std::min({sol(0), sol(1), 1.0 - sol(0) - sol(1)});
    constexpr double tol = 1e-10;
    if (margin < -tol || !(sol(2) > 0.0))
        return false;
    hit.radius = sol(2);
    hit.gradient = sol(2) * m.transpose().partialPivLu().solve(Vec3::UnitZ());
    hit.margin = margin;
    hit.face = f.mesh_face;
    return true;
}

RayBoundary::Hit RayBoundary::exit(const Vec3& direction) const
{
    const Vec3 d = direction.normalized();
    const auto& bucket =
        buckets_[(static_cast<std::size_t>(bucket_of(d(0))) * grid_ + bucket_of(d(1))) * grid_ + bucket_of(d(2))];
    Hit best{0.0, Vec3::Zero(), -std::numeric_limits<double>::infinity(), -1};
    for (int i : bucket) {
        const auto& f = faces_[i];
        if ((d - f.cap_center).norm() > f.cap_radius)
            continue;
        Hit hit;
        if (intersect(f, i, d, hit) && hit.margin > best.margin)
            best = hit;
    }
    if (best.face < 0)
        throw Error("ray does not meet the mesh boundary; mesh is not star-shaped w.r.t. the origin");
    return best;
}

// ---------------------------------------------------------------------------
// Radial map
// ---------------------------------------------------------------------------

namespace {

struct RadialMap {
    RayBoundary boundary;
    double rho0, big_r, h;

    bool in_core(double r) const { return r <= rho0 * boundary.min_radius(); }

    Vec3 forward(const Vec3& x) const
    {
        const double r = x.norm();
        if (in_core(r) || r >= big_r)
            return x;
        const Vec3 d = x / r;
        const double b = boundary.exit(d).radius;
        return stretch(r, b) * d;
    }

    double stretch(double r, double b) const
    {
        if (r <= rho0 * b)
            return r;
        if (r <= b)
            return rho0 * b + (r - rho0 * b) * (1.0 - rho0 * b) / ((1.0 - rho0) * b);
        return 1.0 + (r - b) * (big_r - 1.0) / (big_r - b);
    }

    Vec3 inverse(const Vec3& y) const
    {
        const double rho = y.norm();
        if (in_core(rho) || rho >= big_r)
            return y;
        const Vec3 d = y / rho;
        const double b = boundary.exit(d).radius;
        double r;
        if (rho <= rho0 * b)
            r = rho;
        else if (rho <= 1.0)
            r = rho0 * b + (rho - rho0 * b) * (1.0 - rho0) * b / (1.0 - rho0 * b);
        else
            r = b + (rho - 1.0) * (big_r - b) / (big_r - 1.0);
        return r * d;
    }

    Mat3 jacobian(const Vec3& x) const
    {
        const double r = x.norm();
        if (in_core(r) || r >= big_r)
            return Mat3::Identity();
        const Vec3 d = x / r;
        const auto hit = boundary.exit(d);
        if (hit.margin < 1e-9)
            return finite_difference_jacobian([this](const Vec3& p) { return forward(p); }, x, 1e-6 * h);
        const double b = hit.radius;
        if (r <= rho0 * b)
            return Mat3::Identity();
        double s, s_r, s_b;
        if (r <= b) {
            const double g = (1.0 - rho0 * b) / ((1.0 - rho0) * b);
            s = rho0 * b + (r - rho0 * b) * g;
            s_r = g;
            s_b = rho0 - rho0 * g - (r - rho0 * b) / ((1.0 - rho0) * b * b);
        } else {
            s = 1.0 + (r - b) * (big_r - 1.0) / (big_r - b);
            s_r = (big_r - 1.0) / (big_r - b);
            s_b = (big_r - 1.0) * (r - big_r) / ((big_r - b) * (big_r - b));
        }
        const Mat3 tangential = Mat3::Identity() - d * d.transpose();
        const Vec3 grad_b = tangential * hit.gradient / r;
        return d * (s_r * d + s_b * grad_b).transpose() + (s / r) * tangential;
    }
};

} // namespace

DomainMap radial_domain_map(const Mesh& mesh, double rho0, double hold_all)
{
    if (!(rho0 > 0.0 && rho0 < 1.0))
        throw Error("core radius must lie in (0, 1)");
    auto rm = std::make_shared<RadialMap>(RadialMap{RayBoundary(mesh), rho0, hold_all, mesh.h()});
    if (!(rm->boundary.max_radius() < hold_all) || !(rho0 * rm->boundary.max_radius() < 1.0))
        throw Error("mesh boundary leaves the hold-all ball");
    return DomainMap([rm](const Vec3& x) { return rm->forward(x); }, [rm](const Vec3& y) { return rm->inverse(y); },
                     [rm](const Vec3& x) { return rm->jacobian(x); },
                     [rm](const Vec3& y) -> Mat3 { return rm->jacobian(rm->inverse(y)).inverse(); },
                     1e-6 * mesh.h());
}

// ---------------------------------------------------------------------------
// Sampling and metrics
// ---------------------------------------------------------------------------

Eigen::Matrix3Xd boundary_samples(const Mesh& mesh, int subdivisions)
{
    const int n = subdivisions;
    const int per_face = (n + 1) * (n + 2) / 2;
    const auto bfaces = mesh.boundary_faces();
    Eigen::Matrix3Xd out(3, static_cast<Eigen::Index>(bfaces.size()) * per_face);
    parallel_for(bfaces.size(), [&](std::size_t i) {
        const int f = bfaces[i];
        const int c = mesh.face_cells(f)[0];
        const int lf = local_face(mesh, c, f);
        const GeometricMap map(mesh, c);
        const auto& fv = ReferenceTet::kFaces[lf];
        const Vec3 a = ReferenceTet::vertex(fv[0]);
        const Vec3 eu = ReferenceTet::vertex(fv[1]) - a, ev = ReferenceTet::vertex(fv[2]) - a;
        Eigen::Index k = static_cast<Eigen::Index>(i) * per_face;
        for (int p = 0; p <= n; ++p)
            for (int q = 0; p + q <= n; ++q)
                out.col(k++) = map.point(a + (double(p) / n) * eu + (double(q) / n) * ev);
    });
    return out;
}

Eigen::Matrix3Xd domain_samples(const Mesh& mesh, int cell_exactness)
{
    const auto& rule = quadrature(cell_exactness);
    const Eigen::Index nq = rule.size();
    const Eigen::Matrix3Xd boundary = boundary_samples(mesh);
    Eigen::Matrix3Xd out(3, nq * mesh.num_cells() + boundary.cols());
    parallel_for(static_cast<std::size_t>(mesh.num_cells()), [&](std::size_t c) {
        const GeometricMap map(mesh, static_cast<int>(c));
        for (Eigen::Index q = 0; q < nq; ++q)
            out.col(static_cast<Eigen::Index>(c) * nq + q) = map.point(rule.points.col(q));
    });
    out.rightCols(boundary.cols()) = boundary;
    return out;
}

DomainMetrics discrepancies(const DomainMap& map, const Mesh& mesh, int cell_exactness)
{
    const Eigen::Matrix3Xd samples = domain_samples(mesh, cell_exactness);
    constexpr std::size_t kBlock = 4096;
    const std::size_t n = static_cast<std::size_t>(samples.cols());
    const std::size_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<DomainMetrics> partial(nblocks);
    parallel_for(nblocks, [&](std::size_t blk) {
        DomainMetrics m;
        for (std::size_t i = blk * kBlock; i < std::min(n, (blk + 1) * kBlock); ++i) {
            const Vec3 x = samples.col(static_cast<Eigen::Index>(i));
            m.sup_t = std::max(m.sup_t, (map.forward(x) - x).norm());
            m.sup_t_inverse = std::max(m.sup_t_inverse, (map.inverse(x) - x).norm());
            const Mat3 j = map.jacobian(x);
            const Mat3 ji = map.inverse_jacobian(x);
            m.sup_dt = std::max(m.sup_dt, (j - Mat3::Identity()).operatorNorm());
            m.sup_dt_inverse = std::max(m.sup_dt_inverse, (ji - Mat3::Identity()).operatorNorm());
            for (double v : {j.operatorNorm(), ji.operatorNorm(), j.determinant(), ji.determinant()}) {
                if (!(v > 0.0))
                    throw Error("singular domain-map Jacobian at a sample point");
                m.vartheta = std::max({m.vartheta, v, 1.0 / v});
            }
        }
        partial[blk] = m;
    });
    DomainMetrics out;
    for (const auto& m : partial) {
        out.sup_t = std::max(out.sup_t, m.sup_t);
        out.sup_t_inverse = std::max(out.sup_t_inverse, m.sup_t_inverse);
        out.sup_dt = std::max(out.sup_dt, m.sup_dt);
        out.sup_dt_inverse = std::max(out.sup_dt_inverse, m.sup_dt_inverse);
        out.vartheta = std::max(out.vartheta, m.vartheta);
    }
    out.d0 = out.sup_t + out.sup_t_inverse;
    out.d1 = out.d0 + out.sup_dt + out.sup_dt_inverse;
    out.samples = n;
    return out;
}

double hausdorff_estimate(const Mesh& mesh, int subdivisions)
{
    const Eigen::Matrix3Xd pts = boundary_samples(mesh, subdivisions);
    return (1.0 - pts.colwise().norm().array()).abs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Global pull-back
// ---------------------------------------------------------------------------

template <typename Scalar>
VectorField<Scalar> pullback_solution(const DomainMap& map, const VectorField<Scalar>& field)
{
    using V = typename VectorField<Scalar>::Value;
    VectorField<Scalar> out;
    out.value = [map, f = field.value](const Vec3& x) -> V {
        return map.jacobian(x).transpose().cast<Scalar>() * f(map.forward(x));
    };
    if (field.has_curl())
        out.curl = [map, c = field.curl](const Vec3& x) -> V {
            return cofactor(map.jacobian(x)).cast<Scalar>() * c(map.forward(x));
        };
    return out;
}

template <typename Scalar>
VectorField<Scalar> pushforward_solution(const DomainMap& map, const VectorField<Scalar>& field)
{
    using V = typename VectorField<Scalar>::Value;
    VectorField<Scalar> out;
    out.value = [map, f = field.value](const Vec3& y) -> V {
        return map.inverse_jacobian(y).transpose().cast<Scalar>() * f(map.inverse(y));
    };
    if (field.has_curl())
        out.curl = [map, c = field.curl](const Vec3& y) -> V {
            return cofactor(map.inverse_jacobian(y)).cast<Scalar>() * c(map.inverse(y));
        };
    return out;
}

template RealField pullback_solution(const DomainMap&, const RealField&);
template ComplexField pullback_solution(const DomainMap&, const ComplexField&);
template RealField pushforward_solution(const DomainMap&, const RealField&);
template ComplexField pushforward_solution(const DomainMap&, const ComplexField&);

} // namespace curlfem
