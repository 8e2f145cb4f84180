#include "curlfem/reference.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <mutex>
#include <string>

namespace curlfem {

Vec3 ReferenceTet::vertex(int i)
{
    Vec3 v = Vec3::Zero();
    if (i > 0)
        v(i - 1) = 1.0;
    return v;
}

bool ReferenceTet::contains(const Vec3& x, double tol)
{
    return x.minCoeff() >= -tol && x.sum() <= 1.0 + tol;
}

Eigen::Vector4d ReferenceTet::barycentric(const Vec3& x)
{
    return {1.0 - x.sum(), x(0), x(1), x(2)};
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

namespace {

// Jacobi polynomial P_n^{(alpha,0)} and its derivative on [-1,1].
std::pair<double, double> jacobi_with_derivative(int n, double alpha, double x)
{
    const double beta = 0.0;
    double p0 = 1.0, d0 = 0.0;
    if (n == 0)
        return {p0, d0};
    double p1 = 0.5 * (alpha - beta) + 0.5 * (alpha + beta + 2.0) * x;
    double d1 = 0.5 * (alpha + beta + 2.0);
    for (int k = 2; k <= n; ++k) {
        const double s = 2.0 * k + alpha + beta;
        const double a1 = 2.0 * k * (k + alpha + beta) * (s - 2.0);
        const double a2 = (s - 1.0) * (alpha * alpha - beta * beta);
        const double a3 = (s - 2.0) * (s - 1.0) * s;
        const double a4 = 2.0 * (k + alpha - 1.0) * (k + beta - 1.0) * s;
        const double p2 = ((a2 + a3 * x) * p1 - a4 * p0) / a1;
        const double d2 = (a3 * p1 + (a2 + a3 * x) * d1 - a4 * d0) / a1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    return {p1, d1};
}

template <int Dim>
SimplexRule<Dim> collapsed_rule(int npts)
{
    // Conical product: x_0 = u_0, x_1 = (1-u_0) u_1, ... with the Jacobian
    // factors (1-u_j)^(Dim-1-j) absorbed into Gauss-Jacobi weights.
    std::array<std::pair<Eigen::VectorXd, Eigen::VectorXd>, Dim> axes;
    for (int j = 0; j < Dim; ++j)
        axes[j] = gauss_jacobi(npts, static_cast<double>(Dim - 1 - j));

    Eigen::Index total = 1;
    for (int j = 0; j < Dim; ++j)
        total *= npts;

    SimplexRule<Dim> rule;
    rule.points.resize(Dim, total);
    rule.weights.resize(total);
    std::array<int, Dim> idx{};
    for (Eigen::Index q = 0; q < total; ++q) {
        double scale = 1.0;
        double w = 1.0;
        for (int j = 0; j < Dim; ++j) {
            const double u = axes[j].first(idx[j]);
            rule.points(j, q) = scale * u;
            scale *= 1.0 - u;
            w *= axes[j].second(idx[j]);
        }
        rule.weights(q) = w;
        for (int j = Dim - 1; j >= 0; --j) {
            if (++idx[j] < npts)
                break;
            idx[j] = 0;
        }
    }
    rule.exactness = 2 * npts - 1;
    return rule;
}

template <int Dim>
const SimplexRule<Dim>& cached_rule(int requested)
{
    if (requested < 0)
        throw Error("quadrature exactness must be non-negative (got " + std::to_string(requested) + ")");
    if (requested > kMaxQuadratureExactness)
        throw Error("quadrature exactness " + std::to_string(requested) + " exceeds the maximum of "
                    + std::to_string(kMaxQuadratureExactness));

    static std::mutex mutex;
    static std::map<int, SimplexRule<Dim>> cache;
    const int npts = requested / 2 + 1;
    std::lock_guard lock(mutex);
    auto it = cache.find(npts);
    if (it == cache.end()) {
        auto rule = collapsed_rule<Dim>(npts);
        const double err = max_monomial_error(rule, rule.exactness);
        if (!(err <= 1e-12))
            throw Error("quadrature certification failed: degree " + std::to_string(rule.exactness)
                        + " rule has relative monomial error " + std::to_string(err));
        it = cache.emplace(npts, std::move(rule)).first;
    }
    return it->second;
}

} // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_jacobi(int n, double alpha)
{
    if (n < 1)
        throw Error("gauss_jacobi: need at least one point");
    const double beta = 0.0;

    // Golub-Welsch on [-1,1] for (1-x)^alpha (1+x)^beta.
    Eigen::VectorXd diag(n), off(std::max(n - 1, 0));
    for (int i = 0; i < n; ++i) {
        const double s = 2.0 * i + alpha + beta;
        diag(i) = (i == 0) ? (beta - alpha) / (alpha + beta + 2.0)
                           : (beta * beta - alpha * alpha) / (s * (s + 2.0));
    }
    for (int i = 1; i < n; ++i) {
        const double s = 2.0 * i + alpha + beta;
        off(i - 1) = std::sqrt(4.0 * i * (i + alpha) * (i + beta) * (i + alpha + beta)
                               / (s * s * (s + 1.0) * (s - 1.0)));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    eig.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);

    const double mu0 = std::pow(2.0, alpha + beta + 1.0) * std::tgamma(alpha + 1.0) * std::tgamma(beta + 1.0)
                       / std::tgamma(alpha + beta + 2.0);
    Eigen::VectorXd x = eig.eigenvalues();
    Eigen::VectorXd w = mu0 * eig.eigenvectors().row(0).transpose().array().square();

    // Newton polish of the nodes.
    for (int i = 0; i < n; ++i) {
        for (int it = 0; it < 3; ++it) {
            auto [p, dp] = jacobi_with_derivative(n, alpha, x(i));
            if (dp == 0.0)
                break;
            x(i) -= p / dp;
        }
    }

    // Map to [0,1]: int_0^1 (1-t)^a f dt = 2^{-a-1} int_{-1}^1 (1-x)^a f((1+x)/2) dx.
    Eigen::VectorXd t = 0.5 * (x.array() + 1.0);
    w *= std::pow(2.0, -alpha - 1.0);
    return {t, w};
}

const QuadratureRule& quadrature(int requested_exactness) { return cached_rule<3>(requested_exactness); }
const TriangleRule& triangle_quadrature(int requested_exactness) { return cached_rule<2>(requested_exactness); }
const LineRule& line_quadrature(int requested_exactness) { return cached_rule<1>(requested_exactness); }

double simplex_moment(std::span<const int> exponents)
{
    double num = 1.0;
    int total = 0;
    for (int a : exponents) {
        for (int i = 2; i <= a; ++i)
            num *= i;
        total += a;
    }
    double den = 1.0;
    for (int i = 2; i <= total + static_cast<int>(exponents.size()); ++i)
        den *= i;
    return num / den;
}

template <int Dim>
double max_monomial_error(const SimplexRule<Dim>& rule, int degree)
{
    const Eigen::Index nq = rule.size();
    // powers[d](e, q) = x_d(q)^e
    std::array<Eigen::MatrixXd, Dim> powers;
    for (int d = 0; d < Dim; ++d) {
        powers[d].resize(degree + 1, nq);
        powers[d].row(0).setOnes();
        for (int e = 1; e <= degree; ++e)
            powers[d].row(e) = powers[d].row(e - 1).cwiseProduct(rule.points.row(d));
    }

    double worst = 0.0;
    std::array<int, Dim> exps{};
    while (true) {
        int sum = 0;
        for (int e : exps)
            sum += e;
        if (sum <= degree) {
            Eigen::ArrayXd integrand = Eigen::ArrayXd::Ones(nq);
            for (int d = 0; d < Dim; ++d)
                integrand *= powers[d].row(exps[d]).transpose().array();
            const double approx = (integrand * rule.weights.array()).sum();
            const double exact = simplex_moment(exps);
            worst = std::max(worst, std::abs(approx - exact) / exact);
        }
        int d = Dim - 1;
        while (d >= 0 && ++exps[d] > degree) {
            exps[d] = 0;
            --d;
        }
        if (d < 0)
            break;
    }
    return worst;
}

template double max_monomial_error<1>(const SimplexRule<1>&, int);
template double max_monomial_error<2>(const SimplexRule<2>&, int);
template double max_monomial_error<3>(const SimplexRule<3>&, int);

// ---------------------------------------------------------------------------
// Geometric shapes
// ---------------------------------------------------------------------------

GeometricShapeSet::GeometricShapeSet(int order) : order_(order)
{
    if (order != 1 && order != 2)
        throw Error("geometric order " + std::to_string(order) + " unsupported (expected 1 or 2)");
    nodes_.resize(3, size());
    for (int i = 0; i < 4; ++i)
        nodes_.col(i) = ReferenceTet::vertex(i);
    if (order == 2)
        for (int e = 0; e < 6; ++e)
            nodes_.col(4 + e) = 0.5 * (ReferenceTet::vertex(ReferenceTet::kEdges[e][0])
                                       + ReferenceTet::vertex(ReferenceTet::kEdges[e][1]));
}

Eigen::VectorXd GeometricShapeSet::values(const Vec3& x) const
{
    const Eigen::Vector4d l = ReferenceTet::barycentric(x);
    Eigen::VectorXd n(size());
    if (order_ == 1) {
        n = l;
        return n;
    }
    for (int i = 0; i < 4; ++i)
        n(i) = l(i) * (2.0 * l(i) - 1.0);
    for (int e = 0; e < 6; ++e)
        n(4 + e) = 4.0 * l(ReferenceTet::kEdges[e][0]) * l(ReferenceTet::kEdges[e][1]);
    return n;
}

Eigen::MatrixX3d GeometricShapeSet::gradients(const Vec3& x) const
{
    const Eigen::Vector4d l = ReferenceTet::barycentric(x);
    Eigen::Matrix<double, 4, 3> dl;
    dl.row(0).setConstant(-1.0);
    dl.bottomRows<3>().setIdentity();

    Eigen::MatrixX3d g(size(), 3);
    if (order_ == 1) {
        g = dl;
        return g;
    }
    for (int i = 0; i < 4; ++i)
        g.row(i) = (4.0 * l(i) - 1.0) * dl.row(i);
    for (int e = 0; e < 6; ++e) {
        const int a = ReferenceTet::kEdges[e][0], b = ReferenceTet::kEdges[e][1];
        g.row(4 + e) = 4.0 * (l(a) * dl.row(b) + l(b) * dl.row(a));
    }
    return g;
}

GeometricShapeSet geometric_shapes(int order) { return GeometricShapeSet(order); }

// ---------------------------------------------------------------------------
// Nedelec basis
// ---------------------------------------------------------------------------

std::vector<std::array<int, 3>> monomial_exponents(int degree)
{
    std::vector<std::array<int, 3>> out;
    for (int d = 0; d <= degree; ++d)
        for (int a = d; a >= 0; --a)
            for (int b = d - a; b >= 0; --b)
                out.push_back({a, b, d - a - b});
    return out;
}

namespace {

int monomial_index(const std::vector<std::array<int, 3>>& monos, std::array<int, 3> e)
{
    for (std::size_t i = 0; i < monos.size(); ++i)
        if (monos[i] == e)
            return static_cast<int>(i);
    throw Error("monomial not in table");
}

void check_degree(int k)
{
    if (k != 1 && k != 2)
        throw Error("degree unsupported: Nedelec degree " + std::to_string(k) + " (supported: 1, 2)");
}

} // namespace

Eigen::MatrixXd nedelec_spanning_set(int k)
{
    check_degree(k);
    const auto monos = monomial_exponents(k);
    const auto m = static_cast<Eigen::Index>(monos.size());
    std::vector<Eigen::VectorXd> fields;

    auto unit = [](int i) {
        std::array<int, 3> e{0, 0, 0};
        if (i >= 0)
            e[i] = 1;
        return e;
    };
    auto add = [](std::array<int, 3> a, std::array<int, 3> b) {
        return std::array<int, 3>{a[0] + b[0], a[1] + b[1], a[2] + b[2]};
    };

    // P_{k-1}^3
    for (const auto& e : monomial_exponents(k - 1)) {
        for (int c = 0; c < 3; ++c) {
            Eigen::VectorXd f = Eigen::VectorXd::Zero(3 * m);
            f(c * m + monomial_index(monos, e)) = 1.0;
            fields.push_back(f);
        }
    }
    // x × (x^beta e_j) for homogeneous degree k-1 monomials x^beta; for k = 2 the
    // relation sum_i x × (x_i e_i) = 0 is removed by skipping (x_3, e_3).
    const auto homogeneous = [&] {
        std::vector<std::array<int, 3>> h;
        for (const auto& e : monomial_exponents(k - 1))
            if (e[0] + e[1] + e[2] == k - 1)
                h.push_back(e);
        return h;
    }();
    for (const auto& beta : homogeneous) {
        for (int j = 0; j < 3; ++j) {
            if (k == 2 && beta == unit(2) && j == 2)
                continue;
            // (x × e_j) x^beta: component c gets eps_{c,i,j} x_i x^beta
            Eigen::VectorXd f = Eigen::VectorXd::Zero(3 * m);
            for (int c = 0; c < 3; ++c) {
                for (int i = 0; i < 3; ++i) {
                    const int i1 = (c + 1) % 3, i2 = (c + 2) % 3;
                    double eps = 0.0;
                    if (i == i1 && j == i2)
                        eps = 1.0;
                    else if (i == i2 && j == i1)
                        eps = -1.0;
                    if (eps != 0.0)
                        f(c * m + monomial_index(monos, add(beta, unit(i)))) += eps;
                }
            }
            fields.push_back(f);
        }
    }

    Eigen::MatrixXd out(3 * m, static_cast<Eigen::Index>(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j)
        out.col(static_cast<Eigen::Index>(j)) = fields[j];
    return out;
}

NedelecBasis::NedelecBasis(int degree) : degree_(degree)
{
    check_degree(degree);
    dim_ = degree * (degree + 2) * (degree + 3) / 2;
    monomials_ = monomial_exponents(degree);

    // DOF functionals as weighted point samples.
    std::vector<Vec3> pts;
    std::vector<std::vector<std::pair<int, Vec3>>> per_point;

    auto push_point = [&](const Vec3& p) {
        pts.push_back(p);
        per_point.emplace_back();
        return per_point.size() - 1;
    };

    const auto& line = line_quadrature(2 * degree + 2);
    for (int e = 0; e < 6; ++e) {
        const Vec3 a = ReferenceTet::vertex(ReferenceTet::kEdges[e][0]);
        const Vec3 b = ReferenceTet::vertex(ReferenceTet::kEdges[e][1]);
        const Vec3 t = b - a;
        for (int slot = 0; slot < degree; ++slot)
            dofs_.push_back({DofDescriptor::Entity::edge, e, slot});
        for (Eigen::Index q = 0; q < line.size(); ++q) {
            const double s = line.points(0, q);
            const double w = line.weights(q);
            const auto idx = push_point(a + s * t);
            if (degree == 1) {
                per_point[idx].push_back({e, w * t});
            } else {
                per_point[idx].push_back({2 * e, w * (1.0 - s) * t});
                per_point[idx].push_back({2 * e + 1, w * s * t});
            }
        }
    }
    if (degree == 2) {
        const auto& tri = triangle_quadrature(2 * degree + 2);
        for (int f = 0; f < 4; ++f) {
            const auto& fv = ReferenceTet::kFaces[f];
            const Vec3 a = ReferenceTet::vertex(fv[0]);
            const Vec3 fu = ReferenceTet::vertex(fv[1]) - a;
            const Vec3 fw = ReferenceTet::vertex(fv[2]) - a;
            for (int slot = 0; slot < 2; ++slot)
                dofs_.push_back({DofDescriptor::Entity::face, f, slot});
            const int base = 12 + 2 * f;
            for (Eigen::Index q = 0; q < tri.size(); ++q) {
                const double u = tri.points(0, q), v = tri.points(1, q);
                const double w = tri.weights(q);
                const auto idx = push_point(a + u * fu + v * fw);
                per_point[idx].push_back({base, w * fu});
                per_point[idx].push_back({base + 1, w * fw});
            }
        }
    }

    const auto npts = static_cast<Eigen::Index>(pts.size());
    dof_points_.resize(3, npts);
    dof_weights_ = Eigen::MatrixXd::Zero(dim_, 3 * npts);
    for (Eigen::Index q = 0; q < npts; ++q) {
        dof_points_.col(q) = pts[q];
        for (const auto& [dof, dir] : per_point[q])
            dof_weights_.block<1, 3>(dof, 3 * q) += dir.transpose();
    }

    // Duality: coeffs = S * D^{-1} with D_ij = sigma_i(s_j).
    const Eigen::MatrixXd span = nedelec_spanning_set(degree);
    coeffs_ = span;
    Eigen::MatrixXd samples(3 * npts, dim_);
    Eigen::Matrix3Xd vals(3, dim_), curls(3, dim_);
    for (Eigen::Index q = 0; q < npts; ++q) {
        eval_unchecked(dof_points_.col(q), vals, curls);
        for (int j = 0; j < dim_; ++j)
            samples.block<3, 1>(3 * q, j) = vals.col(j);
    }
    const Eigen::MatrixXd dual = dof_weights_ * samples;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(dual);
    if (lu.rank() != dim_)
        throw Error("Nedelec DOF matrix is singular (rank " + std::to_string(lu.rank()) + ")");
    coeffs_ = span * lu.inverse();
}

void NedelecBasis::eval_unchecked(const Vec3& x, Eigen::Ref<Eigen::Matrix3Xd> values,
                                  Eigen::Ref<Eigen::Matrix3Xd> curls) const
{
    const auto m = static_cast<Eigen::Index>(monomials_.size());
    Eigen::VectorXd mv(m);
    Eigen::Matrix<double, Eigen::Dynamic, 3> grad(m, 3);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& e = monomials_[i];
        std::array<double, 3> p{}, dp{};
        for (int d = 0; d < 3; ++d) {
            p[d] = std::pow(x(d), e[d]);
            dp[d] = e[d] == 0 ? 0.0 : e[d] * std::pow(x(d), e[d] - 1);
        }
        mv(i) = p[0] * p[1] * p[2];
        grad(i, 0) = dp[0] * p[1] * p[2];
        grad(i, 1) = p[0] * dp[1] * p[2];
        grad(i, 2) = p[0] * p[1] * dp[2];
    }
    const auto cx = coeffs_.middleRows(0, m);
    const auto cy = coeffs_.middleRows(m, m);
    const auto cz = coeffs_.middleRows(2 * m, m);
    values.row(0) = mv.transpose() * cx;
    values.row(1) = mv.transpose() * cy;
    values.row(2) = mv.transpose() * cz;
    curls.row(0) = grad.col(1).transpose() * cz - grad.col(2).transpose() * cy;
    curls.row(1) = grad.col(2).transpose() * cx - grad.col(0).transpose() * cz;
    curls.row(2) = grad.col(0).transpose() * cy - grad.col(1).transpose() * cx;
}

std::pair<Eigen::Matrix3Xd, Eigen::Matrix3Xd> NedelecBasis::eval(const Vec3& x) const
{
    if (!ReferenceTet::contains(x))
        throw Error("point outside reference tetrahedron");
    Eigen::Matrix3Xd values(3, dim_), curls(3, dim_);
    eval_unchecked(x, values, curls);
    return {values, curls};
}

BasisTable NedelecBasis::tabulate(const Eigen::Matrix3Xd& points) const
{
    BasisTable table;
    table.dim = dim_;
    table.values.resize(3, points.cols() * dim_);
    table.curls.resize(3, points.cols() * dim_);
    for (Eigen::Index q = 0; q < points.cols(); ++q) {
        if (!ReferenceTet::contains(points.col(q)))
            throw Error("point outside reference tetrahedron");
        eval_unchecked(points.col(q), table.values.middleCols(q * dim_, dim_), table.curls.middleCols(q * dim_, dim_));
    }
    return table;
}

NedelecBasis nedelec_space(int k) { return NedelecBasis(k); }

const NedelecBasis& nedelec_basis(int k)
{
    check_degree(k);
    static const NedelecBasis k1(1);
    static const NedelecBasis k2(2);
    return k == 1 ? k1 : k2;
}

} // namespace curlfem
