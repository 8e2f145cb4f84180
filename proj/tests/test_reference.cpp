#include "curlfem/reference.hpp"

#include <doctest.h>

#include <chrono>
#include <random>

using namespace curlfem;

namespace {

Vec3 random_reference_point(std::mt19937& gen)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    while (true) {
        Vec3 x(u(gen), u(gen), u(gen));
        if (x.sum() <= 1.0)
            return x;
    }
}

// Independent realisation of the DOF functionals: adaptive-free high-order
// Gauss-Legendre on edges and a Duffy-collapsed Gauss-Legendre rule on faces,
// sampling basis functions through NedelecBasis::eval.
Eigen::MatrixXd duality_matrix_oracle(const NedelecBasis& basis)
{
    const int k = basis.degree();
    // 12-point Gauss-Legendre on [0,1] built from the symmetric nodes table.
    const double gl_x[6] = {0.1252334085114689, 0.3678314989981802, 0.5873179542866175,
                            0.7699026741943047, 0.9041172563704749, 0.9815606342467192};
    const double gl_w[6] = {0.2491470458134028, 0.2334925365383548, 0.2031674267230659,
                            0.1600783285433462, 0.1069393259953184, 0.0471753363865118};
    std::vector<std::pair<double, double>> gl; // on [0,1]
    for (int i = 0; i < 6; ++i) {
        gl.emplace_back(0.5 * (1.0 - gl_x[i]), 0.5 * gl_w[i]);
        gl.emplace_back(0.5 * (1.0 + gl_x[i]), 0.5 * gl_w[i]);
    }

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(basis.dim(), basis.dim());
    int row = 0;
    for (const auto& e : ReferenceTet::kEdges) {
        const Vec3 a = ReferenceTet::vertex(e[0]), b = ReferenceTet::vertex(e[1]);
        for (int slot = 0; slot < k; ++slot, ++row) {
            for (const auto& [s, w] : gl) {
                auto [vals, curls] = basis.eval(a + s * (b - a));
                const double q = k == 1 ? 1.0 : (slot == 0 ? 1.0 - s : s);
                m.row(row) += w * q * ((b - a).transpose() * vals);
            }
        }
    }
    if (k == 2) {
        for (const auto& f : ReferenceTet::kFaces) {
            const Vec3 a = ReferenceTet::vertex(f[0]);
            const Vec3 fu = ReferenceTet::vertex(f[1]) - a, fv = ReferenceTet::vertex(f[2]) - a;
            for (int slot = 0; slot < 2; ++slot, ++row) {
                const Vec3 dir = slot == 0 ? fu : fv;
                for (const auto& [s, ws] : gl)
                    for (const auto& [t, wt] : gl) {
                        // (u, v) = (s, (1-s) t), Jacobian (1-s)
                        auto [vals, curls] = basis.eval(a + s * fu + (1.0 - s) * t * fv);
                        m.row(row) += ws * wt * (1.0 - s) * (dir.transpose() * vals);
                    }
            }
        }
    }
    return m;
}

} // namespace

TEST_CASE("reference tetrahedron")
{
    CHECK(ReferenceTet::volume() == doctest::Approx(1.0 / 6.0));
    CHECK(ReferenceTet::vertex(0).isZero());
    CHECK(ReferenceTet::vertex(3) == Vec3(0, 0, 1));
    CHECK(ReferenceTet::contains(Vec3(0.25, 0.25, 0.25)));
    CHECK_FALSE(ReferenceTet::contains(Vec3(0.5, 0.5, 0.5)));
    // Each face omits exactly the vertex it is named after.
    for (int f = 0; f < 4; ++f)
        for (int v : ReferenceTet::kFaces[f])
            CHECK(v != f);
}

TEST_CASE("quadrature examples")
{
    const auto& q0 = quadrature(0);
    CHECK(q0.integrate([](const Vec3&) { return 1.0; }) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));

    const auto& q1 = quadrature(1);
    CHECK(q1.exactness >= 1);
    CHECK(q1.integrate([](const Vec3& x) { return x(0); }) == doctest::Approx(1.0 / 24.0).epsilon(1e-14));

    // simplex moment 2!1!2!/8! = 4/40320
    const auto& q5 = quadrature(5);
    const double v = q5.integrate([](const Vec3& x) { return x(0) * x(0) * x(1) * x(2) * x(2); });
    CHECK(v == doctest::Approx(4.0 / 40320.0).epsilon(1e-13));
    CHECK(4.0 / 40320.0 == doctest::Approx(9.9206e-5).epsilon(1e-4));
}

TEST_CASE("quadrature weights sum to the simplex volume")
{
    for (int n = 0; n <= kMaxQuadratureExactness; ++n) {
        CHECK(quadrature(n).weights.sum() == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
        CHECK(triangle_quadrature(n).weights.sum() == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(line_quadrature(n).weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(quadrature(n).exactness >= n);
    }
}

TEST_CASE("quadrature certification is exhaustive over monomials")
{
    for (int n = 0; n <= kMaxQuadratureExactness; ++n) {
        const auto& rule = quadrature(n);
        CHECK(max_monomial_error(rule, rule.exactness) <= 1e-12);
        const auto& tri = triangle_quadrature(n);
        CHECK(max_monomial_error(tri, tri.exactness) <= 1e-12);
    }
    // Negative control: one degree past the certified exactness must fail.
    const auto& rule = quadrature(3);
    CHECK(max_monomial_error(rule, rule.exactness + 1) > 1e-8);
}

TEST_CASE("quadrature rejects out-of-range requests")
{
    CHECK_THROWS_AS(quadrature(-1), Error);
    CHECK_THROWS_WITH(quadrature(kMaxQuadratureExactness + 1), doctest::Contains("maximum of 30"));
}

TEST_CASE("nedelec dimensions")
{
    CHECK(nedelec_space(1).dim() == 6);
    CHECK(nedelec_space(2).dim() == 20);
    CHECK_THROWS_WITH(nedelec_space(0), doctest::Contains("degree unsupported"));
    CHECK_THROWS_WITH(nedelec_space(3), doctest::Contains("degree unsupported"));

    // Rank of the DOF-evaluation matrix on the spanning set equals the dimension.
    for (int k : {1, 2}) {
        const auto& basis = nedelec_basis(k);
        const Eigen::MatrixXd span = nedelec_spanning_set(k);
        const auto m = static_cast<Eigen::Index>(basis.monomials().size());
        Eigen::MatrixXd d(basis.dim(), span.cols());
        for (Eigen::Index j = 0; j < span.cols(); ++j) {
            d.col(j) = basis.apply_dofs<double>([&](const Vec3& x) {
                Vec3 v = Vec3::Zero();
                for (Eigen::Index i = 0; i < m; ++i) {
                    const auto& e = basis.monomials()[i];
                    const double mono = std::pow(x(0), e[0]) * std::pow(x(1), e[1]) * std::pow(x(2), e[2]);
                    for (int c = 0; c < 3; ++c)
                        v(c) += span(c * m + i, j) * mono;
                }
                return v;
            });
        }
        CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(d).rank() == k * (k + 2) * (k + 3) / 2);
    }
}

TEST_CASE("whitney functions")
{
    const auto& b = nedelec_basis(1);
    auto [vals, curls] = b.eval(Vec3::Zero());
    CHECK((vals.col(0) - Vec3(1, 0, 0)).norm() < 1e-13);
    CHECK((curls.col(0) - Vec3(0, -2, 2)).norm() < 1e-13);
    CHECK((curls.col(1) - Vec3(2, 0, -2)).norm() < 1e-13);

    // Oracle: 2 grad(l_a) x grad(l_b) for every edge.
    Eigen::Matrix<double, 4, 3> grad;
    grad << -1, -1, -1, 1, 0, 0, 0, 1, 0, 0, 0, 1;
    for (int e = 0; e < 6; ++e) {
        const Vec3 ga = grad.row(ReferenceTet::kEdges[e][0]).transpose();
        const Vec3 gb = grad.row(ReferenceTet::kEdges[e][1]).transpose();
        CHECK((curls.col(e) - 2.0 * ga.cross(gb)).norm() < 1e-13);
    }
}

TEST_CASE("degree-1 curls are constant")
{
    std::mt19937 gen(7);
    const auto& b = nedelec_basis(1);
    const auto c0 = b.eval(Vec3(0.1, 0.2, 0.3)).second;
    double var = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto c = b.eval(random_reference_point(gen)).second;
        var = std::max(var, (c - c0).squaredNorm());
    }
    CHECK(var <= 1e-14);
}

TEST_CASE("unisolvence against an independent DOF oracle")
{
    for (int k : {1, 2}) {
        const auto& basis = nedelec_basis(k);
        const Eigen::MatrixXd m = duality_matrix_oracle(basis);
        CHECK((m - Eigen::MatrixXd::Identity(basis.dim(), basis.dim())).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("interpolation reproduces the polynomial space")
{
    std::mt19937 gen(11);
    std::normal_distribution<double> nd;
    for (int k : {1, 2}) {
        const auto& basis = nedelec_basis(k);
        for (int trial = 0; trial < 5; ++trial) {
            Eigen::VectorXd c(basis.dim());
            for (auto& v : c)
                v = nd(gen);
            auto field = [&](const Vec3& x) -> Vec3 { return basis.eval(x).first * c; };
            const Eigen::VectorXd back = basis.apply_dofs<double>(field);
            CHECK((back - c).cwiseAbs().maxCoeff() <= 1e-10);
        }
        // The raw spanning fields are members of the space as well.
        const Eigen::MatrixXd span = nedelec_spanning_set(k);
        const auto m = static_cast<Eigen::Index>(basis.monomials().size());
        for (Eigen::Index j = 0; j < span.cols(); ++j) {
            auto field = [&](const Vec3& x) -> Vec3 {
                Vec3 v = Vec3::Zero();
                for (Eigen::Index i = 0; i < m; ++i) {
                    const auto& e = basis.monomials()[i];
                    const double mono = std::pow(x(0), e[0]) * std::pow(x(1), e[1]) * std::pow(x(2), e[2]);
                    for (int cc = 0; cc < 3; ++cc)
                        v(cc) += span(cc * m + i, j) * mono;
                }
                return v;
            };
            const Eigen::VectorXd dofs = basis.apply_dofs<double>(field);
            for (int s = 0; s < 5; ++s) {
                const Vec3 x = random_reference_point(gen);
                CHECK((basis.eval(x).first * dofs - field(x)).norm() <= 1e-10);
            }
        }
    }
}

TEST_CASE("basis evaluation rejects points outside the reference tetrahedron")
{
    CHECK_THROWS_AS(nedelec_basis(1).eval(Vec3(1.0, 1.0, 0.0)), Error);
    CHECK_NOTHROW(nedelec_basis(2).eval(Vec3(1.0, 0.0, 0.0)));
}

TEST_CASE("geometric shapes")
{
    const auto s1 = geometric_shapes(1);
    CHECK(s1.size() == 4);
    const Eigen::VectorXd v = s1.values(Vec3::Constant(0.25));
    for (int i = 0; i < 4; ++i)
        CHECK(v(i) == doctest::Approx(0.25));

    const auto s2 = geometric_shapes(2);
    CHECK(s2.size() == 10);
    for (int j = 0; j < 10; ++j) {
        const Eigen::VectorXd n = s2.values(s2.nodes().col(j));
        for (int i = 0; i < 10; ++i)
            CHECK(n(i) == doctest::Approx(i == j ? 1.0 : 0.0));
    }

    std::mt19937 gen(3);
    for (int t = 0; t < 20; ++t) {
        const Vec3 x = random_reference_point(gen);
        CHECK(std::abs(s1.values(x).sum() - 1.0) <= 1e-14);
        CHECK(std::abs(s2.values(x).sum() - 1.0) <= 1e-14);
        CHECK(s2.gradients(x).colwise().sum().norm() <= 1e-13);
        // Gradients against central differences.
        const double h = 1e-6;
        for (int d = 0; d < 3; ++d) {
            Vec3 xp = x, xm = x;
            xp(d) += h;
            xm(d) -= h;
            const Eigen::VectorXd fd = (s2.values(xp) - s2.values(xm)) / (2 * h);
            CHECK((fd - s2.gradients(x).col(d)).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
    CHECK_THROWS_AS(geometric_shapes(3), Error);
}

TEST_CASE("quadrature certification runtime")
{
    const auto start = std::chrono::steady_clock::now();
    for (int n = 0; n <= kMaxQuadratureExactness; n += 2)
        (void)max_monomial_error(quadrature(n), quadrature(n).exactness);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(secs < 1.0);
}
