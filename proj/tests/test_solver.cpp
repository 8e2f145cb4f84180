#include "curlfem/solver.hpp"

#include <doctest.h>

#include <random>

using namespace curlfem;

namespace {

SparseMatrix from_dense(const Eigen::MatrixXcd& a)
{
    SparseMatrix s = a.sparseView();
    s.makeCompressed();
    return s;
}

const SolverOptions kDirect{SolverMethod::direct, 1e-10};
const SolverOptions kIterative{SolverMethod::iterative, 1e-10};

} // namespace

TEST_CASE("solver examples")
{
    for (const auto& opt : {kDirect, kIterative}) {
        const SparseMatrix id = from_dense(Eigen::MatrixXcd::Identity(4, 4));
        const Eigen::VectorXcd e1 = Eigen::VectorXcd::Unit(4, 0);
        const auto r = solve(id, e1, opt);
        CHECK((r.x - e1).norm() <= 1e-14);
        CHECK(r.report.method == opt.method);

        Eigen::MatrixXcd a(2, 2);
        a << 2, 1, 1, 2;
        const auto s = solve(from_dense(a), Eigen::VectorXcd::Constant(2, 3.0), opt);
        CHECK(std::abs(s.x(0) - 1.0) <= 1e-12);
        CHECK(std::abs(s.x(1) - 1.0) <= 1e-12);
        CHECK(s.report.relative_residual <= 1e-10);
    }
}

TEST_CASE("complex non-symmetric system")
{
    std::mt19937 gen(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXcd a = Eigen::MatrixXcd::NullaryExpr(30, 30, [&] { return Complex(u(gen), u(gen)); });
    a.diagonal().array() += 10.0;
    const Eigen::VectorXcd x = Eigen::VectorXcd::NullaryExpr(30, [&] { return Complex(u(gen), u(gen)); });
    for (const auto& opt : {kDirect, kIterative}) {
        const auto r = solve(from_dense(a), a * x, opt);
        CHECK((r.x - x).norm() <= 1e-9 * x.norm());
        CHECK_FALSE(r.report.real_arithmetic);
    }
}

TEST_CASE("solver errors")
{
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(3, 3);
    a(0, 0) = 1.0;
    a(1, 1) = 1.0;
    CHECK_THROWS_WITH(solve(from_dense(a), Eigen::VectorXcd::Ones(3), kDirect), doctest::Contains("singular"));
    CHECK_THROWS_WITH(solve(from_dense(a), Eigen::VectorXcd::Ones(3), kIterative),
                      doctest::Contains("residual history"));
    CHECK_THROWS_WITH(solve(from_dense(a), Eigen::VectorXcd::Ones(2), kDirect), doctest::Contains("size mismatch"));
    CHECK_THROWS_WITH(solve(SparseMatrix(0, 0), Eigen::VectorXcd(), kDirect), doctest::Contains("empty"));
    SolverOptions bad = kDirect;
    bad.tol = 0.0;
    CHECK_THROWS_AS(solve(from_dense(Eigen::MatrixXcd::Identity(2, 2)), Eigen::VectorXcd::Ones(2), bad), Error);
    CHECK_THROWS_AS(parse_solver_method("cg"), Error);
    CHECK(parse_solver_method("iterative") == SolverMethod::iterative);
}

TEST_CASE("ball level 1 systems")
{
    for (int order : {1, 2}) {
        const Mesh mesh = generate_ball_mesh(1, order);
        for (int k : {1, 2}) {
            const auto sys = apply_pec(assemble(mesh, k, ball_materials()));
            const auto d = solve(sys, kDirect);
            INFO("order " << order << " k " << k);
            // Residual recomputed independently of the solver.
            const double res = (sys.matrix * d.x - sys.rhs).norm() / sys.rhs.norm();
            CHECK(res <= 1e-10);
            CHECK(d.report.relative_residual == doctest::Approx(res).epsilon(1e-6));
            CHECK(d.report.real_arithmetic);
            CHECK(d.report.fill >= sys.matrix.nonZeros() / 2);
            CHECK(d.x.imag().norm() <= 1e-10 * d.x.norm());

            SolverOptions tight = kIterative;
            tight.tol = 1e-11;
            const auto it = solve(sys, tight);
            CHECK(it.report.iterations > 0);
            CHECK(!it.report.residual_history.empty());
            CHECK((it.x - d.x).norm() <= 1e-8 * d.x.norm());
        }
    }
}

TEST_CASE("direct and iterative agree on the cube cavity")
{
    const Mesh mesh = generate_cube_mesh(2);
    for (int k : {1, 2}) {
        const auto sys = apply_pec(assemble(mesh, k, cube_materials()));
        REQUIRE(sys.matrix.rows() <= 5000);
        SolverOptions tight = kIterative;
        tight.tol = 1e-11;
        const auto d = solve(sys, kDirect);
        const auto it = solve(sys, tight);
        INFO("k " << k << " iterations " << it.report.iterations);
        CHECK((it.x - d.x).norm() <= 1e-8 * d.x.norm());
    }
}

TEST_CASE("direct backend follows the matrix class")
{
    const auto ball = apply_pec(assemble(generate_ball_mesh(1, 1), 1, ball_materials()));
    const auto cube = apply_pec(assemble(generate_cube_mesh(1), 1, cube_materials()));
    const auto b = solve(ball, kDirect).report.backend;
    const auto c = solve(cube, kDirect).report.backend;
#if defined(CURLFEM_HAVE_CHOLMOD)
    CHECK(b == "CHOLMOD supernodal Cholesky");
#endif
#if defined(CURLFEM_HAVE_UMFPACK)
    CHECK(c == "UMFPACK LU");
#else
    CHECK(c == "Eigen SparseLU");
#endif
#if !defined(CURLFEM_HAVE_CHOLMOD)
    CHECK(b == c);
#endif
}

TEST_CASE("Galerkin orthogonality of the discrete solution")
{
    // Manufactured discrete solution, then Phi_h(u_h, v) = F_h(v) for random v.
    const auto sys = apply_pec(assemble(generate_ball_mesh(1, 2), 2, ball_materials()));
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Eigen::VectorXcd x = Eigen::VectorXcd::NullaryExpr(sys.matrix.rows(), [&] { return Complex(u(gen), u(gen)); });
    const auto r = solve(sys.matrix, sys.matrix * x, kDirect);
    CHECK((r.x - x).norm() <= 1e-9 * x.norm());
    const auto sol = solve(sys, kDirect);
    const Eigen::VectorXcd v = Eigen::VectorXcd::NullaryExpr(sys.matrix.rows(), [&] { return Complex(u(gen), 0.0); });
    CHECK(std::abs(v.dot(sys.matrix * sol.x - sys.rhs)) <= 1e-10 * v.norm() * sys.rhs.norm());
}

TEST_CASE("direct solve is deterministic")
{
    const auto sys = apply_pec(assemble(generate_ball_mesh(1, 1), 1, ball_materials()));
    const auto a = solve(sys, kDirect), b = solve(sys, kDirect);
    CHECK((a.x - b.x).norm() == 0.0);
}
