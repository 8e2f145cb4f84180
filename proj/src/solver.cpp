#include "curlfem/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#ifdef CURLFEM_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif
#ifdef CURLFEM_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include <cmath>
#include <sstream>

namespace curlfem {

std::string to_string(SolverMethod method)
{
    return method == SolverMethod::direct ? "direct" : "iterative";
}

SolverMethod parse_solver_method(const std::string& name)
{
    if (name == "direct")
        return SolverMethod::direct;
    if (name == "iterative")
        return SolverMethod::iterative;
    throw Error("unknown solver '" + name + "' (expected direct or iterative)");
}

namespace {

template <typename Scalar>
using Sparse = Eigen::SparseMatrix<Scalar>;
template <typename Scalar>
using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
double residual(const Sparse<Scalar>& a, const Dense<Scalar>& x, const Dense<Scalar>& b)
{
    const double nb = b.norm();
    return nb == 0.0 ? (a * x).norm() : (a * x - b).norm() / nb;
}

#ifdef CURLFEM_HAVE_UMFPACK
// 64-bit indices: the int interface of UMFPACK runs out of address space near 2e5 DOFs.
template <typename Scalar>
using LongSparse = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, SuiteSparse_long>;

template <typename Scalar>
class Umfpack : public Eigen::UmfPackLU<LongSparse<Scalar>> {
public:
    double info_entry(int i) const { return this->m_umfpackInfo(i); }
};

std::string umfpack_status(double status)
{
    switch (static_cast<int>(status)) {
    case UMFPACK_WARNING_singular_matrix:
        return "singular matrix";
    case UMFPACK_ERROR_out_of_memory:
        return "out of memory";
    case UMFPACK_ERROR_invalid_matrix:
        return "invalid matrix";
    default:
        return "status " + std::to_string(static_cast<int>(status));
    }
}
#endif

#ifdef CURLFEM_HAVE_CHOLMOD
class Cholesky : public Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double, Eigen::ColMajor, SuiteSparse_long>> {
public:
    Cholesky() { cholmod().print = 0; }
    long fill() const
    {
        return static_cast<long>(m_cholmodFactor->is_super ? m_cholmodFactor->xsize : m_cholmodFactor->nzmax);
    }
};

// Supernodal Cholesky of a symmetric positive definite A; false if A is not positive definite.
bool cholesky(const Sparse<double>& a, const Dense<double>& b, Dense<double>& x, SolveReport& report)
{
    const Eigen::SparseMatrix<double, Eigen::ColMajor, SuiteSparse_long> lower =
        Eigen::SparseMatrix<double, Eigen::ColMajor, SuiteSparse_long>(a).triangularView<Eigen::Lower>();
    Cholesky llt;
    llt.compute(lower.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success)
        return false;
    report.backend = "CHOLMOD supernodal Cholesky";
    report.fill = llt.fill();
    x = llt.solve(b);
    return true;
}
#endif

bool symmetric(const Sparse<double>& a)
{
    const Sparse<double> t = a.transpose();
    return (a - t).norm() <= 1e-13 * a.norm();
}

template <typename Scalar>
Dense<Scalar> direct(const Sparse<Scalar>& a, const Dense<Scalar>& b, double tol, SolveReport& report)
{
#ifdef CURLFEM_HAVE_CHOLMOD
    if constexpr (std::is_same_v<Scalar, double>) {
        Dense<double> x;
        if (symmetric(a) && cholesky(a, b, x, report))
            return x;
    }
#endif
#ifdef CURLFEM_HAVE_UMFPACK
    // UmfPackLU keeps a reference to the matrix for the solve phase.
    const LongSparse<Scalar> along(a);
    Umfpack<Scalar> lu;
    lu.compute(along);
    report.backend = "UMFPACK LU";
    if (lu.info() != Eigen::Success) {
        std::ostringstream msg;
        const double status = lu.info_entry(UMFPACK_STATUS);
        msg << (status == UMFPACK_WARNING_singular_matrix ? "singular factorisation" : "factorisation failed")
            << " (UMFPACK " << umfpack_status(status) << ", rcond estimate " << lu.info_entry(UMFPACK_RCOND)
            << ", n = " << a.rows() << ")";
        throw Error(msg.str());
    }
    report.fill = static_cast<long>(lu.info_entry(UMFPACK_LNZ) + lu.info_entry(UMFPACK_UNZ));
    report.rcond = lu.info_entry(UMFPACK_RCOND);
#else
    Eigen::SparseLU<Sparse<Scalar>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    report.backend = "Eigen SparseLU";
    if (lu.info() != Eigen::Success)
        throw Error("singular factorisation (" + lu.lastErrorMessage() + ", n = " + std::to_string(a.rows()) + ")");
    report.fill = -1;
#endif
    Dense<Scalar> x = lu.solve(b);
    // Iterative refinement for mildly ill-conditioned systems.
    for (int step = 0; step < 3 && residual(a, x, b) > tol; ++step) {
        x += lu.solve(Dense<Scalar>(b - a * x));
        report.iterations = step + 1;
    }
    return x;
}

template <typename Scalar>
Dense<Scalar> iterative(const Sparse<Scalar>& a, const Dense<Scalar>& b, const SolverOptions& options,
                        SolveReport& report)
{
    constexpr int kBlock = 100;
    report.backend = "BiCGSTAB + diagonal preconditioner";
    Eigen::BiCGSTAB<Sparse<Scalar>, Eigen::DiagonalPreconditioner<Scalar>> solver;
    solver.compute(a);
    solver.setTolerance(0.5 * options.tol);
    solver.setMaxIterations(kBlock);
    Dense<Scalar> x = Dense<Scalar>::Zero(a.cols(), b.cols());
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> xj = x.col(j);
        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bj = b.col(j);
        const double nb = bj.norm();
        if (nb == 0.0)
            continue;
        double r = 1.0;
        int used = 0;
        // Restarted in blocks so that the true residual can be recorded.
        while (used < options.max_iterations) {
            xj = solver.solveWithGuess(bj, xj);
            used += std::max<int>(1, static_cast<int>(solver.iterations()));
            r = (bj - a * xj).norm() / nb;
            report.residual_history.push_back(r);
            if (r <= options.tol || !std::isfinite(r))
                break;
        }
        report.iterations += used;
        if (!(r <= options.tol)) {
            std::ostringstream msg;
            msg << "iterative solver did not reach tol " << options.tol << " in " << used
                << " iterations; residual history:";
            const auto& h = report.residual_history;
            for (std::size_t i = h.size() > 10 ? h.size() - 10 : 0; i < h.size(); ++i)
                msg << ' ' << h[i];
            throw Error(msg.str());
        }
        x.col(j) = xj;
    }
    return x;
}

template <typename Scalar>
Dense<Scalar> dispatch(const Sparse<Scalar>& a, const Dense<Scalar>& b, const SolverOptions& options,
                       SolveReport& report)
{
    return options.method == SolverMethod::direct ? direct(a, b, options.tol, report)
                                                  : iterative(a, b, options, report);
}

} // namespace

SolveResult solve(const SparseMatrix& matrix, const Eigen::VectorXcd& rhs, const SolverOptions& options)
{
    if (matrix.rows() == 0)
        throw Error("empty system");
    if (matrix.rows() != matrix.cols() || matrix.rows() != rhs.size())
        throw Error("system size mismatch: " + std::to_string(matrix.rows()) + "x" + std::to_string(matrix.cols()) +
                    " matrix, " + std::to_string(rhs.size()) + " right-hand side");
    if (!(options.tol > 0.0))
        throw Error("solver tolerance must be positive");

    SolveResult result;
    result.report.method = options.method;
    const Eigen::Map<const Eigen::VectorXcd> values(matrix.valuePtr(), matrix.nonZeros());
    const bool real = matrix.isCompressed() && (values.imag().array() == 0.0).all();
    if (real) {
        const Sparse<double> a = matrix.real();
        Dense<double> b(rhs.size(), 2);
        b.col(0) = rhs.real();
        b.col(1) = rhs.imag();
        const Dense<double> x = dispatch(a, b, options, result.report);
        result.x = x.col(0).cast<Complex>() + Complex(0.0, 1.0) * x.col(1).cast<Complex>();
        result.report.real_arithmetic = true;
    } else {
        const Dense<Complex> x = dispatch(matrix, Dense<Complex>(rhs), options, result.report);
        result.x = x.col(0);
    }
    result.report.relative_residual = residual<Complex>(matrix, result.x, rhs);
    if (!(result.report.relative_residual <= options.tol)) {
        std::ostringstream msg;
        msg << to_string(options.method) << " solve residual " << result.report.relative_residual
            << " exceeds tol " << options.tol;
        if (result.report.rcond >= 0.0)
            msg << " (rcond estimate " << result.report.rcond << ")";
        throw Error(msg.str());
    }
    return result;
}

SolveResult solve(const AssembledSystem& system, const SolverOptions& options)
{
    return solve(system.matrix, system.rhs, options);
}

} // namespace curlfem
