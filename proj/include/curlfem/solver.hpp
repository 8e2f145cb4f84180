#pragma once

#include "curlfem/assembly.hpp"

#include <string>
#include <vector>

namespace curlfem {

enum class SolverMethod { direct, iterative };

std::string to_string(SolverMethod method);
/// "direct" or "iterative"; throws Error otherwise.
SolverMethod parse_solver_method(const std::string& name);

struct SolverOptions {
    SolverMethod method = SolverMethod::direct;
    double tol = 1e-10;
    /// Iteration cap of the Krylov solver.
    int max_iterations = 20000;
};

struct SolveReport {
    SolverMethod method = SolverMethod::direct;
    /// Factorisation or Krylov method actually used.
    std::string backend;
    /// ||A x - b|| / ||b|| recomputed after the solve.
    double relative_residual = 0.0;
    /// Krylov iterations (iterative) or refinement steps (direct).
    int iterations = 0;
    /// Nonzeros of L + U (direct).
    long fill = 0;
    /// Reciprocal condition estimate when the backend provides one, else -1.
    double rcond = -1.0;
    /// A and b were real and solved in real arithmetic.
    bool real_arithmetic = false;
    /// Relative residual after each block of iterations (iterative).
    std::vector<double> residual_history;
};

struct SolveResult {
    Eigen::VectorXcd x;
    SolveReport report;
};

/// Solves A x = b. Real A is factorised once in real arithmetic and applied to
/// Re b and Im b separately. Throws Error with pivot / residual diagnostics on
/// singular factorisations or when tol is not reached.
SolveResult solve(const SparseMatrix& matrix, const Eigen::VectorXcd& rhs, const SolverOptions& options = {});
SolveResult solve(const AssembledSystem& system, const SolverOptions& options = {});

} // namespace curlfem
