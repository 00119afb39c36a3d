#pragma once

#include <functional>

#include "dbini/assembly.hpp"

namespace dbini {

struct CgReport {
    int iterations = 0;
    double relative_residual = 0.0;  // true ||rhs - lhs x|| / ||rhs|| at exit
    bool converged = false;
};

// Jacobi-preconditioned conjugate gradient with warm start x0.  tol is
// relative to ||rhs||; a zero right-hand side returns the zero vector without
// iterating.  Nonpositive diagonal entries raise NotSpd, NaNs in the
// recurrence raise NumericalBreakdown.  Deterministic: sequential loops only.
std::vector<double> pcg_solve(const SparseSpd& lhs, const std::vector<double>& rhs,
                              const std::vector<double>& x0, double tol, int max_iters,
                              CgReport* report = nullptr);

struct OuterIteration {
    double energy = 0.0;  // objective with weights refreshed at the new iterate
    double frozen_energy_before = 0.0;  // at the weights used for this solve
    double frozen_energy_after = 0.0;
    CgReport cg;
};

struct DbiniProblem {
    VectorField2D normals_front;  // n_z > 0 orientation
    VectorField2D normals_back;   // n_z < 0; consumed as-is (tangency rows are
                                  // sign-invariant in the normal)
    ScalarField2D prior_front;    // read only on omega_n intersect omega_z
    ScalarField2D prior_back;
    DomainMask domain;            // one mask shared by both sheets
};

struct DbiniSolution {
    std::vector<double> zf, zb;  // packed depths
    std::vector<OuterIteration> trace;
    int outer_iterations = 0;
    bool converged = false;
    bool gauge_warning = false;
    // per-outer-iteration iterates, populated only when requested
    std::vector<std::vector<double>> iterates_f, iterates_b;
};

// Inner minimizer of one frozen-weight quadratic.  The default is PCG; the
// oracle route swaps in a dense factorization while every other step of the
// outer loop stays byte-for-byte the same.
using InnerSolve = std::function<std::vector<double>(
    const JointSystem& sys, const std::vector<double>& x0, CgReport& report)>;

// Joint front/back outer loop:
//   1. initial iterate: prior values where present, extended across omega_n by
//      nearest-prior breadth-first search; zero without any prior
//   2. bilateral weights from the current iterate (0.5 wherever it is flat)
//   3. assemble and solve the frozen-weight normal equations, warm-started
//   4. refresh weights, evaluate the objective, stop on relative energy
//      change < energy_rel_tol or after max_outer_iters
// Raises GaugeDeficient when lambda_d = 0 with an empty prior intersection,
// or when some connected component carries no prior pixel while lambda_d > 0.
DbiniSolution dbini_optimize(const DbiniProblem& problem, const Hyperparameters& hyper,
                             bool record_iterates = false);
DbiniSolution dbini_optimize_with(const DbiniProblem& problem, const Hyperparameters& hyper,
                                  const InnerSolve& inner, bool record_iterates = false);

enum class Anchor { none, mean };

struct BiniSolution {
    std::vector<double> z;
    std::vector<OuterIteration> trace;  // energy = weighted residual only
    int outer_iterations = 0;
    bool converged = false;
};

// Single-sheet baseline: the same outer loop with lambda_d = lambda_s = 0.
// The normal term only sees depth differences, so each connected component
// keeps an arbitrary offset; the mean anchor re-centers every component to
// zero mean after each solve.  Anchor::none is refused (GaugeDeficient).
BiniSolution bini_optimize(const VectorField2D& normals, const DomainMask& domain,
                           const Hyperparameters& hyper, Anchor anchor);

// Mean of v over each component subtracted in place (the bini gauge anchor).
void subtract_component_means(std::vector<double>& v, const DomainMask& domain);

}  // namespace dbini
