#pragma once

#include "gctl/ambiguity.hpp"
#include "gctl/expr.hpp"
#include "gctl/grid.hpp"
#include "gctl/problem.hpp"

#include <cstddef>
#include <vector>

namespace gctl {

struct HamiltonianInputs {
  double t = 0.0;
  Vector x;  // n
  Vector p;  // n, gradient
  Matrix A;  // n x n, Hessian
  Vector v;  // m
};

/// F_ij = (sigma^T A sigma)_ij + 2 <p, h_ij> + 2 g_ij, a symmetric d x d matrix.
Matrix assemble_f(const ControlProblem& problem, const HamiltonianInputs& in);

/// H = G(F) + <p, b> + f.
double hamiltonian(const ControlProblem& problem, const AmbiguitySet& s, const HamiltonianInputs& in);

/// Lambda_1 + 2 G(F / 2) with Lambda_1 = phi_t + <b, p> + f. Equals
/// phi_t + hamiltonian(...) by positive homogeneity of G.
double lambda_decomposition(const ControlProblem& problem, const AmbiguitySet& s, double phi_t,
                            const HamiltonianInputs& in);

struct HjbOptions {
  int threads = 1;
  std::size_t max_steps = 10'000'000;
};

/// Explicit monotone backward scheme for d_t V + min_v H = 0, V(T) = Phi.
/// Second derivatives use central differences (sign-adapted 7-point cross
/// stencil when n = 2); first-order terms are upwinded on the effective drift
/// b + sum_ij h_ij gamma_ij of each (node, control, vertex). Each grid layer is
/// substepped to satisfy the monotonicity CFL bound.
ValueField solve_hjb(const ControlProblem& p, const AmbiguitySet& s, const GridSpec& grid,
                     const std::vector<Vector>& controls, const HjbOptions& opts = {});

struct ConvergenceStudy {
  std::vector<GridSpec> grids;
  std::vector<double> spacing;    // h along axis 0
  std::vector<double> sup_error;  // central region, t = 0
  double order = 0.0;             // least-squares slope of log error in log h; NaN if undetermined
  bool exact = false;             // every error below the floor
};

/// Errors of solve_hjb at t = 0 against a closed form V(t, x), or against the
/// finest grid when `reference` is null (the finest grid then has no row).
/// Errors below `floor` are treated as exact and excluded from the order fit.
ConvergenceStudy convergence_study(const ControlProblem& p, const AmbiguitySet& s, const std::vector<GridSpec>& grids,
                                   const std::vector<Vector>& controls, const Expr* reference,
                                   const HjbOptions& opts = {}, double floor = 1e-9);

/// grid, grid.refined(), ... (count grids).
std::vector<GridSpec> refinement_ladder(const GridSpec& grid, int count);

/// sup over central nodes of |layer - reference(t, x)|.
double central_sup_error(const GridSpec& grid, std::span<const double> layer, const Expr& reference, double t);

}  // namespace gctl
