#pragma once

#include "gctl/ambiguity.hpp"
#include "gctl/expr.hpp"
#include "gctl/grid.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace gctl {

// Sublinear expectations through the G-heat equation
//
//   d_t u - G(D^2 u) = 0,  u(0, x) = phi(x),   E[phi(x + B_t)] = u(t, x),
//
// stepped forward with an explicit monotone scheme. The CFL bound
// dt <= min_i h_i^2 / (2 dim Lambda_max) is enforced by substepping each of
// the grid's nt layers.

struct HeatOptions {
  int threads = 1;
  std::size_t max_steps = 10'000'000;
};

/// Grid of spacing h centred on 0 with half-width 6 * max sigma_bar * sqrt(T)
/// per axis (odd node count so 0 is a node).
GridSpec default_heat_grid(const AmbiguitySet& s, double horizon, double h, int nt = 1);

/// Requires grid.dim() == s.dim() in {1, 2} and phi over x1..x{dim}.
/// Returns nt + 1 layers at times k T / nt. For dim 2 every vertex must be
/// diagonally dominant relative to the spacings (MonotonicityUnavailable).
ValueField solve_gheat(const AmbiguitySet& s, const Expr& phi, double horizon, const GridSpec& grid,
                       const HeatOptions& opts = {});

/// Same on a 1-D grid for the marginal beta^T B, any d.
ValueField solve_gheat_directional(const AmbiguitySet& s, const Vector& beta, const Expr& phi,
                                   double horizon, const GridSpec& grid, const HeatOptions& opts = {});

/// E[phi(B_t)]: the solution at x = 0, time t.
double g_expectation(const AmbiguitySet& s, const Expr& phi, double t, const GridSpec& grid,
                     const HeatOptions& opts = {});

struct NestedResult {
  double value = 0.0;
  std::vector<std::string> warnings;
};

/// E[phi(B_{t1}, B_{t2} - B_{t1}, ...)] by backward recursion over the
/// increments y1..yN (N <= 3), each a one-dimensional G-heat solve on the
/// 1-D grid. For d > 1 the increments are those of beta^T B (default e1).
/// A warning is recorded when adjacent tabulated values in the central
/// region differ by more than 10 * tolerance.
/// Throws ConfigError when the tabulated payoff would exceed 5e7 entries.
NestedResult nested_expectation(const AmbiguitySet& s, const Expr& phi, const std::vector<double>& times,
                                const GridSpec& grid, const HeatOptions& opts = {},
                                const Vector& beta = Vector(), double tolerance = 1e-2);

}  // namespace gctl
