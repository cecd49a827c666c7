#pragma once

#include "gctl/ambiguity.hpp"
#include "gctl/grid.hpp"
#include "gctl/policy.hpp"
#include "gctl/problem.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace gctl {

// Backward dynamic programming on a space-time grid:
//
//   V(T) = Phi,   V(t, x) = min_v max_gamma E[V(t + dt, X_{t+dt}) + running cost]
//
// with (v, gamma) frozen over the step and the Gaussian expectation taken by
// tensor Gauss-Hermite quadrature along the columns of sqrt(sigma gamma sigma^T).

struct DppOptions {
  int threads = 1;
  int quadrature_nodes = 5;
  std::size_t substeps = 1;  // inner steps per grid layer
};

/// Quadrature points may fall outside the grid by at most this distance along
/// an axis: one cell, or the unreported quarter of the domain if larger.
/// Beyond it DomainEscape is raised.
double clamp_margin(const GridSpec& grid, int axis);

/// E[V_next(x + drift dt + sigma sqrt(gamma) Z sqrt(dt))] + rate dt for the
/// generator frozen at (t, x, v, gamma).
double one_step_value(const GridSpec& grid, std::span<const double> v_next, const ControlProblem& p,
                      const Matrix& gamma, double t, double dt, const Vector& x, const Vector& v,
                      int quadrature_nodes = 5);

struct DppResult {
  ValueField value;
  PolicyField policy;
  /// max |V| / (1 + |x|^2) over all layers and nodes.
  double growth_constant = 0.0;
};

/// Full backward pass on [0, T] with grid.nt layers. Ties go to the lowest
/// control index and the lowest vertex index.
DppResult bellman_backward(const ControlProblem& p, const AmbiguitySet& s, const GridSpec& grid,
                           const std::vector<Vector>& controls, const DppOptions& opts = {});

/// Backward pass on [t_begin, t_end] in `layers` steps from tabulated
/// terminal values.
DppResult bellman_backward_window(const ControlProblem& p, const AmbiguitySet& s, const GridSpec& grid,
                                  const std::vector<Vector>& controls, std::span<const double> terminal,
                                  double t_begin, double t_end, std::size_t layers, const DppOptions& opts = {});

struct ConsistencyReport {
  double t = 0.0;
  double delta = 0.0;
  double residual = 0.0;              // sup over the central region
  double interpolation_bound = 0.0;   // h^2 / 8 * sum_i max |D_ii V(t + delta)|
  bool passed = false;
};

/// Compares V(t) from one pass with the composition of a pass on
/// [t + delta, T] and a pass on [t, t + delta] started from V(t + delta).
/// t and delta must be multiples of the layer step.
ConsistencyReport dpp_consistency_check(const ControlProblem& p, const AmbiguitySet& s, const GridSpec& grid,
                                        const std::vector<Vector>& controls, double t, double delta,
                                        const DppOptions& opts = {});

}  // namespace gctl
