#pragma once

#include "gctl/ambiguity.hpp"
#include "gctl/expr.hpp"
#include "gctl/policy.hpp"
#include "gctl/problem.hpp"

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

namespace gctl {

// Euler simulation of the controlled G-SDE
//
//   dX = b ds + h_ij d<B^i, B^j> + sigma dB
//
// under one volatility scenario at a time. A scenario is a piecewise-constant
// choice of vertex gamma per step; then dB = sqrt(gamma) dW, d<B> = gamma ds.

struct VolatilitySchedule {
  std::size_t step_count = 0;
  std::vector<std::size_t> vertex_index_per_step;

  static VolatilitySchedule constant(std::size_t vertex, std::size_t steps);
  /// Throws ConfigError when the length or an index is out of range.
  void validate(const AmbiguitySet& s) const;
  /// Nearest-step resampling onto a different step count.
  VolatilitySchedule resampled(std::size_t steps) const;
};

/// Every constant-vertex schedule, then random piecewise switchings until the
/// family has `size` members (at least one per vertex).
std::vector<VolatilitySchedule> schedule_family(const AmbiguitySet& s, std::size_t steps, std::size_t size,
                                                std::uint64_t seed);

/// Open loop: one control per step, or a single control for all steps.
struct OpenLoopControl {
  std::vector<Vector> per_step;
};

/// Feedback from a grid policy, interpolated in x.
struct FeedbackControl {
  const PolicyField* policy = nullptr;
};

/// Components v_k(t, x) given as expressions.
struct ExprControl {
  std::vector<Expr> components;
};

using ControlLaw = std::variant<OpenLoopControl, FeedbackControl, ExprControl>;

ControlLaw constant_control(const Vector& v);

/// Path storage, step-major per path: X is paths x (steps+1) x n, B is
/// paths x (steps+1) x d and QV is paths x (steps+1) x d x d.
struct PathBundle {
  std::vector<double> times;
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  int n = 0;
  int d = 0;
  std::vector<double> X;
  std::vector<double> B;
  std::vector<double> QV;
  std::vector<double> cost;  // Phi(X_T) + running costs, per path
  std::uint64_t seed = 0;

  double x(std::size_t path, std::size_t step, int i) const {
    return X[(path * (n_steps + 1) + step) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)];
  }
  double b(std::size_t path, std::size_t step, int i) const {
    return B[(path * (n_steps + 1) + step) * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)];
  }
  double qv(std::size_t path, std::size_t step, int i, int j) const {
    const auto dd = static_cast<std::size_t>(d);
    return QV[((path * (n_steps + 1) + step) * dd + static_cast<std::size_t>(i)) * dd + static_cast<std::size_t>(j)];
  }
};

struct SimulationOptions {
  double t0 = 0.0;
  double t1 = -1.0;  // negative: the problem horizon
  int threads = 1;
};

/// n_steps = sched.step_count. Deterministic in seed for any thread count.
/// Throws NumericalError naming the path and step on a non-finite state.
PathBundle simulate_paths(const ControlProblem& p, const AmbiguitySet& s, const Vector& x0,
                          const ControlLaw& control, const VolatilitySchedule& sched, std::size_t n_paths,
                          std::uint64_t seed, const SimulationOptions& opts = {});

struct ScenarioEstimate {
  double value = 0.0;
  double std_error = 0.0;
  VolatilitySchedule worst_schedule;
  std::size_t worst_index = 0;
  std::vector<double> schedule_means;
  std::vector<double> schedule_errors;
};

/// Max over the family of Monte Carlo means of the cost; a lower bound of
/// the value under the given control. All schedules share one seed.
ScenarioEstimate estimate_cost(const ControlProblem& p, const AmbiguitySet& s, double t, const Vector& x0,
                               const ControlLaw& control, const std::vector<VolatilitySchedule>& family,
                               std::size_t n_paths, std::uint64_t seed, int threads = 1);

struct MomentReport {
  std::vector<double> deltas;
  std::vector<double> moments;      // max over schedules of E[sup |X - x0|^2]
  std::vector<double> c_estimates;  // moment / ((1 + |x0|^2) delta)
  double slope = 0.0;               // least-squares log-log slope; NaN if all moments vanish
  bool trivial = false;             // every moment is zero
};

/// Second-moment growth of sup_{s <= delta} |X_s - x0| for each delta, using
/// every constant-vertex schedule and `steps` Euler steps per delta.
MomentReport moment_check(const ControlProblem& p, const AmbiguitySet& s, const Vector& x0,
                          const std::vector<double>& deltas, std::size_t n_paths, std::uint64_t seed,
                          const ControlLaw& control, std::size_t steps = 64, int threads = 1);

}  // namespace gctl
