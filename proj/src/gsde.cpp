#include "gctl/gsde.hpp"

#include "gctl/errors.hpp"
#include "gctl/parallel.hpp"
#include "gctl/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace gctl {

VolatilitySchedule VolatilitySchedule::constant(std::size_t vertex, std::size_t steps) {
  return VolatilitySchedule{steps, std::vector<std::size_t>(steps, vertex)};
}

void VolatilitySchedule::validate(const AmbiguitySet& s) const {
  if (step_count < 1) throw ConfigError("volatility schedule needs at least one step");
  if (vertex_index_per_step.size() != step_count) {
    throw ConfigError("volatility schedule length " + std::to_string(vertex_index_per_step.size()) +
                      " differs from its step count " + std::to_string(step_count));
  }
  for (std::size_t k : vertex_index_per_step) {
    if (k >= s.size()) throw ConfigError("volatility schedule vertex index " + std::to_string(k) + " out of range");
  }
}

VolatilitySchedule VolatilitySchedule::resampled(std::size_t steps) const {
  VolatilitySchedule out{steps, std::vector<std::size_t>(steps, 0)};
  if (vertex_index_per_step.empty()) return out;
  for (std::size_t k = 0; k < steps; ++k) {
    const double mid = (static_cast<double>(k) + 0.5) / static_cast<double>(steps);
    const auto src = std::min(vertex_index_per_step.size() - 1,
                              static_cast<std::size_t>(mid * static_cast<double>(vertex_index_per_step.size())));
    out.vertex_index_per_step[k] = vertex_index_per_step[src];
  }
  return out;
}

std::vector<VolatilitySchedule> schedule_family(const AmbiguitySet& s, std::size_t steps, std::size_t size,
                                                std::uint64_t seed) {
  if (steps < 1) throw ConfigError("schedules need at least one step");
  std::vector<VolatilitySchedule> family;
  for (std::size_t k = 0; k < s.size(); ++k) family.push_back(VolatilitySchedule::constant(k, steps));
  std::uint64_t counter = 0;
  auto draw = [&](std::uint64_t bound) { return counter_hash(seed, 0xfa3117, counter++, 0) % bound; };
  while (family.size() < size) {
    VolatilitySchedule sched = VolatilitySchedule::constant(0, steps);
    const std::size_t switches = 1 + draw(4);
    std::vector<std::size_t> cuts{0, steps};
    for (std::size_t c = 0; c < switches; ++c) cuts.push_back(draw(steps));
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
      const std::size_t vertex = draw(s.size());
      for (std::size_t k = cuts[seg]; k < cuts[seg + 1]; ++k) sched.vertex_index_per_step[k] = vertex;
    }
    family.push_back(std::move(sched));
  }
  return family;
}

ControlLaw constant_control(const Vector& v) { return OpenLoopControl{{v}}; }

namespace {

struct PathOutcome {
  double cost = 0.0;
  double sup_sq = 0.0;  // sup over steps of |X - x0|^2
};

class PathSimulator {
 public:
  PathSimulator(const ControlProblem& p, const AmbiguitySet& s, const Vector& x0, const ControlLaw& control,
                const VolatilitySchedule& sched, double t0, double t1, std::uint64_t seed)
      : p_(p), s_(s), x0_(x0), control_(control), sched_(sched), t0_(t0), t1_(t1), seed_(seed) {
    p.validate();
    sched.validate(s);
    if (s.dim() != p.d) throw DimensionError("ambiguity set dimension differs from the brownian dimension");
    if (p.d > 16) throw DimensionError("path simulation supports brownian dimension d <= 16");
    if (x0.size() != p.n) throw DimensionError("x0 must have " + std::to_string(p.n) + " components");
    if (!(t1 >= t0)) throw ConfigError("simulation end time precedes the start time");
    if (const auto* ol = std::get_if<OpenLoopControl>(&control)) {
      if (ol->per_step.size() != 1 && ol->per_step.size() != sched.step_count) {
        throw ConfigError("open-loop control needs one vector or one per step");
      }
      for (const Vector& v : ol->per_step) {
        if (v.size() != p.m) throw DimensionError("control vector must have " + std::to_string(p.m) + " components");
      }
    } else if (const auto* fb = std::get_if<FeedbackControl>(&control)) {
      if (fb->policy == nullptr) throw ConfigError("feedback control without a policy");
      if (fb->policy->grid.dim() != p.n) throw DimensionError("policy grid dimension differs from the state dimension");
      if (fb->policy->controls.front().size() != p.m) throw DimensionError("policy control dimension mismatch");
    } else {
      const auto& ex = std::get<ExprControl>(control);
      if (static_cast<int>(ex.components.size()) != p.m) {
        throw DimensionError("control expression count must equal the control dimension");
      }
    }
  }

  std::size_t steps() const { return sched_.step_count; }
  double time(std::size_t k) const {
    return k == steps() ? t1_ : t0_ + (t1_ - t0_) * static_cast<double>(k) / static_cast<double>(steps());
  }

  /// Runs one path; store(step, x, b, qv) is called for steps 0..n when given.
  template <typename Store>
  PathOutcome run(std::size_t path, Store&& store) const {
    const int n = p_.n;
    const int d = p_.d;
    Vector x = x0_;
    Vector b = Vector::Zero(d);
    Matrix qv = Matrix::Zero(d, d);
    std::array<double, 16> xi_buf{};
    const std::span<double> xi(xi_buf.data(), static_cast<std::size_t>(d));
    PathOutcome out;
    double running = 0.0;
    store(0, x, b, qv);
    for (std::size_t k = 0; k < steps(); ++k) {
      const double t = time(k);
      const double dt = time(k + 1) - t;
      Vector v;
      Coefficients co;
      try {
        v = control_value(k, t, x);
        co = p_.evaluate(t, std::span<const double>(x.data(), static_cast<std::size_t>(n)),
                         std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
      } catch (const DomainError& e) {
        throw NumericalError("coefficient evaluation failed on path " + std::to_string(path) + " at step " +
                             std::to_string(k + 1) + ": " + e.what());
      }
      const std::size_t vertex = sched_.vertex_index_per_step[k];
      const Matrix& gamma = s_.vertex(vertex);
      counter_normals(seed_, path, k, xi);
      const Vector dw = s_.vertex_sqrt(vertex) * Eigen::Map<const Vector>(xi.data(), d) * std::sqrt(dt);
      x += (co.b + qv_drift(co, gamma)) * dt + co.sigma * dw;
      running += (co.f + qv_rate(co, gamma)) * dt;
      b += dw;
      qv += gamma * dt;
      if (!x.allFinite() || !std::isfinite(running)) {
        throw NumericalError("non-finite state on path " + std::to_string(path) + " at step " + std::to_string(k + 1));
      }
      out.sup_sq = std::max(out.sup_sq, (x - x0_).squaredNorm());
      store(k + 1, x, b, qv);
    }
    double terminal = 0.0;
    try {
      terminal = p_.terminal(std::span<const double>(x.data(), static_cast<std::size_t>(n)));
    } catch (const DomainError& e) {
      throw NumericalError("terminal cost failed on path " + std::to_string(path) + ": " + e.what());
    }
    out.cost = terminal + running;
    if (!std::isfinite(out.cost)) {
      throw NumericalError("non-finite cost on path " + std::to_string(path) + " at step " + std::to_string(steps()));
    }
    return out;
  }

  PathOutcome run(std::size_t path) const {
    return run(path, [](std::size_t, const Vector&, const Vector&, const Matrix&) {});
  }

 private:
  Vector control_value(std::size_t k, double t, const Vector& x) const {
    const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    if (const auto* ol = std::get_if<OpenLoopControl>(&control_)) {
      return ol->per_step.size() == 1 ? ol->per_step.front() : ol->per_step[k];
    }
    if (const auto* fb = std::get_if<FeedbackControl>(&control_)) return fb->policy->control_at(t, xs);
    const auto& ex = std::get<ExprControl>(control_);
    Vector v(static_cast<Eigen::Index>(ex.components.size()));
    for (std::size_t c = 0; c < ex.components.size(); ++c) {
      v(static_cast<Eigen::Index>(c)) = ex.components[c].eval(EvalPoint{t, xs, {}, {}});
    }
    return v;
  }

  const ControlProblem& p_;
  const AmbiguitySet& s_;
  const Vector& x0_;
  const ControlLaw& control_;
  const VolatilitySchedule& sched_;
  double t0_;
  double t1_;
  std::uint64_t seed_;
};

struct MeanAndError {
  double mean = 0.0;
  double std_error = 0.0;
};

MeanAndError mean_and_error(const std::vector<double>& v) {
  const auto n = static_cast<double>(v.size());
  MeanAndError r;
  r.mean = pairwise_sum(v) / n;
  if (v.size() < 2) return r;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - r.mean) * (v[i] - r.mean);
  r.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
  return r;
}

}  // namespace

PathBundle simulate_paths(const ControlProblem& p, const AmbiguitySet& s, const Vector& x0,
                          const ControlLaw& control, const VolatilitySchedule& sched, std::size_t n_paths,
                          std::uint64_t seed, const SimulationOptions& opts) {
  const double t1 = opts.t1 < 0.0 ? p.horizon : opts.t1;
  const PathSimulator sim(p, s, x0, control, sched, opts.t0, t1, seed);
  if (n_paths < 1) throw ConfigError("need at least one path");
  PathBundle bundle;
  bundle.n_paths = n_paths;
  bundle.n_steps = sim.steps();
  bundle.n = p.n;
  bundle.d = p.d;
  bundle.seed = seed;
  for (std::size_t k = 0; k <= sim.steps(); ++k) bundle.times.push_back(sim.time(k));
  const std::size_t rows = n_paths * (sim.steps() + 1);
  const auto n = static_cast<std::size_t>(p.n);
  const auto d = static_cast<std::size_t>(p.d);
  bundle.X.resize(rows * n);
  bundle.B.resize(rows * d);
  bundle.QV.resize(rows * d * d);
  bundle.cost.resize(n_paths);
  parallel_for(n_paths, opts.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t path = begin; path < end; ++path) {
      const PathOutcome o = sim.run(path, [&](std::size_t step, const Vector& x, const Vector& b, const Matrix& qv) {
        const std::size_t row = path * (sim.steps() + 1) + step;
        std::copy_n(x.data(), n, bundle.X.begin() + static_cast<std::ptrdiff_t>(row * n));
        std::copy_n(b.data(), d, bundle.B.begin() + static_cast<std::ptrdiff_t>(row * d));
        for (std::size_t i = 0; i < d; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            bundle.QV[(row * d + i) * d + j] = qv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          }
        }
      });
      bundle.cost[path] = o.cost;
    }
  });
  return bundle;
}

ScenarioEstimate estimate_cost(const ControlProblem& p, const AmbiguitySet& s, double t, const Vector& x0,
                               const ControlLaw& control, const std::vector<VolatilitySchedule>& family,
                               std::size_t n_paths, std::uint64_t seed, int threads) {
  if (family.empty()) throw ConfigError("schedule family is empty");
  if (n_paths < 1) throw ConfigError("need at least one path");
  ScenarioEstimate est;
  est.value = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < family.size(); ++f) {
    const PathSimulator sim(p, s, x0, control, family[f], t, p.horizon, seed);
    std::vector<double> costs(n_paths);
    parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t path = begin; path < end; ++path) costs[path] = sim.run(path).cost;
    });
    const MeanAndError me = mean_and_error(costs);
    est.schedule_means.push_back(me.mean);
    est.schedule_errors.push_back(me.std_error);
    if (f == 0 || me.mean > est.value) {
      est.value = me.mean;
      est.std_error = me.std_error;
      est.worst_index = f;
    }
  }
  est.worst_schedule = family[est.worst_index];
  return est;
}

MomentReport moment_check(const ControlProblem& p, const AmbiguitySet& s, const Vector& x0,
                          const std::vector<double>& deltas, std::size_t n_paths, std::uint64_t seed,
                          const ControlLaw& control, std::size_t steps, int threads) {
  if (deltas.size() < 2) throw ConfigError("moment check needs at least two deltas");
  for (double dl : deltas) {
    if (!(dl > 0.0)) throw ConfigError("moment check deltas must be positive");
  }
  MomentReport rep;
  rep.deltas = deltas;
  const double scale = 1.0 + x0.squaredNorm();
  for (double delta : deltas) {
    double worst = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const VolatilitySchedule sched = VolatilitySchedule::constant(k, steps);
      const PathSimulator sim(p, s, x0, control, sched, 0.0, delta, seed);
      std::vector<double> sups(n_paths);
      parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t path = begin; path < end; ++path) sups[path] = sim.run(path).sup_sq;
      });
      worst = std::max(worst, pairwise_sum(sups) / static_cast<double>(n_paths));
    }
    rep.moments.push_back(worst);
    rep.c_estimates.push_back(worst / (scale * delta));
  }
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (rep.moments[i] > 0.0) {
      lx.push_back(std::log(deltas[i]));
      ly.push_back(std::log(rep.moments[i]));
    }
  }
  rep.trivial = lx.empty();
  if (lx.size() < 2) {
    rep.slope = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  const auto cnt = static_cast<double>(lx.size());
  const double mx = pairwise_sum(lx) / cnt;
  const double my = pairwise_sum(ly) / cnt;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  rep.slope = sxy / sxx;
  return rep;
}

}  // namespace gctl
