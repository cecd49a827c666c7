#include "gctl/dpp.hpp"

#include "gctl/errors.hpp"
#include "gctl/generator.hpp"
#include "gctl/parallel.hpp"
#include "gctl/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace gctl {

double clamp_margin(const GridSpec& grid, int axis) {
  return std::max(grid.spacing(axis), 0.25 * (grid.hi[axis] - grid.lo[axis]));
}

namespace {

struct StepContext {
  const GridSpec& grid;
  const GaussHermite& rule;
  std::array<double, 2> margin{};
};

void check_escape(const StepContext& ctx, const std::array<double, 2>& y) {
  for (int a = 0; a < ctx.grid.dim(); ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const double outside = std::max(ctx.grid.lo[a] - y[ua], y[ua] - ctx.grid.hi[a]);
    if (outside > ctx.margin[ua] * (1.0 + 1e-12)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "quadrature point x%d = %.6g lies %.6g outside the grid (margin %.6g)", a + 1,
                    y[ua], outside, ctx.margin[ua]);
      throw DomainEscape(std::string(buf) + "; enlarge the domain or shorten the time step");
    }
  }
}

// E[V(base + root Z sqrt(dt))] over the tensor rule on the nonzero columns of root.
double frozen_expectation(const StepContext& ctx, std::span<const double> values, const std::array<double, 2>& base,
                          const StateMat& root, double sqrt_dt) {
  const int n = ctx.grid.dim();
  std::array<int, 2> active{};
  int n_active = 0;
  for (int j = 0; j < n; ++j) {
    if (root.col(j).cwiseAbs().maxCoeff() > 0.0) active[static_cast<std::size_t>(n_active++)] = j;
  }
  const auto dim = static_cast<std::size_t>(n);
  std::array<double, 2> y = base;
  if (n_active == 0) {
    check_escape(ctx, y);
    return interpolate(ctx.grid, values, std::span<const double>(y.data(), dim));
  }
  const std::size_t q = ctx.rule.nodes.size();
  double total = 0.0;
  if (n_active == 1) {
    const int j = active[0];
    for (std::size_t a = 0; a < q; ++a) {
      const double z = ctx.rule.nodes[a] * sqrt_dt;
      for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = base[static_cast<std::size_t>(i)] + root(i, j) * z;
      check_escape(ctx, y);
      total += ctx.rule.weights[a] * interpolate(ctx.grid, values, std::span<const double>(y.data(), dim));
    }
    return total;
  }
  for (std::size_t a = 0; a < q; ++a) {
    const double za = ctx.rule.nodes[a] * sqrt_dt;
    for (std::size_t b = 0; b < q; ++b) {
      const double zb = ctx.rule.nodes[b] * sqrt_dt;
      for (int i = 0; i < n; ++i) {
        y[static_cast<std::size_t>(i)] = base[static_cast<std::size_t>(i)] + root(i, 0) * za + root(i, 1) * zb;
      }
      check_escape(ctx, y);
      total += ctx.rule.weights[a] * ctx.rule.weights[b] *
               interpolate(ctx.grid, values, std::span<const double>(y.data(), dim));
    }
  }
  return total;
}

double frozen_value(const StepContext& ctx, std::span<const double> values, const FrozenGenerator& fg,
                    std::span<const double> x, double dt) {
  std::array<double, 2> base{};
  for (std::size_t i = 0; i < x.size(); ++i) base[i] = x[i] + fg.drift(static_cast<Eigen::Index>(i)) * dt;
  return frozen_expectation(ctx, values, base, fg.root, std::sqrt(dt)) + fg.rate * dt;
}

StepContext make_context(const GridSpec& grid, const GaussHermite& rule) {
  StepContext ctx{grid, rule, {}};
  for (int a = 0; a < grid.dim(); ++a) ctx.margin[static_cast<std::size_t>(a)] = clamp_margin(grid, a);
  return ctx;
}

std::vector<double> sample_terminal(const ControlProblem& p, const GridSpec& grid) {
  std::vector<double> u(grid.node_count());
  std::array<double, 2> x{};
  const auto dim = static_cast<std::size_t>(grid.dim());
  for (std::size_t node = 0; node < u.size(); ++node) {
    grid.node(node, std::span<double>(x.data(), dim));
    u[node] = p.terminal(std::span<const double>(x.data(), dim));
  }
  return u;
}

}  // namespace

double one_step_value(const GridSpec& grid, std::span<const double> v_next, const ControlProblem& p,
                      const Matrix& gamma, double t, double dt, const Vector& x, const Vector& v,
                      int quadrature_nodes) {
  grid.validate();
  if (grid.dim() != p.n) throw DimensionError("grid dimension differs from the state dimension");
  if (v_next.size() != grid.node_count()) throw DimensionError("value layer size differs from the grid node count");
  if (gamma.rows() != p.d || gamma.cols() != p.d) throw DimensionError("gamma must be d x d");
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  const Coefficients co = p.evaluate(t, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                                     std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
  FrozenGenerator fg;
  fg.drift = co.b + qv_drift(co, gamma);
  fg.a = co.sigma * gamma * co.sigma.transpose();
  fg.a = 0.5 * (fg.a + fg.a.transpose()).eval();
  fg.root = small_psd_sqrt(fg.a);
  fg.rate = co.f + qv_rate(co, gamma);
  const GaussHermite rule = gauss_hermite(quadrature_nodes);
  const StepContext ctx = make_context(grid, rule);
  return frozen_value(ctx, v_next, fg, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), dt);
}

DppResult bellman_backward_window(const ControlProblem& p, const AmbiguitySet& s, const GridSpec& grid,
                                  const std::vector<Vector>& controls, std::span<const double> terminal,
                                  double t_begin, double t_end, std::size_t layers, const DppOptions& opts) {
  check_solver_dims(p, s, grid);
  if (controls.empty()) throw ConfigError("control list is empty");
  if (layers < 1 || opts.substeps < 1) throw ConfigError("backward pass needs at least one step");
  if (!(t_end > t_begin)) throw ConfigError("backward pass needs t_end > t_begin");
  if (terminal.size() != grid.node_count()) throw DimensionError("terminal layer size differs from the grid node count");
  for (const Vector& v : controls) {
    if (v.size() != p.m) throw DimensionError("control vectors must have " + std::to_string(p.m) + " components");
  }

  GeneratorTable table(p, s, grid, controls);
  const GaussHermite rule = gauss_hermite(opts.quadrature_nodes);
  const StepContext ctx = make_context(grid, rule);
  const std::size_t nodes = grid.node_count();
  const std::size_t total_steps = layers * opts.substeps;
  const double dt = (t_end - t_begin) / static_cast<double>(total_steps);
  auto step_time = [&](std::size_t j) {
    return j == total_steps ? t_end : t_begin + (t_end - t_begin) * static_cast<double>(j) / static_cast<double>(total_steps);
  };

  DppResult res;
  res.value.grid = grid;
  res.value.grid.nt = static_cast<int>(layers);
  res.value.layers.resize(layers + 1);
  for (std::size_t k = 0; k <= layers; ++k) res.value.times.push_back(step_time(k * opts.substeps));
  res.value.layers[layers].assign(terminal.begin(), terminal.end());
  res.policy.grid = res.value.grid;
  res.policy.times = res.value.times;
  res.policy.controls = controls;
  res.policy.control_index.assign(layers, std::vector<std::uint32_t>(nodes, 0));
  res.policy.vertex_index.assign(layers, std::vector<std::uint32_t>(nodes, 0));

  std::vector<double> cur(terminal.begin(), terminal.end());
  std::vector<double> next(nodes);
  for (std::size_t k = layers; k-- > 0;) {
    auto& cidx = res.policy.control_index[k];
    auto& vidx = res.policy.vertex_index[k];
    for (std::size_t j = opts.substeps; j-- > 0;) {
      const std::size_t step = k * opts.substeps + j;
      const double t = step_time(step);
      table.build(t, opts.threads);
      parallel_for(nodes, opts.threads, [&](std::size_t begin, std::size_t end) {
        std::array<double, 2> x{};
        const auto dim = static_cast<std::size_t>(grid.dim());
        for (std::size_t node = begin; node < end; ++node) {
          grid.node(node, std::span<double>(x.data(), dim));
          const std::span<const double> xs(x.data(), dim);
          double best = std::numeric_limits<double>::infinity();
          std::uint32_t best_c = 0;
          std::uint32_t best_k = 0;
          for (std::size_t c = 0; c < table.control_count(); ++c) {
            double worst = -std::numeric_limits<double>::infinity();
            std::uint32_t worst_k = 0;
            for (std::size_t g = 0; g < table.vertex_count(); ++g) {
              const double val = frozen_value(ctx, cur, table.at(node, c, g), xs, dt);
              if (g == 0 || strictly_greater(val, worst)) {
                worst = val;
                worst_k = static_cast<std::uint32_t>(g);
              }
            }
            if (c == 0 || strictly_greater(best, worst)) {
              best = worst;
              best_c = static_cast<std::uint32_t>(c);
              best_k = worst_k;
            }
          }
          if (!std::isfinite(best)) {
            throw NumericalError("non-finite value at node " + std::to_string(node) + ", step " + std::to_string(step));
          }
          next[node] = best;
          cidx[node] = best_c;
          vidx[node] = best_k;
        }
      });
      std::swap(cur, next);
    }
    res.value.layers[k] = cur;
  }

  std::array<double, 2> x{};
  const auto dim = static_cast<std::size_t>(grid.dim());
  for (const auto& layer : res.value.layers) {
    for (std::size_t node = 0; node < nodes; ++node) {
      grid.node(node, std::span<double>(x.data(), dim));
      double r2 = 0.0;
      for (std::size_t i = 0; i < dim; ++i) r2 += x[i] * x[i];
      res.growth_constant = std::max(res.growth_constant, std::abs(layer[node]) / (1.0 + r2));
    }
  }
  return res;
}

DppResult bellman_backward(const ControlProblem& p, const AmbiguitySet& s, const GridSpec& grid,
                           const std::vector<Vector>& controls, const DppOptions& opts) {
  check_solver_dims(p, s, grid);
  const std::vector<double> terminal = sample_terminal(p, grid);
  return bellman_backward_window(p, s, grid, controls, terminal, 0.0, p.horizon,
                                 static_cast<std::size_t>(grid.nt), opts);
}

ConsistencyReport dpp_consistency_check(const ControlProblem& p, const AmbiguitySet& s, const GridSpec& grid,
                                        const std::vector<Vector>& controls, double t, double delta,
                                        const DppOptions& opts) {
  check_solver_dims(p, s, grid);
  const double dt = p.horizon / grid.nt;
  const double kt_real = t / dt;
  const double kd_real = delta / dt;
  const auto kt = static_cast<long>(std::llround(kt_real));
  const auto kd = static_cast<long>(std::llround(kd_real));
  if (std::abs(kt_real - kt) > 1e-9 || std::abs(kd_real - kd) > 1e-9 || kt < 0 || kd < 1 || kt + kd > grid.nt) {
    throw ConfigError("consistency check needs t and delta on the layer grid with t + delta <= T");
  }
  const auto nt = static_cast<std::size_t>(grid.nt);
  const auto ukt = static_cast<std::size_t>(kt);
  const auto ukd = static_cast<std::size_t>(kd);

  const DppResult full = bellman_backward(p, s, grid, controls, opts);
  const double t_mid = full.value.times[ukt + ukd];
  std::vector<double> v_mid;
  if (ukt + ukd == nt) {
    v_mid = sample_terminal(p, grid);
  } else {
    const DppResult tail = bellman_backward_window(p, s, grid, controls, sample_terminal(p, grid), t_mid, p.horizon,
                                                   nt - ukt - ukd, opts);
    v_mid = tail.value.layers.front();
  }
  const DppResult head =
      bellman_backward_window(p, s, grid, controls, v_mid, full.value.times[ukt], t_mid, ukd, opts);

  ConsistencyReport rep;
  rep.t = full.value.times[ukt];
  rep.delta = t_mid - rep.t;
  const auto& a = full.value.layers[ukt];
  const auto& b = head.value.layers.front();
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    if (grid.in_central(node)) rep.residual = std::max(rep.residual, std::abs(a[node] - b[node]));
  }
  const LayerView view(grid, v_mid);
  for (int axis = 0; axis < grid.dim(); ++axis) {
    double worst = 0.0;
    const int n0 = grid.nx[0];
    const int n1 = grid.dim() > 1 ? grid.nx[1] : 1;
    for (int j = 0; j < n1; ++j) {
      for (int i = 0; i < n0; ++i) {
        const double c = view.at(i, j);
        const double d2 = axis == 0 ? view.at(i - 1, j) - 2.0 * c + view.at(i + 1, j)
                                    : view.at(i, j - 1) - 2.0 * c + view.at(i, j + 1);
        worst = std::max(worst, std::abs(d2));
      }
    }
    // h^2/8 * |D^2 V| with D^2 V ~ d2 / h^2
    rep.interpolation_bound += worst / 8.0;
  }
  rep.passed = rep.residual <= rep.interpolation_bound + 1e-12;
  return rep;
}

}  // namespace gctl
