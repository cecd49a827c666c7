#include "gctl/hjb.hpp"

#include "gctl/errors.hpp"
#include "gctl/generator.hpp"
#include "gctl/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace gctl {

namespace {

void check_inputs(const ControlProblem& problem, const HamiltonianInputs& in) {
  problem.validate();
  const auto n = static_cast<Eigen::Index>(problem.n);
  if (in.x.size() != n || in.p.size() != n) throw DimensionError("x and p must have n components");
  if (in.A.rows() != n || in.A.cols() != n) throw DimensionError("A must be n x n");
  if (in.v.size() != problem.m) throw DimensionError("v must have m components");
  if ((in.A - in.A.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) {
    throw ConfigError("Hessian argument A is not symmetric");
  }
}

Coefficients coefficients_at(const ControlProblem& problem, const HamiltonianInputs& in) {
  return problem.evaluate(in.t, std::span<const double>(in.x.data(), static_cast<std::size_t>(in.x.size())),
                          std::span<const double>(in.v.data(), static_cast<std::size_t>(in.v.size())));
}

Matrix assemble(const ControlProblem& problem, const Coefficients& co, const HamiltonianInputs& in) {
  const int d = problem.d;
  Matrix f = co.sigma.transpose() * in.A * co.sigma;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const double extra = 2.0 * in.p.dot(co.h.col(ControlProblem::pair_index(i, j, d))) + 2.0 * co.g(i, j);
      f(i, j) += extra;
      if (i != j) f(j, i) += extra;
    }
  }
  return 0.5 * (f + f.transpose());
}

}  // namespace

Matrix assemble_f(const ControlProblem& problem, const HamiltonianInputs& in) {
  check_inputs(problem, in);
  return assemble(problem, coefficients_at(problem, in), in);
}

double hamiltonian(const ControlProblem& problem, const AmbiguitySet& s, const HamiltonianInputs& in) {
  check_inputs(problem, in);
  if (s.dim() != problem.d) throw DimensionError("ambiguity set dimension differs from the brownian dimension");
  const Coefficients co = coefficients_at(problem, in);
  return g_eval(s, assemble(problem, co, in)) + in.p.dot(co.b) + co.f;
}

double lambda_decomposition(const ControlProblem& problem, const AmbiguitySet& s, double phi_t,
                            const HamiltonianInputs& in) {
  check_inputs(problem, in);
  if (s.dim() != problem.d) throw DimensionError("ambiguity set dimension differs from the brownian dimension");
  const Coefficients co = coefficients_at(problem, in);
  const double lambda1 = phi_t + co.b.dot(in.p) + co.f;
  const Matrix lambda2 = 0.5 * assemble(problem, co, in);
  return lambda1 + 2.0 * g_eval(s, lambda2);
}

namespace {

// Explicit-step rate: sum of off-centre coefficient magnitudes.
double stencil_rate(const FrozenGenerator& fg, const GridSpec& grid) {
  const double h1 = grid.spacing(0);
  double r = fg.a(0, 0) / (h1 * h1) + std::abs(fg.drift(0)) / h1;
  if (grid.dim() == 2) {
    const double h2 = grid.spacing(1);
    r += fg.a(1, 1) / (h2 * h2) + std::abs(fg.drift(1)) / h2 - std::abs(fg.a(0, 1)) / (h1 * h2);
  }
  return r;
}

void check_cross_monotone(const FrozenGenerator& fg, const GridSpec& grid) {
  if (grid.dim() < 2) return;
  const double h1 = grid.spacing(0);
  const double h2 = grid.spacing(1);
  const double c = std::abs(fg.a(0, 1));
  const double tol = 1e-12 * (1.0 + c);
  if (c > fg.a(0, 0) * h2 / h1 + tol || c > fg.a(1, 1) * h1 / h2 + tol) {
    throw MonotonicityUnavailable(
        "cross-derivative stencil is not monotone: sigma gamma sigma^T violates |a_12| <= "
        "min(a_11 h2/h1, a_22 h1/h2) for some control and vertex");
  }
}

// L V at one node for a frozen generator.
struct NodeStencil {
  double c = 0.0;
  double e = 0.0, w = 0.0, n = 0.0, s = 0.0;
  double ne = 0.0, sw = 0.0, se = 0.0, nw = 0.0;
};

double apply_generator(const FrozenGenerator& fg, const NodeStencil& u, const GridSpec& grid) {
  const double h1 = grid.spacing(0);
  const double fwd1 = (u.e - u.c) / h1;
  const double bwd1 = (u.c - u.w) / h1;
  double out = 0.5 * fg.a(0, 0) * (u.e - 2.0 * u.c + u.w) / (h1 * h1);
  out += fg.drift(0) > 0.0 ? fg.drift(0) * fwd1 : fg.drift(0) * bwd1;
  if (grid.dim() == 2) {
    const double h2 = grid.spacing(1);
    const double fwd2 = (u.n - u.c) / h2;
    const double bwd2 = (u.c - u.s) / h2;
    out += 0.5 * fg.a(1, 1) * (u.n - 2.0 * u.c + u.s) / (h2 * h2);
    out += fg.drift(1) > 0.0 ? fg.drift(1) * fwd2 : fg.drift(1) * bwd2;
    const double axis_sum = u.e + u.w + u.n + u.s;
    const double a12 = fg.a(0, 1);
    // sign-adapted 7-point cross differences
    if (a12 > 0.0) {
      out += a12 * (2.0 * u.c + u.ne + u.sw - axis_sum) / (2.0 * h1 * h2);
    } else if (a12 < 0.0) {
      out -= a12 * (2.0 * u.c + u.se + u.nw - axis_sum) / (2.0 * h1 * h2);
    }
  }
  return out + fg.rate;
}

}  // namespace

ValueField solve_hjb(const ControlProblem& p, const AmbiguitySet& s, const GridSpec& grid,
                     const std::vector<Vector>& controls, const HjbOptions& opts) {
  check_solver_dims(p, s, grid);
  if (controls.empty()) throw ConfigError("control list is empty");
  GeneratorTable table(p, s, grid, controls);
  const std::size_t nodes = grid.node_count();
  const auto layers = static_cast<std::size_t>(grid.nt);
  const double layer_dt = p.horizon / static_cast<double>(layers);

  ValueField field;
  field.grid = grid;
  field.times.resize(layers + 1);
  field.layers.resize(layers + 1);
  for (std::size_t k = 0; k <= layers; ++k) {
    field.times[k] = k == layers ? p.horizon : layer_dt * static_cast<double>(k);
  }
  std::vector<double> cur(nodes);
  {
    std::array<double, 2> x{};
    const auto dim = static_cast<std::size_t>(grid.dim());
    for (std::size_t node = 0; node < nodes; ++node) {
      grid.node(node, std::span<double>(x.data(), dim));
      cur[node] = p.terminal(std::span<const double>(x.data(), dim));
    }
  }
  field.layers[layers] = cur;
  std::vector<double> next(nodes);
  std::size_t steps_taken = 0;

  for (std::size_t k = layers; k-- > 0;) {
    const double t_hi = field.times[k + 1];
    const double t_lo = field.times[k];
    table.build(t_hi, opts.threads);
    double rate = 0.0;
    for (std::size_t node = 0; node < nodes; ++node) {
      for (std::size_t c = 0; c < table.control_count(); ++c) {
        for (std::size_t g = 0; g < table.vertex_count(); ++g) {
          const FrozenGenerator& fg = table.at(node, c, g);
          check_cross_monotone(fg, grid);
          rate = std::max(rate, stencil_rate(fg, grid));
        }
      }
    }
    std::size_t sub = 1;
    if (rate > 0.0) {
      const double need = std::ceil((t_hi - t_lo) * rate * (1.0 - 1e-12));
      if (!(need + static_cast<double>(steps_taken) <= static_cast<double>(opts.max_steps))) {
        throw CflOverflow("CFL substepping would need more than " + std::to_string(opts.max_steps) + " time steps");
      }
      sub = std::max<std::size_t>(1, static_cast<std::size_t>(need));
    }
    const double dt = (t_hi - t_lo) / static_cast<double>(sub);
    for (std::size_t j = 0; j < sub; ++j) {
      const double t = t_hi - dt * static_cast<double>(j);
      if (j > 0) table.build(t, opts.threads);
      const LayerView view(grid, cur);
      parallel_for(nodes, opts.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t node = begin; node < end; ++node) {
          const auto ij = grid.unflatten(node);
          const int i = ij[0];
          const int jj = ij[1];
          NodeStencil u;
          u.c = cur[node];
          u.e = view.at(i + 1, jj);
          u.w = view.at(i - 1, jj);
          if (grid.dim() == 2) {
            u.n = view.at(i, jj + 1);
            u.s = view.at(i, jj - 1);
            u.ne = view.at(i + 1, jj + 1);
            u.sw = view.at(i - 1, jj - 1);
            u.se = view.at(i + 1, jj - 1);
            u.nw = view.at(i - 1, jj + 1);
          }
          double best = std::numeric_limits<double>::infinity();
          for (std::size_t c = 0; c < table.control_count(); ++c) {
            double worst = -std::numeric_limits<double>::infinity();
            for (std::size_t g = 0; g < table.vertex_count(); ++g) {
              worst = std::max(worst, apply_generator(table.at(node, c, g), u, grid));
            }
            best = std::min(best, worst);
          }
          const double val = u.c + dt * best;
          if (!std::isfinite(val)) {
            throw NumericalError("non-finite HJB value at node " + std::to_string(node) + ", step " +
                                 std::to_string(steps_taken + j + 1));
          }
          next[node] = val;
        }
      });
      std::swap(cur, next);
    }
    steps_taken += sub;
    field.layers[k] = cur;
  }
  return field;
}

std::vector<GridSpec> refinement_ladder(const GridSpec& grid, int count) {
  std::vector<GridSpec> out{grid};
  for (int k = 1; k < count; ++k) out.push_back(out.back().refined());
  return out;
}

double central_sup_error(const GridSpec& grid, std::span<const double> layer, const Expr& reference, double t) {
  double worst = 0.0;
  std::array<double, 2> x{};
  const auto dim = static_cast<std::size_t>(grid.dim());
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    if (!grid.in_central(node)) continue;
    grid.node(node, std::span<double>(x.data(), dim));
    const double ref = reference.eval(EvalPoint{t, std::span<const double>(x.data(), dim), {}, {}});
    worst = std::max(worst, std::abs(layer[node] - ref));
  }
  return worst;
}

ConvergenceStudy convergence_study(const ControlProblem& p, const AmbiguitySet& s, const std::vector<GridSpec>& grids,
                                   const std::vector<Vector>& controls, const Expr* reference,
                                   const HjbOptions& opts, double floor) {
  if (grids.size() < 3) throw ConfigError("convergence study needs at least 3 grids");
  ConvergenceStudy st;
  std::vector<ValueField> fields;
  for (const GridSpec& g : grids) fields.push_back(solve_hjb(p, s, g, controls, opts));
  const std::size_t rows = reference != nullptr ? grids.size() : grids.size() - 1;
  for (std::size_t r = 0; r < rows; ++r) {
    const GridSpec& g = grids[r];
    double err = 0.0;
    if (reference != nullptr) {
      err = central_sup_error(g, fields[r].layers.front(), *reference, 0.0);
    } else {
      std::array<double, 2> x{};
      const auto dim = static_cast<std::size_t>(g.dim());
      for (std::size_t node = 0; node < g.node_count(); ++node) {
        if (!g.in_central(node)) continue;
        g.node(node, std::span<double>(x.data(), dim));
        const double ref = fields.back().at(0, std::span<const double>(x.data(), dim));
        err = std::max(err, std::abs(fields[r].layers.front()[node] - ref));
      }
    }
    st.grids.push_back(g);
    st.spacing.push_back(g.spacing(0));
    st.sup_error.push_back(err);
  }
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t r = 0; r < rows; ++r) {
    if (st.sup_error[r] > floor) {
      lx.push_back(std::log(st.spacing[r]));
      ly.push_back(std::log(st.sup_error[r]));
    }
  }
  st.exact = lx.empty();
  if (lx.size() < 2) {
    st.order = std::numeric_limits<double>::quiet_NaN();
    return st;
  }
  const auto cnt = static_cast<double>(lx.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / cnt;
    my += ly[i] / cnt;
  }
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  st.order = sxy / sxx;
  return st;
}

}  // namespace gctl
