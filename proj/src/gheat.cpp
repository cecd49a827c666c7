#include "gctl/gheat.hpp"

#include "gctl/errors.hpp"
#include "gctl/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace gctl {

namespace {

struct VertexCoeffs {
  double g11 = 0.0;
  double g22 = 0.0;
  double g12 = 0.0;
};

class HeatOperator {
 public:
  HeatOperator(const AmbiguitySet& s, const GridSpec& grid) : grid_(grid) {
    if (grid.dim() != s.dim() || grid.dim() > 2) {
      throw DimensionError("G-heat grid must match the Brownian dimension (1 or 2); got grid dim " +
                           std::to_string(grid.dim()) + " for d = " + std::to_string(s.dim()));
    }
    for (const Matrix& g : s.vertices()) {
      VertexCoeffs c;
      c.g11 = g(0, 0);
      if (grid.dim() == 2) {
        c.g22 = g(1, 1);
        c.g12 = g(0, 1);
        const double h1 = grid.spacing(0);
        const double h2 = grid.spacing(1);
        const double tol = 1e-12 * (1.0 + std::abs(c.g12));
        if (std::abs(c.g12) > c.g11 * h2 / h1 + tol || std::abs(c.g12) > c.g22 * h1 / h2 + tol) {
          throw MonotonicityUnavailable(
              "cross-derivative stencil is not monotone: a vertex violates |gamma_12| <= "
              "min(gamma_11 h2/h1, gamma_22 h1/h2)");
        }
      }
      coeffs_.push_back(c);
    }
    double dt = std::numeric_limits<double>::infinity();
    if (s.max_norm() > 0.0) {
      for (int a = 0; a < grid.dim(); ++a) {
        dt = std::min(dt, grid.spacing(a) * grid.spacing(a) / (2.0 * grid.dim() * s.max_norm()));
      }
    }
    dt_max_ = dt;
  }

  double dt_max() const { return dt_max_; }

  /// out = u + dt * G(D^2 u), nodes in [begin, end).
  void apply(std::span<const double> u, std::span<double> out, double dt, std::size_t begin,
             std::size_t end) const {
    const LayerView view(grid_, u);
    const double h1 = grid_.spacing(0);
    const double ih1 = 1.0 / (h1 * h1);
    if (grid_.dim() == 1) {
      for (std::size_t node = begin; node < end; ++node) {
        const int i = static_cast<int>(node);
        const double c = u[node];
        const double d2 = (view.at(i - 1) - 2.0 * c + view.at(i + 1)) * ih1;
        double best = -std::numeric_limits<double>::infinity();
        for (const VertexCoeffs& v : coeffs_) best = std::max(best, 0.5 * v.g11 * d2);
        out[node] = c + dt * best;
      }
      return;
    }
    const double h2 = grid_.spacing(1);
    const double ih2 = 1.0 / (h2 * h2);
    const double ih12 = 1.0 / (2.0 * h1 * h2);
    for (std::size_t node = begin; node < end; ++node) {
      const auto ij = grid_.unflatten(node);
      const int i = ij[0];
      const int j = ij[1];
      const double c = u[node];
      const double e = view.at(i + 1, j), w = view.at(i - 1, j);
      const double n = view.at(i, j + 1), s = view.at(i, j - 1);
      const double d11 = (w - 2.0 * c + e) * ih1;
      const double d22 = (s - 2.0 * c + n) * ih2;
      const double axis_sum = e + w + n + s;
      // sign-adapted 7-point cross differences
      const double d12p = (2.0 * c + view.at(i + 1, j + 1) + view.at(i - 1, j - 1) - axis_sum) * ih12;
      const double d12m = -(2.0 * c + view.at(i + 1, j - 1) + view.at(i - 1, j + 1) - axis_sum) * ih12;
      double best = -std::numeric_limits<double>::infinity();
      for (const VertexCoeffs& v : coeffs_) {
        const double cross = v.g12 >= 0.0 ? v.g12 * d12p : v.g12 * d12m;
        best = std::max(best, 0.5 * (v.g11 * d11 + v.g22 * d22) + cross);
      }
      out[node] = c + dt * best;
    }
  }

 private:
  const GridSpec& grid_;
  std::vector<VertexCoeffs> coeffs_;
  double dt_max_;
};

std::size_t substeps(double span, double dt_max, std::size_t layers, std::size_t max_steps) {
  if (!std::isfinite(dt_max)) return 1;
  const double s = std::ceil(span / dt_max * (1.0 - 1e-12));
  if (!(s * static_cast<double>(layers) <= static_cast<double>(max_steps))) {
    throw CflOverflow("CFL substepping would need more than " + std::to_string(max_steps) +
                      " time steps");
  }
  return std::max<std::size_t>(1, static_cast<std::size_t>(s));
}

void check_finite(std::span<const double> u, std::size_t step) {
  for (double x : u) {
    if (!std::isfinite(x)) {
      throw NumericalError("non-finite value in G-heat solution at step " + std::to_string(step));
    }
  }
}

// Advances u in place by `steps` explicit steps of size dt.
void evolve(const HeatOperator& op, const GridSpec& grid, std::vector<double>& u, std::vector<double>& tmp,
            std::size_t steps, double dt, int threads, std::size_t& step_counter) {
  const std::size_t nodes = grid.node_count();
  for (std::size_t s = 0; s < steps; ++s) {
    parallel_for(nodes, threads, [&](std::size_t b, std::size_t e) { op.apply(u, tmp, dt, b, e); });
    std::swap(u, tmp);
    check_finite(u, ++step_counter);
  }
}

std::vector<double> sample(const Expr& phi, const GridSpec& grid) {
  std::vector<double> u(grid.node_count());
  std::array<double, 2> x{};
  const auto dim = static_cast<std::size_t>(grid.dim());
  for (std::size_t node = 0; node < u.size(); ++node) {
    grid.node(node, std::span<double>(x.data(), dim));
    u[node] = phi.eval(EvalPoint{0.0, std::span<const double>(x.data(), dim), {}, {}});
  }
  return u;
}

}  // namespace

GridSpec default_heat_grid(const AmbiguitySet& s, double horizon, double h, int nt) {
  if (!(h > 0.0)) throw ConfigError("heat grid spacing must be positive");
  const ComponentBounds b = component_bounds(s);
  GridSpec g;
  for (int a = 0; a < s.dim(); ++a) {
    const double sig = std::sqrt(std::max(b.sigma_bar_sq[a], 0.0));
    const double half = 6.0 * (sig > 0.0 ? sig : 1.0) * std::sqrt(horizon);
    const int k = std::max(1, static_cast<int>(std::ceil(half / h - 1e-9)));
    g.lo.push_back(-k * h);
    g.hi.push_back(k * h);
    g.nx.push_back(2 * k + 1);
  }
  g.nt = nt;
  return g;
}

ValueField solve_gheat(const AmbiguitySet& s, const Expr& phi, double horizon, const GridSpec& grid,
                       const HeatOptions& opts) {
  grid.validate();
  if (!(horizon >= 0.0)) throw ConfigError("G-heat horizon must be nonnegative");
  const HeatOperator op(s, grid);
  ValueField field;
  field.grid = grid;
  const auto layers = static_cast<std::size_t>(grid.nt);
  const double layer_dt = horizon / static_cast<double>(layers);
  const std::size_t sub = horizon > 0.0 ? substeps(layer_dt, op.dt_max(), layers, opts.max_steps) : 1;
  const double dt = layer_dt / static_cast<double>(sub);

  std::vector<double> u = sample(phi, grid);
  std::vector<double> tmp(u.size());
  field.times.push_back(0.0);
  field.layers.push_back(u);
  std::size_t counter = 0;
  for (std::size_t k = 1; k <= layers; ++k) {
    evolve(op, grid, u, tmp, sub, dt, opts.threads, counter);
    field.times.push_back(k == layers ? horizon : layer_dt * static_cast<double>(k));
    field.layers.push_back(u);
  }
  return field;
}

ValueField solve_gheat_directional(const AmbiguitySet& s, const Vector& beta, const Expr& phi,
                                   double horizon, const GridSpec& grid, const HeatOptions& opts) {
  if (grid.dim() != 1) throw DimensionError("directional G-heat solves need a 1-D grid");
  return solve_gheat(project_direction(s, beta), phi, horizon, grid, opts);
}

double g_expectation(const AmbiguitySet& s, const Expr& phi, double t, const GridSpec& grid,
                     const HeatOptions& opts) {
  GridSpec g = grid;
  g.nt = 1;
  const ValueField f = solve_gheat(s, phi, t, g, opts);
  const std::array<double, 2> origin{0.0, 0.0};
  return f.at(1, std::span<const double>(origin.data(), static_cast<std::size_t>(g.dim())));
}

constexpr std::size_t kMaxNestedTable = 50'000'000;

NestedResult nested_expectation(const AmbiguitySet& s, const Expr& phi, const std::vector<double>& times,
                                const GridSpec& grid, const HeatOptions& opts, const Vector& beta,
                                double tolerance) {
  const std::size_t n_inc = times.size();
  if (n_inc == 0) throw ConfigError("nested expectation needs at least one time");
  if (n_inc > 3) throw ConfigError("nested expectation supports at most 3 times");
  if (grid.dim() != 1) throw DimensionError("nested expectation needs a 1-D grid");
  grid.validate();
  for (std::size_t k = 0; k < n_inc; ++k) {
    const double prev = k == 0 ? 0.0 : times[k - 1];
    if (!(times[k] > prev)) throw ConfigError("nested expectation times must be increasing and positive");
  }
  const AmbiguitySet s1 = s.dim() == 1 ? s
                          : project_direction(s, beta.size() == s.dim() ? beta : Vector(Vector::Unit(s.dim(), 0)));
  const HeatOperator op(s1, grid);
  const std::size_t nx = static_cast<std::size_t>(grid.nx[0]);

  // table over grid^N, last increment fastest
  std::size_t total = 1;
  for (std::size_t k = 0; k < n_inc; ++k) total *= nx;
  if (n_inc > 1 && total > kMaxNestedTable) {
    throw ConfigError("nested expectation table of " + std::to_string(total) + " entries exceeds " +
                      std::to_string(kMaxNestedTable) + "; use a coarser grid");
  }
  std::vector<double> table(total);
  {
    std::vector<double> y(n_inc);
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t r = flat;
      for (std::size_t k = n_inc; k-- > 0;) {
        y[k] = grid.coord(0, static_cast<int>(r % nx));
        r /= nx;
      }
      table[flat] = phi.eval(EvalPoint{0.0, {}, {}, y});
    }
  }

  NestedResult result;
  const std::array<double, 1> origin{0.0};
  for (std::size_t level = n_inc; level-- > 0;) {
    const double duration = times[level] - (level == 0 ? 0.0 : times[level - 1]);
    const std::size_t sub = substeps(duration, op.dt_max(), 1, opts.max_steps);
    const double dt = duration / static_cast<double>(sub);
    const std::size_t rows = table.size() / nx;
    std::vector<double> next(rows);
    parallel_for(rows, opts.threads, [&](std::size_t b, std::size_t e) {
      std::vector<double> u(nx), tmp(nx);
      for (std::size_t r = b; r < e; ++r) {
        std::copy_n(table.begin() + static_cast<std::ptrdiff_t>(r * nx), nx, u.begin());
        std::size_t counter = 0;
        evolve(op, grid, u, tmp, sub, dt, 1, counter);
        next[r] = interpolate(grid, u, origin);
      }
    });
    if (rows > 1) {
      bool warned = false;
      for (std::size_t r = 0; r + 1 < rows && !warned; ++r) {
        const std::size_t i = r % nx;
        if (i + 1 >= nx) continue;
        if (!grid.in_central(i) || !grid.in_central(i + 1)) continue;
        if (std::abs(next[r + 1] - next[r]) > 10.0 * tolerance) {
          result.warnings.push_back("grid under-resolution: adjacent tabulated values of level " +
                                    std::to_string(level) + " differ by more than 10x tolerance");
          warned = true;
        }
      }
    }
    table = std::move(next);
  }
  result.value = table.front();
  return result;
}

}  // namespace gctl
