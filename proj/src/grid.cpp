#include "gctl/grid.hpp"

#include "gctl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gctl {

std::size_t GridSpec::node_count() const {
  std::size_t c = 1;
  for (int n : nx) c *= static_cast<std::size_t>(n);
  return c;
}

std::array<int, 2> GridSpec::unflatten(std::size_t flat) const {
  const auto n0 = static_cast<std::size_t>(nx[0]);
  return {static_cast<int>(flat % n0), static_cast<int>(flat / n0)};
}

void GridSpec::node(std::size_t flat, std::span<double> out) const {
  const auto ij = unflatten(flat);
  out[0] = coord(0, ij[0]);
  if (dim() > 1) out[1] = coord(1, ij[1]);
}

bool GridSpec::in_central(std::size_t flat) const {
  const auto ij = unflatten(flat);
  for (int a = 0; a < dim(); ++a) {
    const double x = coord(a, ij[static_cast<std::size_t>(a)]);
    const double q = 0.25 * (hi[a] - lo[a]);
    const double eps = 1e-9 * spacing(a);
    if (x < lo[a] + q - eps || x > hi[a] - q + eps) return false;
  }
  return true;
}

GridSpec GridSpec::refined() const {
  GridSpec r = *this;
  for (int& n : r.nx) n = 2 * n - 1;
  r.nt = 2 * nt;
  return r;
}

void GridSpec::validate() const {
  if (nx.empty() || nx.size() > 2) {
    throw ConfigError("grid must have 1 or 2 axes, got " + std::to_string(nx.size()));
  }
  if (lo.size() != nx.size() || hi.size() != nx.size()) {
    throw ConfigError("grid x_lo, x_hi and nx must have the same length");
  }
  for (std::size_t a = 0; a < nx.size(); ++a) {
    if (nx[a] < 3) throw ConfigError("grid needs at least 3 nodes per axis");
    if (!(lo[a] < hi[a]) || !std::isfinite(lo[a]) || !std::isfinite(hi[a])) {
      throw ConfigError("grid bounds must satisfy x_lo < x_hi");
    }
  }
  if (nt < 1) throw ConfigError("grid nt must be at least 1");
}

double cells_outside(const GridSpec& grid, std::span<const double> x) {
  double worst = 0.0;
  for (int a = 0; a < grid.dim(); ++a) {
    const double h = grid.spacing(a);
    const double below = (grid.lo[a] - x[a]) / h;
    const double above = (x[a] - grid.hi[a]) / h;
    worst = std::max({worst, below, above});
  }
  return worst;
}

namespace {

// Cell index and weight along one axis, clamped to the domain.
inline void locate(const GridSpec& g, int axis, double x, int& i, double& w) {
  const double h = g.spacing(axis);
  double s = (x - g.lo[axis]) / h;
  const int last = g.nx[axis] - 1;
  if (!(s > 0.0)) {
    i = 0;
    w = 0.0;
    return;
  }
  if (s >= last) {
    i = last - 1;
    w = 1.0;
    return;
  }
  i = static_cast<int>(s);
  if (i >= last) i = last - 1;
  w = s - i;
}

}  // namespace

double interpolate(const GridSpec& grid, std::span<const double> values, std::span<const double> x) {
  int i;
  double wx;
  locate(grid, 0, x[0], i, wx);
  if (grid.dim() == 1) {
    return (1.0 - wx) * values[static_cast<std::size_t>(i)] + wx * values[static_cast<std::size_t>(i) + 1];
  }
  int j;
  double wy;
  locate(grid, 1, x[1], j, wy);
  const double v00 = values[grid.flatten(i, j)];
  const double v10 = values[grid.flatten(i + 1, j)];
  const double v01 = values[grid.flatten(i, j + 1)];
  const double v11 = values[grid.flatten(i + 1, j + 1)];
  return (1.0 - wy) * ((1.0 - wx) * v00 + wx * v10) + wy * ((1.0 - wx) * v01 + wx * v11);
}

std::size_t ValueField::layer_near(double t) const {
  std::size_t best = 0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (std::abs(times[k] - t) < std::abs(times[best] - t)) best = k;
  }
  return best;
}

}  // namespace gctl
