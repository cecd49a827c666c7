#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace gctl {

/// Uniform tensor grid on [lo, hi] per axis, with nt time steps.
/// Flat node index: axis 0 varies fastest.
struct GridSpec {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<int> nx;
  int nt = 1;

  int dim() const { return static_cast<int>(nx.size()); }
  double spacing(int axis) const { return (hi[axis] - lo[axis]) / (nx[axis] - 1); }
  double coord(int axis, int i) const { return lo[axis] + spacing(axis) * i; }
  std::size_t node_count() const;
  std::array<int, 2> unflatten(std::size_t flat) const;
  std::size_t flatten(int i, int j = 0) const { return static_cast<std::size_t>(i) + static_cast<std::size_t>(nx[0]) * static_cast<std::size_t>(j); }
  /// Coordinates of a node, written to out[0..dim).
  void node(std::size_t flat, std::span<double> out) const;
  /// Node lies in the central 50% of the domain along every axis.
  bool in_central(std::size_t flat) const;
  /// Halves every spacing; time steps doubled.
  GridSpec refined() const;
  /// Throws ConfigError on an unusable grid (nx < 3, lo >= hi, nt < 1).
  void validate() const;
};

/// Multilinear interpolation of nodal values, with constant extrapolation
/// outside the domain.
double interpolate(const GridSpec& grid, std::span<const double> values, std::span<const double> x);

/// Largest distance outside the domain, measured in cells of the axis.
double cells_outside(const GridSpec& grid, std::span<const double> x);

/// Value samples on a space-time grid, one node array per stored time.
struct ValueField {
  GridSpec grid;
  std::vector<double> times;
  std::vector<std::vector<double>> layers;

  double at(std::size_t layer, std::span<const double> x) const {
    return interpolate(grid, layers[layer], x);
  }
  /// Layer whose time is closest to t.
  std::size_t layer_near(double t) const;
};

/// Read-only view of one layer with ghost nodes one cell outside the grid,
/// filled by quadratic extrapolation along each axis (so that second
/// differences at boundary rows become one-sided).
class LayerView {
 public:
  LayerView(const GridSpec& grid, std::span<const double> u) : grid_(grid), u_(u) {}

  double at(int i, int j = 0) const {
    const int n0 = grid_.nx[0];
    if (i < 0) return 3.0 * at(0, j) - 3.0 * at(1, j) + at(2, j);
    if (i >= n0) return 3.0 * at(n0 - 1, j) - 3.0 * at(n0 - 2, j) + at(n0 - 3, j);
    if (grid_.dim() > 1) {
      const int n1 = grid_.nx[1];
      if (j < 0) return 3.0 * at(i, 0) - 3.0 * at(i, 1) + at(i, 2);
      if (j >= n1) return 3.0 * at(i, n1 - 1) - 3.0 * at(i, n1 - 2) + at(i, n1 - 3);
    }
    return u_[grid_.flatten(i, j)];
  }

 private:
  const GridSpec& grid_;
  std::span<const double> u_;
};

}  // namespace gctl
