#pragma once

#include "gctl/ambiguity.hpp"
#include "gctl/grid.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gctl {

/// Feedback control on a space-time grid: for outer layer k (covering
/// [times[k], times[k+1])) and node i, the index of the minimizing control
/// and of the maximizing vertex.
struct PolicyField {
  GridSpec grid;
  std::vector<double> times;  // nt + 1 layer times
  std::vector<Vector> controls;
  std::vector<std::vector<std::uint32_t>> control_index;  // nt x nodes
  std::vector<std::vector<std::uint32_t>> vertex_index;   // nt x nodes

  std::size_t layers() const { return control_index.size(); }
  /// Layer k with times[k] <= t < times[k+1], clamped to the valid range.
  std::size_t layer_for(double t) const;
  /// Multilinear interpolation of the control vectors, clamped outside the grid.
  Vector control_at(double t, std::span<const double> x) const;
  /// Worst vertex index at the node nearest x, per layer.
  std::vector<std::size_t> worst_vertices_near(std::span<const double> x) const;
  /// Throws ConfigError when indices are out of range or sizes disagree.
  void validate(std::size_t vertex_count) const;
};

}  // namespace gctl
