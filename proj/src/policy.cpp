#include "gctl/policy.hpp"

#include "gctl/errors.hpp"

#include <algorithm>
#include <cmath>

namespace gctl {

std::size_t PolicyField::layer_for(double t) const {
  const std::size_t n = layers();
  if (n == 0) throw ConfigError("policy field has no layers");
  const auto k = std::upper_bound(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(n), t) -
                 times.begin();
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k - 1, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

Vector PolicyField::control_at(double t, std::span<const double> x) const {
  const std::size_t k = layer_for(t);
  const auto& idx = control_index[k];
  const Eigen::Index m = controls.front().size();
  Vector v(m);
  std::vector<double> component(idx.size());
  for (Eigen::Index c = 0; c < m; ++c) {
    for (std::size_t node = 0; node < idx.size(); ++node) component[node] = controls[idx[node]](c);
    v(c) = interpolate(grid, component, x);
  }
  return v;
}

std::vector<std::size_t> PolicyField::worst_vertices_near(std::span<const double> x) const {
  int ij[2] = {0, 0};
  for (int a = 0; a < grid.dim(); ++a) {
    const double s = std::round((x[static_cast<std::size_t>(a)] - grid.lo[a]) / grid.spacing(a));
    ij[a] = static_cast<int>(std::clamp(s, 0.0, static_cast<double>(grid.nx[a] - 1)));
  }
  const std::size_t node = grid.flatten(ij[0], ij[1]);
  std::vector<std::size_t> out;
  out.reserve(layers());
  for (const auto& layer : vertex_index) out.push_back(layer[node]);
  return out;
}

void PolicyField::validate(std::size_t vertex_count) const {
  grid.validate();
  if (controls.empty()) throw ConfigError("policy field has no controls");
  if (control_index.size() != vertex_index.size() || times.size() != control_index.size() + 1) {
    throw ConfigError("policy field layer counts disagree");
  }
  for (std::size_t k = 0; k < control_index.size(); ++k) {
    if (control_index[k].size() != grid.node_count() || vertex_index[k].size() != grid.node_count()) {
      throw ConfigError("policy field layer " + std::to_string(k) + " has the wrong node count");
    }
    for (auto c : control_index[k]) {
      if (c >= controls.size()) throw ConfigError("policy control index out of range");
    }
    for (auto v : vertex_index[k]) {
      if (v >= vertex_count) throw ConfigError("policy vertex index out of range");
    }
  }
}

}  // namespace gctl
