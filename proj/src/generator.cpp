#include "gctl/generator.hpp"

#include "gctl/errors.hpp"
#include "gctl/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace gctl {

void check_solver_dims(const ControlProblem& p, const AmbiguitySet& s, const GridSpec& grid) {
  p.validate();
  grid.validate();
  if (p.n > 2) throw DimensionError("grid solvers support state dimension n <= 2");
  if (p.d > 9) throw DimensionError("grid solvers support brownian dimension d <= 9");
  if (grid.dim() != p.n) {
    throw DimensionError("grid has " + std::to_string(grid.dim()) + " axes but the state dimension is " +
                         std::to_string(p.n));
  }
  if (s.dim() != p.d) {
    throw DimensionError("ambiguity set is " + std::to_string(s.dim()) +
                         "-dimensional but the brownian dimension is " + std::to_string(p.d));
  }
}

StateMat small_psd_sqrt(const StateMat& a) {
  if (a.rows() == 1) return StateMat::Constant(1, 1, std::sqrt(std::max(a(0, 0), 0.0)));
  // sqrt(A) = (A + s I) / t with s = sqrt(det A), t = sqrt(tr A + 2 s)
  const double det = std::max(a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0), 0.0);
  const double s = std::sqrt(det);
  const double tr = a(0, 0) + a(1, 1) + 2.0 * s;
  if (!(tr > 1e-300)) return StateMat::Zero(2, 2);
  StateMat r = a;
  r(0, 0) += s;
  r(1, 1) += s;
  return r / std::sqrt(tr);
}

GeneratorTable::GeneratorTable(const ControlProblem& p, const AmbiguitySet& s, const GridSpec& grid,
                               std::vector<Vector> controls)
    : problem_(p),
      ambiguity_(s),
      grid_(grid),
      controls_(std::move(controls)),
      vertices_(s.size()),
      time_dependent_(p.time_dependent()) {
  check_solver_dims(p, s, grid);
  if (controls_.empty()) throw ConfigError("control list is empty");
  table_.resize(grid.node_count() * controls_.size() * vertices_);
}

void GeneratorTable::build(double t, int threads) {
  if (built_ && !time_dependent_) return;
  const std::size_t nodes = grid_.node_count();
  parallel_for(nodes, threads, [&](std::size_t begin, std::size_t end) {
    std::array<double, 2> x{};
    for (std::size_t node = begin; node < end; ++node) {
      grid_.node(node, std::span<double>(x.data(), static_cast<std::size_t>(grid_.dim())));
      for (std::size_t c = 0; c < controls_.size(); ++c) {
        const Vector& v = controls_[c];
        const Coefficients co =
            problem_.evaluate(t, std::span<const double>(x.data(), static_cast<std::size_t>(grid_.dim())),
                              std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
        for (std::size_t k = 0; k < vertices_; ++k) {
          const Matrix& gamma = ambiguity_.vertex(k);
          FrozenGenerator& fg = table_[(node * controls_.size() + c) * vertices_ + k];
          fg.drift = co.b + qv_drift(co, gamma);
          fg.diffusion = co.sigma * ambiguity_.vertex_sqrt(k);
          fg.a = co.sigma * gamma * co.sigma.transpose();
          fg.a = 0.5 * (fg.a + fg.a.transpose()).eval();
          fg.root = small_psd_sqrt(fg.a);
          fg.rate = co.f + qv_rate(co, gamma);
        }
      }
    }
  });
  built_ = true;
}

}  // namespace gctl
