#pragma once

#include "gctl/ambiguity.hpp"
#include "gctl/grid.hpp"
#include "gctl/problem.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace gctl {

// Grid solvers support n <= 2 state dimensions and d <= 9 Brownian
// dimensions; the fixed maximum sizes keep these off the heap.
using StateVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2, 1>;
using DiffusionMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 9>;
using StateMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2>;

/// The linear generator obtained by freezing control v and vertex gamma.
struct FrozenGenerator {
  StateVec drift;          // b + sum_ij h_ij gamma_ij
  DiffusionMat diffusion;  // sigma sqrt(gamma)
  StateMat a;              // sigma gamma sigma^T
  StateMat root;           // symmetric PSD root of a
  double rate = 0.0;       // f + sum_ij g_ij gamma_ij
};

/// Frozen generators for every (node, control, vertex) at one time.
class GeneratorTable {
 public:
  GeneratorTable(const ControlProblem& p, const AmbiguitySet& s, const GridSpec& grid,
                 std::vector<Vector> controls);

  /// Re-evaluates the coefficients at time t. Cheap no-op when the problem
  /// is time independent and the table was already built.
  void build(double t, int threads);

  const FrozenGenerator& at(std::size_t node, std::size_t control, std::size_t vertex) const {
    return table_[(node * controls_.size() + control) * vertices_ + vertex];
  }
  std::size_t control_count() const { return controls_.size(); }
  std::size_t vertex_count() const { return vertices_; }
  const std::vector<Vector>& controls() const { return controls_; }

 private:
  const ControlProblem& problem_;
  const AmbiguitySet& ambiguity_;
  const GridSpec& grid_;
  std::vector<Vector> controls_;
  std::size_t vertices_;
  bool built_ = false;
  bool time_dependent_;
  std::vector<FrozenGenerator> table_;
};

/// Symmetric PSD square root of a 1x1 or 2x2 PSD matrix, in closed form.
StateMat small_psd_sqrt(const StateMat& a);

/// Throws DimensionError unless the problem, ambiguity set and grid agree
/// and n <= 2.
void check_solver_dims(const ControlProblem& p, const AmbiguitySet& s, const GridSpec& grid);

/// Lower-index tie breaking tolerance for argmin/argmax comparisons.
inline bool strictly_greater(double a, double b) {
  return a > b + 1e-12 * (1.0 + (a < 0 ? -a : a));
}

}  // namespace gctl
