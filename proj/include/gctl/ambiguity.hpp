#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <vector>

namespace gctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kPsdTol = 1e-10;

/// Symmetric PSD square root via eigendecomposition; eigenvalues below 1e-12
/// are clipped to zero so rank-deficient inputs are handled uniformly.
Matrix psd_sqrt(const Matrix& a);

/// Largest singular value.
double spectral_norm(const Matrix& a);

/// The polytope of admissible covariance rates, stored as its extreme points.
/// Immutable after construction.
class AmbiguitySet {
 public:
  /// Validates symmetry (1e-12 entrywise) and positive semidefiniteness
  /// (smallest eigenvalue >= -1e-10) of every vertex. Throws ConfigError.
  explicit AmbiguitySet(std::vector<Matrix> vertices);

  int dim() const { return dim_; }
  std::size_t size() const { return vertices_.size(); }
  const std::vector<Matrix>& vertices() const { return vertices_; }
  const Matrix& vertex(std::size_t k) const { return vertices_[k]; }
  /// Symmetric PSD root of vertex k, precomputed.
  const Matrix& vertex_sqrt(std::size_t k) const { return roots_[k]; }
  /// max over vertices of the spectral norm.
  double max_norm() const { return max_norm_; }

  /// Convenience for scalar (d = 1) sets.
  static AmbiguitySet scalar(std::vector<double> variances);

 private:
  int dim_ = 0;
  std::vector<Matrix> vertices_;
  std::vector<Matrix> roots_;
  double max_norm_ = 0.0;
};

struct ComponentBounds {
  Vector sigma_bar_sq;  // max over vertices of gamma_ii
  Vector sigma_low_sq;  // min over vertices of gamma_ii
};

/// Certificate that some Brownian component keeps a positive lower variance.
/// Indices are zero-based.
struct H3Certificate {
  int i_star = 0;
  double sigma_low_sq_istar = 0.0;
  double alpha = 0.0;
  /// Shift lambda_i for each i != i_star making B^i + lambda_i B^{i*} non-degenerate.
  std::map<int, double> lambda_for;
  /// min over vertices of gamma_ii + 2 lambda gamma_{i i*} + lambda^2 gamma_{i* i*}.
  std::map<int, double> shifted_form_min;
};

/// G(A) = 1/2 max over vertices of tr[A gamma].
double g_eval(const AmbiguitySet& s, const Matrix& a);

/// G_beta(a) = G(beta beta^T) a^+ + G(-beta beta^T) a^-.
double directional_g(const AmbiguitySet& s, const Vector& beta, double a);

ComponentBounds component_bounds(const AmbiguitySet& s);

/// Vertex-level test: degenerate iff some vertex has smallest eigenvalue
/// <= 1e-10. Conservative for hull points not attained at a vertex.
bool is_degenerate(const AmbiguitySet& s);

/// Throws NoNondegenerateComponent when every component has a zero lower
/// variance bound.
H3Certificate check_h3(const AmbiguitySet& s);

/// The one-dimensional set {min beta^T gamma beta, max beta^T gamma beta}
/// driving beta^T B.
AmbiguitySet project_direction(const AmbiguitySet& s, const Vector& beta);

}  // namespace gctl
