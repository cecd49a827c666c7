#pragma once

#include "gctl/ambiguity.hpp"
#include "gctl/expr.hpp"
#include "gctl/grid.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gctl {

struct BoxControls {
  Vector lo;
  Vector hi;
  std::vector<int> counts;
};

struct FiniteControls {
  std::vector<Vector> points;
};

/// Compact control set U: a box sampled on a tensor grid, or a finite list.
class ControlSet {
 public:
  static ControlSet box(Vector lo, Vector hi, std::vector<int> counts);
  static ControlSet finite(std::vector<Vector> points);

  int dim() const;
  bool is_box() const { return std::holds_alternative<BoxControls>(set_); }
  const BoxControls& as_box() const { return std::get<BoxControls>(set_); }
  const FiniteControls& as_finite() const { return std::get<FiniteControls>(set_); }
  bool contains(const Vector& v, double tol = 1e-12) const;

 private:
  explicit ControlSet(std::variant<BoxControls, FiniteControls> s) : set_(std::move(s)) {}
  std::variant<BoxControls, FiniteControls> set_;
};

/// Box: tensor grid including endpoints (a single count gives the midpoint),
/// lexicographic with the first component varying slowest. Finite: verbatim.
std::vector<Vector> discretize_controls(const ControlSet& cs);

/// Coefficients frozen at one (t, x, v).
struct Coefficients {
  Vector b;        // n
  Matrix h;        // n x pairs, column k is h_ij for the k-th pair i <= j
  Matrix sigma;    // n x d
  double f = 0.0;
  Matrix g;        // d x d, symmetric
};

/// Finite-horizon control problem driven by a d-dimensional G-Brownian motion.
/// h and g are stored for i <= j only, so their symmetry holds structurally.
struct ControlProblem {
  std::string name = "unnamed";
  int n = 1;
  int d = 1;
  int m = 1;
  double horizon = 1.0;
  std::vector<Expr> b;                    // n
  std::vector<std::vector<Expr>> h;       // pairs x n
  std::vector<Expr> sigma;                // n*d, row-major
  Expr f;
  std::vector<Expr> g;                    // pairs
  Expr phi;                               // in x only
  ControlSet controls = ControlSet::finite({Vector::Zero(1)});

  static int pair_count(int d) { return d * (d + 1) / 2; }
  /// Index of the pair (i, j), zero-based, in either order.
  static int pair_index(int i, int j, int d);

  /// Builds a problem with zero h and g and the given dimensions.
  static ControlProblem zeros(int n, int d, int m);

  Coefficients evaluate(double t, std::span<const double> x, std::span<const double> v) const;
  double terminal(std::span<const double> x) const { return phi.eval(EvalPoint{0.0, x, {}, {}}); }
  bool time_dependent() const;
  /// Throws DimensionError when expression counts disagree with n, d, m.
  void validate() const;
};

/// sum_{i,j} h_ij gamma_ij over the full symmetric index range.
Vector qv_drift(const Coefficients& c, const Matrix& gamma);
/// sum_{i,j} g_ij gamma_ij.
double qv_rate(const Coefficients& c, const Matrix& gamma);

struct LoadedProblem {
  ControlProblem problem;
  AmbiguitySet ambiguity;
  H3Certificate certificate;
  GridSpec grid;
  /// Optional reference solution V(t, x) used by the check suite.
  std::optional<Expr> closed_form;
};

/// Parses the JSON config schema. Errors: ConfigError (schema),
/// ParseError (expressions), NoNondegenerateComponent.
LoadedProblem load_problem_text(std::string_view json_text);
LoadedProblem load_problem(const std::string& path);

struct LipschitzReport {
  double ratio_b = 0.0;
  double ratio_h = 0.0;
  double ratio_sigma = 0.0;
  double ratio_near = 0.0;  // max ratio for samples within the grid box
  double ratio_far = 0.0;   // max ratio for samples in a 4x larger box
  std::vector<std::string> warnings;
};

/// Finite-difference spot check of the Lipschitz condition on b, h, sigma in
/// (x, v). Reports, never throws on growth; growth only produces warnings.
LipschitzReport spot_check_lipschitz(const ControlProblem& p, const GridSpec& grid,
                                     int samples = 100, std::uint64_t seed = 7);

}  // namespace gctl
