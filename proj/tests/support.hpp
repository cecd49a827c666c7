#pragma once

#include "gctl/ambiguity.hpp"
#include "gctl/problem.hpp"

#include <random>

namespace gctl::test {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Matrix random_symmetric(Rng& rng, int d, double scale = 1.0) {
  Matrix a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) a(i, j) = a(j, i) = uniform(rng, -scale, scale);
  }
  return a;
}

inline Matrix random_psd(Rng& rng, int d, int rank = -1) {
  const int r = rank < 0 ? d : rank;
  Matrix f(d, std::max(r, 1));
  for (int i = 0; i < f.rows(); ++i) {
    for (int j = 0; j < f.cols(); ++j) f(i, j) = r == 0 ? 0.0 : uniform(rng, -1.0, 1.0);
  }
  return f * f.transpose();
}

inline AmbiguitySet random_set(Rng& rng, int d, int k) {
  std::vector<Matrix> v;
  for (int i = 0; i < k; ++i) v.push_back(random_psd(rng, d, i == 0 ? d - 1 : d));
  return AmbiguitySet(std::move(v));
}

inline AmbiguitySet two_vertex_set() {
  return AmbiguitySet({Matrix(Eigen::Vector2d(1, 0).asDiagonal()), Matrix(Matrix::Identity(2, 2))});
}

inline Matrix mat1(double a) { return Matrix::Constant(1, 1, a); }

// n = d = m = 1 problem with all coefficients zero and sigma = 1.
inline ControlProblem scalar_problem() {
  ControlProblem p = ControlProblem::zeros(1, 1, 1);
  p.sigma[0] = Expr::constant(1.0);
  p.controls = ControlSet::finite({Vector::Zero(1)});
  return p;
}

inline Expr ex(const std::string& s, int n = 1, int m = 1) { return parse_expr(s, n, m); }

}  // namespace gctl::test
