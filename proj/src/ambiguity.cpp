#include "gctl/ambiguity.hpp"

#include "gctl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gctl {

Matrix psd_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  Vector ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    ev[i] = ev[i] < 1e-12 ? 0.0 : std::sqrt(ev[i]);
  }
  Matrix r = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (r + r.transpose());
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()[0];
}

AmbiguitySet::AmbiguitySet(std::vector<Matrix> vertices) {
  if (vertices.empty()) throw ConfigError("ambiguity set needs at least one vertex");
  dim_ = static_cast<int>(vertices.front().rows());
  if (dim_ < 1) throw ConfigError("ambiguity vertices must be at least 1x1");
  for (std::size_t k = 0; k < vertices.size(); ++k) {
    Matrix& g = vertices[k];
    if (g.rows() != dim_ || g.cols() != dim_) {
      throw DimensionError("ambiguity vertex " + std::to_string(k) + " is not " +
                           std::to_string(dim_) + "x" + std::to_string(dim_));
    }
    if (!g.allFinite()) throw ConfigError("ambiguity vertex " + std::to_string(k) + " is not finite");
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) {
      throw ConfigError("ambiguity vertex " + std::to_string(k) + " is not symmetric");
    }
    g = 0.5 * (g + g.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()[0] < -kPsdTol) {
      throw ConfigError("ambiguity vertex " + std::to_string(k) +
                        " is not positive semidefinite");
    }
    max_norm_ = std::max(max_norm_, spectral_norm(g));
    roots_.push_back(psd_sqrt(g));
  }
  vertices_ = std::move(vertices);
}

AmbiguitySet AmbiguitySet::scalar(std::vector<double> variances) {
  std::vector<Matrix> v;
  v.reserve(variances.size());
  for (double s : variances) v.push_back(Matrix::Constant(1, 1, s));
  return AmbiguitySet(std::move(v));
}

namespace {

void require_symmetric(const AmbiguitySet& s, const Matrix& a) {
  if (a.rows() != s.dim() || a.cols() != s.dim()) {
    throw DimensionError("matrix is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + ", expected " + std::to_string(s.dim()) +
                         "x" + std::to_string(s.dim()));
  }
  if (a.size() > 0 && (a - a.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) {
    throw DimensionError("matrix argument of G is not symmetric");
  }
}

}  // namespace

double g_eval(const AmbiguitySet& s, const Matrix& a) {
  require_symmetric(s, a);
  double best = -std::numeric_limits<double>::infinity();
  for (const Matrix& g : s.vertices()) {
    best = std::max(best, (a.cwiseProduct(g)).sum());
  }
  return 0.5 * best;
}

double directional_g(const AmbiguitySet& s, const Vector& beta, double a) {
  if (beta.size() != s.dim()) {
    throw DimensionError("direction has length " + std::to_string(beta.size()) +
                         ", expected " + std::to_string(s.dim()));
  }
  const Matrix bb = beta * beta.transpose();
  const double pos = std::max(a, 0.0);
  const double neg = std::max(-a, 0.0);
  return g_eval(s, bb) * pos + g_eval(s, -bb) * neg;
}

ComponentBounds component_bounds(const AmbiguitySet& s) {
  ComponentBounds b{Vector::Constant(s.dim(), -std::numeric_limits<double>::infinity()),
                    Vector::Constant(s.dim(), std::numeric_limits<double>::infinity())};
  for (const Matrix& g : s.vertices()) {
    for (int i = 0; i < s.dim(); ++i) {
      b.sigma_bar_sq[i] = std::max(b.sigma_bar_sq[i], g(i, i));
      b.sigma_low_sq[i] = std::min(b.sigma_low_sq[i], g(i, i));
    }
  }
  return b;
}

bool is_degenerate(const AmbiguitySet& s) {
  for (const Matrix& g : s.vertices()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()[0] <= kPsdTol) return true;
  }
  return false;
}

H3Certificate check_h3(const AmbiguitySet& s) {
  const ComponentBounds bounds = component_bounds(s);
  H3Certificate cert;
  cert.i_star = -1;
  for (int i = 0; i < s.dim(); ++i) {
    if (bounds.sigma_low_sq[i] > kPsdTol) {
      cert.i_star = i;
      break;
    }
  }
  if (cert.i_star < 0) {
    throw NoNondegenerateComponent(
        "NoNondegenerateComponent: every Brownian component has zero minimal variance; "
        "the control problem is ill-posed");
  }
  const int is = cert.i_star;
  cert.sigma_low_sq_istar = bounds.sigma_low_sq[is];
  cert.alpha = s.max_norm();
  const double lambda = (2.0 * cert.alpha + 1.0) / cert.sigma_low_sq_istar;
  for (int i = 0; i < s.dim(); ++i) {
    if (i == is) continue;
    double m = std::numeric_limits<double>::infinity();
    for (const Matrix& g : s.vertices()) {
      m = std::min(m, g(i, i) + 2.0 * lambda * g(i, is) + lambda * lambda * g(is, is));
    }
    if (!(m > 0.0)) {
      throw SolverError("shift certificate failed for component " + std::to_string(i + 1));
    }
    cert.lambda_for[i] = lambda;
    cert.shifted_form_min[i] = m;
  }
  return cert;
}

AmbiguitySet project_direction(const AmbiguitySet& s, const Vector& beta) {
  if (beta.size() != s.dim()) {
    throw DimensionError("direction has length " + std::to_string(beta.size()) +
                         ", expected " + std::to_string(s.dim()));
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Matrix& g : s.vertices()) {
    const double q = beta.dot(g * beta);
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  lo = std::max(lo, 0.0);
  if (hi - lo <= 0.0) return AmbiguitySet::scalar({hi});
  return AmbiguitySet::scalar({lo, hi});
}

}  // namespace gctl
