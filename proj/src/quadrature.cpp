#include "gctl/quadrature.hpp"

#include "gctl/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gctl {

GaussHermite gauss_hermite(int count) {
  if (count < 1 || count > 64) throw ConfigError("Gauss-Hermite node count must be in [1, 64]");
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(count, count);
  for (int k = 1; k < count; ++k) {
    jac(k - 1, k) = jac(k, k - 1) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  GaussHermite rule;
  for (int k = 0; k < count; ++k) {
    rule.nodes.push_back(es.eigenvalues()[k]);
    const double v0 = es.eigenvectors()(0, k);
    rule.weights.push_back(v0 * v0);
  }
  // symmetrise: the rule is exactly symmetric about 0
  for (int k = 0; k < count / 2; ++k) {
    const auto a = static_cast<std::size_t>(k);
    const auto b = static_cast<std::size_t>(count - 1 - k);
    const double x = 0.5 * (rule.nodes[b] - rule.nodes[a]);
    const double w = 0.5 * (rule.weights[a] + rule.weights[b]);
    rule.nodes[a] = -x;
    rule.nodes[b] = x;
    rule.weights[a] = rule.weights[b] = w;
  }
  if (count % 2 == 1) rule.nodes[static_cast<std::size_t>(count / 2)] = 0.0;
  const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (double& w : rule.weights) w /= total;
  return rule;
}

}  // namespace gctl
