#pragma once

#include <vector>

namespace gctl {

/// Gauss-Hermite rule for the standard normal weight, weights summing to 1.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub-Welsch: eigenvalues of the Jacobi matrix of the probabilists'
/// Hermite recurrence. Exact for polynomials of degree <= 2*count - 1.
GaussHermite gauss_hermite(int count);

}  // namespace gctl
