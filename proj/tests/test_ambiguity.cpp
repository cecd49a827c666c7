#include "gctl/ambiguity.hpp"
#include "gctl/errors.hpp"
#include "support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

using namespace gctl;
using namespace gctl::test;

namespace {

// Independent oracle: half the largest Frobenius pairing over the vertices.
double g_oracle(const AmbiguitySet& s, const Matrix& a) {
  double best = -1e300;
  for (const Matrix& v : s.vertices()) best = std::max(best, 0.5 * a.cwiseProduct(v).sum());
  return best;
}

// One-dimensional closed form 0.5 (upper * a^+ - lower * a^-).
double g_scalar(double upper, double lower, double a) {
  return 0.5 * (upper * std::max(a, 0.0) - lower * std::max(-a, 0.0));
}

}  // namespace

TEST_SUITE("ambiguity") {

TEST_CASE("g_eval examples") {
  const AmbiguitySet s = two_vertex_set();
  CHECK(g_eval(s, Matrix::Zero(2, 2)) == 0.0);
  CHECK(g_eval(s, Matrix::Identity(2, 2)) == doctest::Approx(1.0).epsilon(1e-15));
  const AmbiguitySet s1 = AmbiguitySet::scalar({0.0, 1.0});
  CHECK(g_eval(s1, mat1(-2.0)) == 0.0);
  CHECK(g_eval(s1, mat1(-2.0)) == g_scalar(1.0, 0.0, -2.0));
}

TEST_CASE("g_eval matches the scalar closed form") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const double lo = uniform(rng, 0.0, 2.0);
    const double hi = lo + uniform(rng, 0.0, 2.0);
    const double a = uniform(rng, -5.0, 5.0);
    const AmbiguitySet s = AmbiguitySet::scalar({lo, hi});
    CHECK(g_eval(s, mat1(a)) == doctest::Approx(g_scalar(hi, lo, a)).epsilon(1e-14));
  }
}

TEST_CASE("g_eval agrees with the vertex-pairing oracle and dominates the hull") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 3;
    const AmbiguitySet s = random_set(rng, d, 1 + trial % 4);
    const Matrix a = random_symmetric(rng, d, 3.0);
    const double g = g_eval(s, a);
    CHECK(g == doctest::Approx(g_oracle(s, a)).epsilon(1e-13));
    Matrix mix = Matrix::Zero(d, d);
    double total = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double w = uniform(rng, 0.0, 1.0);
      mix += w * s.vertex(k);
      total += w;
    }
    mix /= total;
    CHECK(0.5 * a.cwiseProduct(mix).sum() <= g + 1e-12);
  }
}

TEST_CASE("g_eval rejects bad arguments") {
  const AmbiguitySet s = two_vertex_set();
  CHECK_THROWS_AS(g_eval(s, Matrix::Identity(3, 3)), DimensionError);
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = 1e-9;
  CHECK_THROWS_AS(g_eval(s, a), ConfigError);
}

TEST_CASE("directional_g examples") {
  const AmbiguitySet s = two_vertex_set();
  CHECK(directional_g(s, Vector::Unit(2, 0), -3.0) == doctest::Approx(-1.5).epsilon(1e-15));
  CHECK(directional_g(s, Vector::Unit(2, 1), 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const AmbiguitySet r = random_set(rng, 3, 3);
    CHECK(directional_g(r, Vector::Random(3), 0.0) == 0.0);
  }
  CHECK_THROWS_AS(directional_g(s, Vector::Ones(3), 1.0), DimensionError);
}

TEST_CASE("component_bounds examples") {
  const ComponentBounds b = component_bounds(two_vertex_set());
  CHECK(b.sigma_bar_sq == Eigen::Vector2d(1, 1));
  CHECK(b.sigma_low_sq == Eigen::Vector2d(1, 0));
  const ComponentBounds id = component_bounds(AmbiguitySet({Matrix::Identity(3, 3)}));
  CHECK(id.sigma_bar_sq == Vector::Ones(3));
  CHECK(id.sigma_low_sq == Vector::Ones(3));
  const ComponentBounds sc = component_bounds(AmbiguitySet::scalar({1.0, 4.0}));
  CHECK(sc.sigma_bar_sq(0) == 4.0);
  CHECK(sc.sigma_low_sq(0) == 1.0);
}

TEST_CASE("component bounds equal the G characterization") {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 3;
    const AmbiguitySet s = random_set(rng, d, 3);
    const ComponentBounds b = component_bounds(s);
    for (int i = 0; i < d; ++i) {
      const Matrix e = Vector::Unit(d, i) * Vector::Unit(d, i).transpose();
      CHECK(b.sigma_bar_sq(i) == doctest::Approx(2.0 * g_eval(s, e)).epsilon(1e-14));
      CHECK(b.sigma_low_sq(i) == doctest::Approx(-2.0 * g_eval(s, -e)).epsilon(1e-14));
      CHECK(b.sigma_low_sq(i) <= b.sigma_bar_sq(i));
    }
  }
}

TEST_CASE("is_degenerate examples") {
  CHECK(is_degenerate(two_vertex_set()));
  CHECK_FALSE(is_degenerate(AmbiguitySet({Matrix::Identity(2, 2)})));
  CHECK(is_degenerate(AmbiguitySet::scalar({0.0, 1.0})));
}

TEST_CASE("check_h3 examples") {
  const H3Certificate c = check_h3(two_vertex_set());
  CHECK(c.i_star == 0);
  CHECK(c.alpha == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.sigma_low_sq_istar == 1.0);
  REQUIRE(c.lambda_for.count(1) == 1);
  CHECK(c.lambda_for.at(1) == doctest::Approx(3.0).epsilon(1e-14));
  // shifted forms 0 + 0 + 9 and 1 + 0 + 9
  CHECK(c.shifted_form_min.at(1) == doctest::Approx(9.0).epsilon(1e-14));

  const Matrix e1 = Eigen::Vector2d(1, 0).asDiagonal();
  const Matrix e2 = Eigen::Vector2d(0, 1).asDiagonal();
  CHECK_THROWS_AS(check_h3(AmbiguitySet({e1, e2})), NoNondegenerateComponent);

  const H3Certificate id = check_h3(AmbiguitySet({Matrix::Identity(2, 2)}));
  CHECK(id.i_star == 0);
  CHECK(id.lambda_for.at(1) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("check_h3 picks the smallest nondegenerate index") {
  const AmbiguitySet s({Matrix(Eigen::Vector3d(0, 2, 1).asDiagonal()), Matrix(Eigen::Vector3d(1, 3, 4).asDiagonal())});
  const H3Certificate c = check_h3(s);
  CHECK(c.i_star == 1);
  CHECK(c.sigma_low_sq_istar == 2.0);
  CHECK(c.alpha == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(c.lambda_for.at(0) == doctest::Approx(4.5).epsilon(1e-14));
  CHECK(c.lambda_for.at(2) == doctest::Approx(4.5).epsilon(1e-14));
}

TEST_CASE("certificate soundness on random sets") {
  Rng rng(15);
  int issued = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 3;
    const AmbiguitySet s = random_set(rng, d, 2 + trial % 3);
    H3Certificate c;
    try {
      c = check_h3(s);
    } catch (const NoNondegenerateComponent&) {
      const ComponentBounds b = component_bounds(s);
      CHECK(b.sigma_low_sq.maxCoeff() <= 1e-10);
      continue;
    }
    ++issued;
    const int is = c.i_star;
    CHECK(c.sigma_low_sq_istar > 0.0);
    double alpha = 0.0;
    for (const Matrix& v : s.vertices()) {
      alpha = std::max(alpha, Eigen::SelfAdjointEigenSolver<Matrix>(v).eigenvalues().cwiseAbs().maxCoeff());
    }
    CHECK(c.alpha == doctest::Approx(alpha).epsilon(1e-12));
    for (int i = 0; i < d; ++i) {
      if (i == is) continue;
      const double lambda = c.lambda_for.at(i);
      CHECK(lambda == doctest::Approx((2 * alpha + 1) / c.sigma_low_sq_istar).epsilon(1e-12));
      double lowest = 1e300;
      for (const Matrix& v : s.vertices()) {
        lowest = std::min(lowest, v(i, i) + 2 * lambda * v(i, is) + lambda * lambda * v(is, is));
      }
      CHECK(lowest > 0.0);
    }
  }
  CHECK(issued > 50);
}

TEST_CASE("sublinearity") {
  Rng rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 3;
    const AmbiguitySet s = random_set(rng, d, 3);
    const Matrix a = random_symmetric(rng, d, 2.0);
    const Matrix b = random_symmetric(rng, d, 2.0);
    CHECK(g_eval(s, a + b) <= g_eval(s, a) + g_eval(s, b) + 1e-12);
  }
}

TEST_CASE("positive homogeneity") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 3;
    const AmbiguitySet s = random_set(rng, d, 3);
    const Matrix a = random_symmetric(rng, d, 2.0);
    const double c = uniform(rng, 0.0, 10.0);
    const double lhs = g_eval(s, c * a);
    const double rhs = c * g_eval(s, a);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("monotonicity in the Loewner order") {
  Rng rng(18);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 3;
    const AmbiguitySet s = random_set(rng, d, 3);
    const Matrix a = random_symmetric(rng, d, 2.0);
    const Matrix b = a + random_psd(rng, d, 1 + trial % d);
    CHECK(g_eval(s, a) <= g_eval(s, b) + 1e-12);
  }
}

TEST_CASE("directional identity") {
  Rng rng(19);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 3;
    const AmbiguitySet s = random_set(rng, d, 3);
    Vector beta(d);
    for (int i = 0; i < d; ++i) beta(i) = uniform(rng, -2.0, 2.0);
    const double a = uniform(rng, -5.0, 5.0);
    const double lhs = directional_g(s, beta, a);
    const double rhs = g_eval(s, a * beta * beta.transpose());
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("project_direction gives the marginal variance bounds") {
  const AmbiguitySet s = two_vertex_set();
  const AmbiguitySet p = project_direction(s, Eigen::Vector2d(1, 1));
  CHECK(p.dim() == 1);
  const ComponentBounds b = component_bounds(p);
  CHECK(b.sigma_low_sq(0) == doctest::Approx(1.0));
  CHECK(b.sigma_bar_sq(0) == doctest::Approx(2.0));
}

TEST_CASE("psd_sqrt squares back and clips degenerate directions") {
  Rng rng(20);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 4;
    const Matrix a = random_psd(rng, d, trial % (d + 1));
    const Matrix r = psd_sqrt(a);
    CHECK((r - r.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((r * r - a).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, a.norm()));
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(r).eigenvalues().minCoeff() >= -1e-12);
  }
  CHECK(psd_sqrt(Matrix::Zero(2, 2)).isZero());
}

TEST_CASE("vertex validation") {
  Matrix ns = Matrix::Identity(2, 2);
  ns(0, 1) = 0.5;
  CHECK_THROWS_AS(AmbiguitySet({ns}), ConfigError);
  CHECK_THROWS_AS(AmbiguitySet({Matrix(Eigen::Vector2d(1, -1e-6).asDiagonal())}), ConfigError);
  CHECK_THROWS_AS(AmbiguitySet({Matrix::Identity(2, 2), Matrix::Identity(3, 3)}), DimensionError);
  CHECK_THROWS_AS(AmbiguitySet(std::vector<Matrix>{}), ConfigError);
  CHECK_NOTHROW(AmbiguitySet({Matrix(Eigen::Vector2d(1, -1e-11).asDiagonal())}));
}

}  // TEST_SUITE
