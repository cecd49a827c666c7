#include "gctl/errors.hpp"
#include "gctl/gheat.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace gctl;
using namespace gctl::test;

namespace {

const AmbiguitySet& degenerate_1d() {
  static const AmbiguitySet s = AmbiguitySet::scalar({0.0, 1.0});
  return s;
}

Expr payoff(const std::string& s, int dim = 1) { return parse_expr(s, Symbols{false, dim, 0, 0}); }

double value_at_origin(const ValueField& f) {
  const std::array<double, 2> zero{0.0, 0.0};
  return f.at(f.layers.size() - 1, std::span<const double>(zero.data(), static_cast<std::size_t>(f.grid.dim())));
}

// Random Lipschitz payoff built from bounded-slope pieces.
std::string lipschitz_payoff(Rng& rng) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.3f*sin(%.3f*x1) + %.3f*abs(x1 - %.3f) + %.3f*tanh(x1)", uniform(rng, -1, 1),
                uniform(rng, 0.2, 2), uniform(rng, -1, 1), uniform(rng, -2, 2), uniform(rng, -1, 1));
  return buf;
}

double mc_positive_part(std::size_t samples, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  double sum = 0.0;
  for (std::size_t k = 0; k < samples; ++k) sum += std::max(z(rng), 0.0);
  return sum / static_cast<double>(samples);
}

}  // namespace

TEST_SUITE("gheat") {

TEST_CASE("solve_gheat examples") {
  const AmbiguitySet& s = degenerate_1d();
  const GridSpec grid = default_heat_grid(s, 1.0, 0.01);
  CHECK(std::abs(value_at_origin(solve_gheat(s, payoff("0-x1^2"), 1.0, grid))) <= 2e-2);
  CHECK(std::abs(value_at_origin(solve_gheat(s, payoff("x1^2"), 1.0, grid)) - 1.0) <= 2e-2);
  const ValueField c = solve_gheat(s, payoff("5"), 1.0, grid);
  for (const auto& layer : c.layers) {
    for (double u : layer) REQUIRE(u == 5.0);
  }
}

TEST_CASE("quadratic payoffs follow the closed forms at every node") {
  const AmbiguitySet s = AmbiguitySet::scalar({0.25, 1.0});
  const GridSpec grid = default_heat_grid(s, 1.0, 0.05);
  const ValueField up = solve_gheat(s, payoff("x1^2"), 1.0, grid);
  const ValueField down = solve_gheat(s, payoff("0-x1^2"), 1.0, grid);
  for (std::size_t k = 0; k < up.layers.size(); ++k) {
    const double t = up.times[k];
    for (std::size_t node = 0; node < grid.node_count(); ++node) {
      const double x = grid.coord(0, static_cast<int>(node));
      REQUIRE(up.layers[k][node] == doctest::Approx(x * x + 1.0 * t).epsilon(1e-10).scale(1));
      REQUIRE(down.layers[k][node] == doctest::Approx(-x * x - 0.25 * t).epsilon(1e-10).scale(1));
    }
  }
}

TEST_CASE("g_expectation examples") {
  const double exact = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const double mc = mc_positive_part(2'000'000, 5);
  CHECK(mc == doctest::Approx(exact).epsilon(2e-3));
  for (double lower : {0.0, 0.3, 1.0}) {
    const AmbiguitySet s = AmbiguitySet::scalar({lower, 1.0});
    const double e = g_expectation(s, payoff("pos(x1)"), 1.0, default_heat_grid(s, 1.0, 0.01));
    CHECK(std::abs(e - exact) <= 5e-3);
    CHECK(std::abs(e - mc) <= 5e-3);
  }
  const AmbiguitySet wide = AmbiguitySet::scalar({0.5, 2.0});
  CHECK(std::abs(g_expectation(wide, payoff("x1"), 1.0, default_heat_grid(wide, 1.0, 0.02))) <= 1e-3);
  const AmbiguitySet& s = degenerate_1d();
  CHECK(std::abs(g_expectation(s, payoff("0-x1^2"), 1.0, default_heat_grid(s, 1.0, 0.01))) <= 2e-2);
}

TEST_CASE("g_expectation at intermediate times") {
  const AmbiguitySet& s = degenerate_1d();
  const GridSpec grid = default_heat_grid(s, 1.0, 0.02, 4);
  CHECK(g_expectation(s, payoff("x1^2"), 0.5, grid) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(g_expectation(s, payoff("x1^2"), 0.0, grid) == doctest::Approx(0.0).scale(1).epsilon(1e-12));
}

TEST_CASE("nested_expectation examples") {
  const AmbiguitySet& s = degenerate_1d();
  const GridSpec grid = default_heat_grid(s, 1.0, 0.02);
  const std::vector<double> times{0.5, 1.0};
  const NestedResult a = nested_expectation(s, parse_expr("y2^2", Symbols{false, 0, 0, 2}), times, grid);
  CHECK(std::abs(a.value - 0.5) <= 2e-2);
  const NestedResult b = nested_expectation(s, parse_expr("0-y1^2-y2^2", Symbols{false, 0, 0, 2}), times, grid);
  CHECK(std::abs(b.value) <= 3e-2);
  const NestedResult c = nested_expectation(s, parse_expr("3.5", Symbols{false, 0, 0, 2}), times, grid);
  CHECK(c.value == 3.5);
  const GridSpec coarse = default_heat_grid(s, 1.0, 0.1);
  const NestedResult d =
      nested_expectation(s, parse_expr("y1^2 + y3^2", Symbols{false, 0, 0, 3}), {0.25, 0.5, 1.0}, coarse);
  CHECK(std::abs(d.value - 0.75) <= 2e-2);
}

TEST_CASE("nested_expectation input errors") {
  const AmbiguitySet& s = degenerate_1d();
  const GridSpec grid = default_heat_grid(s, 1.0, 0.1);
  const Expr phi = parse_expr("y1", Symbols{false, 0, 0, 4});
  CHECK_THROWS_AS(nested_expectation(s, phi, {0.1, 0.2, 0.3, 0.4}, grid), ConfigError);
  CHECK_THROWS_AS(nested_expectation(s, phi, {0.5, 0.5}, grid), ConfigError);
  CHECK_THROWS_AS(nested_expectation(s, phi, {}, grid), ConfigError);
  const Expr three = parse_expr("y1 + y2 + y3", Symbols{false, 0, 0, 3});
  CHECK_THROWS_AS(nested_expectation(s, three, {0.1, 0.2, 0.3}, default_heat_grid(s, 1.0, 0.02)), ConfigError);
}

TEST_CASE("scheme monotonicity away from the boundary") {
  // T and h chosen so that the boundary cannot influence the checked nodes.
  const AmbiguitySet s = AmbiguitySet::scalar({0.2, 1.0});
  const GridSpec grid = default_heat_grid(s, 0.05, 0.1);
  const int steps = 10;  // dt <= h^2 / 2 with h = 0.1
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const std::string base = lipschitz_payoff(rng);
    char bump[128];
    std::snprintf(bump, sizeof bump, " + %.3f*pos(%.3f - abs(x1 - %.3f))", uniform(rng, 0, 2), uniform(rng, 0.1, 1),
                  uniform(rng, -2, 2));
    const ValueField lo = solve_gheat(s, payoff(base), 0.05, grid);
    const ValueField hi = solve_gheat(s, payoff(base + bump), 0.05, grid);
    for (std::size_t k = 0; k < lo.layers.size(); ++k) {
      for (int i = steps + 1; i < grid.nx[0] - steps - 1; ++i) {
        REQUIRE(lo.layers[k][static_cast<std::size_t>(i)] <= hi.layers[k][static_cast<std::size_t>(i)]);
      }
    }
  }
}

TEST_CASE("constants pass through") {
  const AmbiguitySet s = AmbiguitySet::scalar({0.1, 1.5});
  const GridSpec grid = default_heat_grid(s, 1.0, 0.05);
  Rng rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const std::string phi = lipschitz_payoff(rng);
    const double a = g_expectation(s, payoff(phi), 1.0, grid);
    const double b = g_expectation(s, payoff(phi + " + 7.25"), 1.0, grid);
    CHECK(std::abs(b - a - 7.25) <= 1e-10);
  }
}

TEST_CASE("sub-additivity at grid level") {
  const AmbiguitySet s = AmbiguitySet::scalar({0.0, 1.0});
  const GridSpec grid = default_heat_grid(s, 1.0, 0.05);
  Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const std::string phi = lipschitz_payoff(rng);
    const std::string psi = lipschitz_payoff(rng);
    const double sum = g_expectation(s, payoff("(" + phi + ") + (" + psi + ")"), 1.0, grid);
    CHECK(sum <= g_expectation(s, payoff(phi), 1.0, grid) + g_expectation(s, payoff(psi), 1.0, grid) + 5e-3);
  }
}

TEST_CASE("refinement: quadratic payoffs are exact, the kinked payoff converges") {
  const AmbiguitySet& s = degenerate_1d();
  for (double h : {0.1, 0.05, 0.025}) {
    const GridSpec grid = default_heat_grid(s, 1.0, h);
    CHECK(std::abs(g_expectation(s, payoff("x1^2"), 1.0, grid) - 1.0) <= 1e-9);
    CHECK(std::abs(g_expectation(s, payoff("0-x1^2"), 1.0, grid)) <= 1e-9);
  }
  const double exact = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  double prev = 0.0;
  for (double h : {0.2, 0.1, 0.05}) {
    const double err = std::abs(g_expectation(s, payoff("pos(x1)"), 1.0, default_heat_grid(s, 1.0, h)) - exact);
    if (prev > 0.0) CHECK(err <= 0.65 * prev);
    prev = err;
  }
}

TEST_CASE("two-dimensional solves") {
  const AmbiguitySet s = two_vertex_set();
  const GridSpec grid = default_heat_grid(s, 1.0, 0.1);
  // G(2I) = 2, G of the off-diagonal Hessian = 0
  CHECK(g_expectation(s, payoff("x1^2 + x2^2", 2), 1.0, grid) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(std::abs(g_expectation(s, payoff("x1*x2", 2), 1.0, grid)) <= 1e-9);
  CHECK(std::abs(g_expectation(s, payoff("0 - x2^2", 2), 1.0, grid)) <= 1e-9);

  const AmbiguitySet corr({Matrix::Identity(2, 2), (Matrix(2, 2) << 1.0, 0.5, 0.5, 1.0).finished()});
  // G([[0,1],[1,0]]) = max gamma_12 = 0.5
  CHECK(g_expectation(corr, payoff("x1*x2", 2), 1.0, default_heat_grid(corr, 1.0, 0.1)) ==
        doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("cross stencil needs diagonal dominance") {
  const AmbiguitySet s({(Matrix(2, 2) << 1.0, 1.5, 1.5, 4.0).finished()});
  CHECK_THROWS_AS(solve_gheat(s, payoff("x1*x2", 2), 1.0, default_heat_grid(s, 1.0, 0.2)), MonotonicityUnavailable);
}

TEST_CASE("directional solves use the projected variance bounds") {
  const AmbiguitySet s = two_vertex_set();
  const Vector beta = Eigen::Vector2d(1, 1);
  const AmbiguitySet p = project_direction(s, beta);
  const GridSpec grid = default_heat_grid(p, 1.0, 0.05);
  const ValueField up = solve_gheat_directional(s, beta, payoff("x1^2"), 1.0, grid);
  const ValueField down = solve_gheat_directional(s, beta, payoff("0-x1^2"), 1.0, grid);
  CHECK(value_at_origin(up) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(value_at_origin(down) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("default grid sizing") {
  const AmbiguitySet s = AmbiguitySet::scalar({0.0, 4.0});
  const GridSpec g = default_heat_grid(s, 1.0, 0.1);
  CHECK(g.hi[0] == doctest::Approx(12.0));
  CHECK(g.lo[0] == doctest::Approx(-12.0));
  CHECK(g.nx[0] % 2 == 1);
  CHECK(g.spacing(0) <= 0.1 + 1e-12);
}

TEST_CASE("error paths") {
  const AmbiguitySet& s = degenerate_1d();
  const GridSpec grid = default_heat_grid(s, 1.0, 0.01);
  HeatOptions tight;
  tight.max_steps = 100;
  CHECK_THROWS_AS(solve_gheat(s, payoff("x1"), 1.0, grid, tight), CflOverflow);
  CHECK_THROWS_AS(solve_gheat(s, payoff("1e308*x1^3"), 1.0, default_heat_grid(s, 1.0, 0.5)), SolverError);
  CHECK_THROWS_AS(solve_gheat(two_vertex_set(), payoff("x1"), 1.0, grid), DimensionError);
}

TEST_CASE("thread count does not change the result") {
  const AmbiguitySet s = two_vertex_set();
  const GridSpec grid = default_heat_grid(s, 0.5, 0.1);
  HeatOptions one;
  HeatOptions three;
  three.threads = 3;
  const ValueField a = solve_gheat(s, payoff("pos(x1 - x2) + sin(x2)", 2), 0.5, grid, one);
  const ValueField b = solve_gheat(s, payoff("pos(x1 - x2) + sin(x2)", 2), 0.5, grid, three);
  CHECK(a.layers == b.layers);
}

}  // TEST_SUITE
