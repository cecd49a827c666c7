#include "gctl/benchmarks.hpp"
#include "gctl/errors.hpp"
#include "gctl/expr.hpp"
#include "gctl/problem.hpp"
#include "support.hpp"

#include <doctest.h>

#include <array>

using namespace gctl;
using namespace gctl::test;

namespace {

double at(const Expr& e, double t, std::vector<double> x = {}, std::vector<double> v = {}) {
  return e(t, x, v);
}

std::size_t error_offset(const std::string& src, int n = 2, int m = 1) {
  try {
    parse_expr(src, n, m);
  } catch (const ParseError& e) {
    return e.offset();
  }
  return std::string::npos;
}

// Random sentence of the expression grammar.
std::string sentence(Rng& rng, int depth) {
  static const std::array<const char*, 6> idents{"t", "x1", "x2", "v1", "2.5", "1e-3"};
  static const std::array<const char*, 11> unary{"abs", "exp", "log", "sqrt", "sin", "cos",
                                                 "tanh", "pos", "neg", "erf", "abs"};
  const int pick = depth <= 0 ? 0 : static_cast<int>(rng() % 7);
  switch (pick) {
    case 0: return idents[rng() % idents.size()];
    case 1: return sentence(rng, depth - 1) + " + " + sentence(rng, depth - 1);
    case 2: return sentence(rng, depth - 1) + "-" + sentence(rng, depth - 1);
    case 3: return sentence(rng, depth - 1) + (rng() % 2 ? "*" : "/") + sentence(rng, depth - 1);
    case 4: return "-(" + sentence(rng, depth - 1) + ")^" + sentence(rng, 0);
    case 5: return std::string(unary[rng() % unary.size()]) + "(" + sentence(rng, depth - 1) + ")";
    default:
      return std::string(rng() % 2 ? "max(" : "min(") + sentence(rng, depth - 1) + ", " + sentence(rng, depth - 1) +
             (rng() % 2 ? ", " + sentence(rng, 0) : "") + ")";
  }
}


// Random smooth expression: no kinks, no restricted domains.
std::string smooth_sentence(Rng& rng, int depth) {
  static const std::array<const char*, 5> leaves{"t", "x1", "x2", "v1", "0.7"};
  static const std::array<const char*, 5> funcs{"exp", "sin", "cos", "tanh", "erf"};
  const int pick = depth <= 0 ? 0 : static_cast<int>(rng() % 6);
  switch (pick) {
    case 0: return leaves[rng() % leaves.size()];
    case 1: return "(" + smooth_sentence(rng, depth - 1) + " + " + smooth_sentence(rng, depth - 1) + ")";
    case 2: return "(" + smooth_sentence(rng, depth - 1) + " - " + smooth_sentence(rng, depth - 1) + ")";
    case 3: return "(" + smooth_sentence(rng, depth - 1) + " * " + smooth_sentence(rng, depth - 1) + ")";
    case 4: return "(" + smooth_sentence(rng, depth - 1) + ")^" + std::to_string(2 + rng() % 2);
    default: return std::string(funcs[rng() % funcs.size()]) + "(" + smooth_sentence(rng, depth - 1) + ")";
  }
}
}  // namespace

TEST_SUITE("problem") {

TEST_CASE("parse_expr examples") {
  CHECK(at(ex("2+3*4"), 0.3, {0.1}, {0.2}) == 14.0);
  CHECK(at(ex("x1^2 + max(v1, 0)"), 0.0, {2.0}, {-1.0}) == 4.0);
  CHECK_THROWS_AS(parse_expr("x3", 2, 1), UnknownIdentifier);
}

TEST_CASE("eval_expr examples") {
  CHECK(at(ex("pos(x1)"), 0.0, {-2.0}) == 0.0);
  CHECK(at(ex("neg(x1)"), 0.0, {-2.0}) == 2.0);
  CHECK(at(ex("exp(0)*t"), 0.5, {0.0}) == 0.5);
}

TEST_CASE("precedence and associativity") {
  CHECK(at(ex("2^3^2"), 0) == 512.0);
  CHECK(at(ex("-2^2"), 0) == -4.0);
  CHECK(at(ex("2^-1"), 0) == 0.5);
  CHECK(at(ex("8/4/2"), 0) == 1.0);
  CHECK(at(ex("2-3-4"), 0) == -5.0);
  CHECK(at(ex("2*3^2"), 0) == 18.0);
  CHECK(at(ex("(2+3)*4"), 0) == 20.0);
  CHECK(at(ex("1 - -1"), 0) == 2.0);
  CHECK(at(ex("max(1, 5, 3) + min(4, -2)"), 0) == 3.0);
  CHECK(at(ex("pos(0-3) + neg(0-3) + pos(3) + neg(3)"), 0) == 6.0);
  CHECK(at(ex("1.5e2 + .5"), 0) == 150.5);
  CHECK(at(ex("abs(x1) + sqrt(4) + tanh(0) + sin(0) + cos(0) + log(exp(2))"), 0, {-3.0}) == 8.0);
  CHECK(at(ex("erf(0)"), 0) == 0.0);
}

TEST_CASE("located parse errors") {
  CHECK(error_offset("2+*3") == 2);
  CHECK(error_offset("x3") == 0);
  CHECK(error_offset("1 + v2") == 4);
  CHECK(error_offset("max(1)") == 0);
  CHECK(error_offset("abs(1, 2)") == 0);
  CHECK(error_offset("foo(1)") == 0);
  CHECK(error_offset("(1 + 2") == 6);
  CHECK(error_offset("1 $ 2") == 2);
  CHECK(error_offset("") == 0);
  CHECK(error_offset("3 4") == 2);
  CHECK(error_offset("exp") == 0);
  CHECK(error_offset("--1") == 1);
  CHECK_THROWS_AS(parse_expr("exp", 1, 1), SyntaxError);
  CHECK_THROWS_AS(parse_expr("max(1)", 1, 1), ArityError);
  CHECK_THROWS_AS(parse_expr("exp(1, 2)", 1, 1), ArityError);
  CHECK_THROWS_AS(parse_expr("1 +", 1, 1), SyntaxError);
  CHECK_THROWS_AS(parse_expr("y1", 1, 1), UnknownIdentifier);
  CHECK_THROWS_AS(parse_expr("x0", 1, 1), UnknownIdentifier);
  CHECK_NOTHROW(parse_expr("y1 + y2", Symbols{false, 0, 0, 2}));
  CHECK_THROWS_AS(parse_expr("t", Symbols{false, 1, 0, 0}), UnknownIdentifier);
}

TEST_CASE("located evaluation errors") {
  const Expr lg = ex("1 + log(x1)");
  try {
    at(lg, 0, {0.0});
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(e.offset() == 4);
  }
  const Expr dz = ex("1/(x1-x1)");
  try {
    at(dz, 0, {2.0});
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(e.offset() == 1);
  }
  CHECK_THROWS_AS(at(ex("sqrt(x1)"), 0, {-1.0}), DomainError);
}

TEST_CASE("print round trip is structural") {
  Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::string s = sentence(rng, 1 + trial % 5);
    INFO(s);
    const Expr a = parse_expr(s, 2, 1);
    INFO(a.print());
    const Expr b = parse_expr(a.print(), 2, 1);
    CHECK(a == b);
    CHECK(a.print() == b.print());
  }
}

TEST_CASE("symbolic derivatives agree with central differences") {
  Rng rng(33);
  int compared = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const std::string src = smooth_sentence(rng, 1 + trial % 4);
    INFO(src);
    const Expr e = parse_expr(src, 2, 1);
    const double t = uniform(rng, -1, 1);
    std::vector<double> x{uniform(rng, -1, 1), uniform(rng, -1, 1)};
    std::vector<double> v{uniform(rng, -1, 1)};
    constexpr double step = 1e-5;
    auto check = [&](VarKind kind, int index, double& slot) {
      const Expr d = e.derivative(kind, index);
      const double saved = slot;
      slot = saved + step;
      const double up = at(e, t, x, v);
      slot = saved - step;
      const double down = at(e, t, x, v);
      slot = saved;
      const double fd = (up - down) / (2 * step);
      CHECK(std::abs(at(d, t, x, v) - fd) <= 1e-6 * (1 + std::abs(fd)));
      ++compared;
    };
    check(VarKind::State, 0, x[0]);
    check(VarKind::State, 1, x[1]);
    check(VarKind::Control, 0, v[0]);
    const double fd = (at(e, t + step, x, v) - at(e, t - step, x, v)) / (2 * step);
    CHECK(std::abs(at(e.derivative(VarKind::Time), t, x, v) - fd) <= 1e-6 * (1 + std::abs(fd)));
  }
  CHECK(compared == 1200);
}

TEST_CASE("fuzzing returns an AST or a located error") {
  static const std::array<const char*, 24> tokens{"1",  "2.5", "x1", "x2", "x9", "v1", "t",   "+",
                                                  "-",  "*",   "/",  "^",  "(",  ")",  ",",   "max",
                                                  "pos", "log", "e",  "1e", ".",  "$",  " ",   "abs"};
  Rng rng(32);
  int parsed = 0;
  int rejected = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    std::string s;
    const int len = static_cast<int>(rng() % 12);
    for (int k = 0; k < len; ++k) s += tokens[rng() % tokens.size()];
    try {
      const Expr e = parse_expr(s, 2, 1);
      ++parsed;
      try {
        at(e, 0.5, {0.3, -0.7}, {0.1});
      } catch (const DomainError&) {
      }
    } catch (const ParseError& e) {
      CHECK(e.offset() <= s.size());
      ++rejected;
    }
  }
  CHECK(parsed > 100);
  CHECK(rejected > 100);
}

TEST_CASE("deep nesting is rejected, not a crash") {
  CHECK_THROWS_AS(parse_expr(std::string(100000, '(') + "1" + std::string(100000, ')'), 1, 1), SyntaxError);
}

TEST_CASE("discretize_controls examples") {
  const auto a = discretize_controls(ControlSet::box(Vector::Constant(1, -1), Vector::Constant(1, 1), {3}));
  REQUIRE(a.size() == 3);
  CHECK(a[0](0) == -1.0);
  CHECK(a[1](0) == 0.0);
  CHECK(a[2](0) == 1.0);
  const auto b = discretize_controls(ControlSet::box(Vector::Constant(1, 0), Vector::Constant(1, 2), {1}));
  REQUIRE(b.size() == 1);
  CHECK(b[0](0) == 1.0);
  const auto c = discretize_controls(ControlSet::finite({Vector::Constant(1, 1), Vector::Constant(1, 2)}));
  REQUIRE(c.size() == 2);
  CHECK(c[0](0) == 1.0);
  CHECK(c[1](0) == 2.0);
}

TEST_CASE("box discretization is lexicographic and covers the box") {
  Rng rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + trial % 3;
    Vector lo(m), hi(m);
    std::vector<int> counts(static_cast<std::size_t>(m));
    double max_spacing = 0.0;
    for (int i = 0; i < m; ++i) {
      lo(i) = uniform(rng, -3, 1);
      hi(i) = lo(i) + uniform(rng, 0, 3);
      counts[static_cast<std::size_t>(i)] = 1 + static_cast<int>(rng() % 6);
      const int c = counts[static_cast<std::size_t>(i)];
      max_spacing = std::max(max_spacing, c == 1 ? hi(i) - lo(i) : (hi(i) - lo(i)) / (c - 1));
    }
    const ControlSet cs = ControlSet::box(lo, hi, counts);
    const auto pts = discretize_controls(cs);
    std::size_t expected = 1;
    for (int c : counts) expected *= static_cast<std::size_t>(c);
    REQUIRE(pts.size() == expected);
    for (const Vector& p : pts) CHECK(cs.contains(p));
    for (std::size_t k = 1; k < pts.size(); ++k) {
      CHECK(std::lexicographical_compare(pts[k - 1].data(), pts[k - 1].data() + m, pts[k].data(), pts[k].data() + m));
    }
    for (int probe = 0; probe < 50; ++probe) {
      Vector u(m);
      for (int i = 0; i < m; ++i) u(i) = uniform(rng, lo(i), hi(i));
      double nearest = 1e300;
      for (const Vector& p : pts) nearest = std::min(nearest, (p - u).cwiseAbs().maxCoeff());
      CHECK(nearest <= 0.5 * max_spacing + 1e-12);
    }
  }
}

TEST_CASE("control set validation") {
  CHECK_THROWS_AS(ControlSet::box(Vector::Constant(1, 1), Vector::Constant(1, 0), {2}), ConfigError);
  CHECK_THROWS_AS(ControlSet::box(Vector::Constant(1, 0), Vector::Constant(1, 1), {0}), ConfigError);
  CHECK_THROWS_AS(ControlSet::finite({}), ConfigError);
}

TEST_CASE("load_problem examples") {
  const LoadedProblem& lp = find_builtin("drift-linear").loaded;
  CHECK(lp.problem.n == 1);
  CHECK(lp.problem.m == 1);
  CHECK(lp.problem.d == 2);
  CHECK(lp.certificate.i_star == 0);

  std::string cfg = find_builtin("QV-COST").config_json;
  const std::string upper = R"("g": {"22": "1"})";
  REQUIRE(cfg.find(upper) != std::string::npos);
  std::string lower = cfg;
  lower.replace(lower.find(upper), upper.size(), R"("g": {"22": "1", "21": "1"})");
  CHECK_THROWS_AS(load_problem_text(lower), ConfigError);

  std::string singular = cfg;
  const std::string verts = R"([[[1, 0], [0, 0]], [[1, 0], [0, 1]]])";
  REQUIRE(singular.find(verts) != std::string::npos);
  singular.replace(singular.find(verts), verts.size(), R"([[[1, 0], [0, 0]], [[0, 0], [0, 1]]])");
  CHECK_THROWS_AS(load_problem_text(singular), NoNondegenerateComponent);
}

TEST_CASE("config schema errors") {
  const std::string base = find_builtin("DRIFT-LINEAR").config_json;
  auto edit = [&](const std::string& from, const std::string& to) {
    std::string s = base;
    REQUIRE(s.find(from) != std::string::npos);
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  CHECK_THROWS_AS(load_problem_text("{"), ConfigError);
  CHECK_THROWS_AS(load_problem_text("[]"), ConfigError);
  CHECK_THROWS_AS(load_problem_text(edit(R"("horizon": 1.0)", R"("horizon": -1)")), ConfigError);
  CHECK_THROWS_AS(load_problem_text(edit(R"("b": ["v1"])", R"("b": ["v1", "v1"])")), ConfigError);
  CHECK_THROWS_AS(load_problem_text(edit(R"("b": ["v1"])", R"("b": ["v2"])")), UnknownIdentifier);
  CHECK_THROWS_AS(load_problem_text(edit(R"("phi": "x1")", R"("phi": "x1 +")")), SyntaxError);
  CHECK_THROWS_AS(load_problem_text(edit(R"("phi": "x1")", R"("phi": "v1")")), UnknownIdentifier);
  CHECK_THROWS_AS(load_problem_text(edit(R"("nx": [481])", R"("nx": [2])")), ConfigError);
  CHECK_THROWS_AS(load_problem_text(edit(R"("type": "box")", R"("type": "ball")")), ConfigError);
  CHECK_NOTHROW(load_problem_text(edit(R"("horizon": 1.0)", R"("horizon": 1.0, "comment": "ignored")")));
}

TEST_CASE("h and g are stored once per unordered pair") {
  const LoadedProblem& lp = find_builtin("QV-COST").loaded;
  const ControlProblem& p = lp.problem;
  CHECK(p.g.size() == 3);
  const std::array<double, 1> x{0.3};
  const std::array<double, 1> v{0.0};
  const Coefficients c = p.evaluate(0.0, x, v);
  CHECK(c.g(1, 1) == 1.0);
  CHECK(c.g(0, 1) == c.g(1, 0));
  CHECK(ControlProblem::pair_index(0, 1, 3) == ControlProblem::pair_index(1, 0, 3));
}

TEST_CASE("Lipschitz spot check") {
  const LoadedProblem& lp = find_builtin("DRIFT-LINEAR").loaded;
  const LipschitzReport r = spot_check_lipschitz(lp.problem, lp.grid);
  CHECK(std::isfinite(r.ratio_b));
  CHECK(r.ratio_b <= 1.0 + 1e-9);
  CHECK(r.warnings.empty());

  ControlProblem cubic = lp.problem;
  cubic.b[0] = ex("x1^3");
  const LipschitzReport rc = spot_check_lipschitz(cubic, lp.grid);
  CHECK(std::isfinite(rc.ratio_far));
  CHECK(rc.ratio_far > rc.ratio_near);
  CHECK_FALSE(rc.warnings.empty());
}

}  // TEST_SUITE
