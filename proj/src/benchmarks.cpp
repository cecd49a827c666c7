#include "gctl/benchmarks.hpp"

#include "gctl/errors.hpp"
#include "gctl/hjb.hpp"
#include "gctl/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace gctl {

namespace {

// Every builtin has one state variable driven by B^2, whose variance rate is
// uncertain in [0, 1]; B^1 has unit variance and carries the non-degenerate
// component required at load time.
std::string builtin_config(const std::string& name, const std::string& controls, const std::string& b,
                           const std::string& sigma2, const std::string& f, const std::string& g22,
                           const std::string& phi) {
  return R"({
  "name": ")" + name + R"(",
  "state_dim": 1, "brownian_dim": 2, "control_dim": 1, "horizon": 1.0,
  "ambiguity": {"vertices": [[[1, 0], [0, 0]], [[1, 0], [0, 1]]]},
  "control_set": )" + controls + R"(,
  "coefficients": {
    "b": [")" + b + R"("],
    "sigma": [["0", ")" + sigma2 + R"("]],
    "f": ")" + f + R"(",
    "g": {"22": ")" + g22 + R"("},
    "phi": ")" + phi + R"("
  },
  "grid": {"x_lo": [-12], "x_hi": [12], "nx": [481], "nt": 100}
})";
}

BenchmarkEntry make_entry(std::string name, std::string description, std::string closed_form, std::string provenance,
                          std::string config, double tolerance, double probe) {
  LoadedProblem loaded = load_problem_text(config);
  BenchmarkEntry e{std::move(name), std::move(description), std::move(closed_form), std::move(provenance),
                   std::move(config), std::move(loaded), Expr(), tolerance, Vector::Constant(1, probe)};
  e.closed_form = parse_expr(e.closed_form_text, Symbols{true, e.loaded.problem.n, 0, 0});
  e.loaded.closed_form = e.closed_form;
  return e;
}

std::vector<BenchmarkEntry> build_registry() {
  const std::string zero_control = R"({"type": "finite", "points": [[0]]})";
  std::vector<BenchmarkEntry> reg;
  reg.push_back(make_entry(
      "DRIFT-LINEAR", "controlled drift v in [-1, 1], linear payoff", "x1 - (1 - t)",
      "V_x = 1 so the drift is pushed to v = -1 and the diffusion term vanishes",
      builtin_config("DRIFT-LINEAR", R"({"type": "box", "lo": [-1], "hi": [1], "counts": [21]})", "v1", "1", "0", "0",
                     "x1"),
      1e-2, 0.0));
  reg.push_back(make_entry(
      "DEGEN-VOL", "controlled volatility v in [1, 2] with concave payoff; degenerate lower variance",
      "0 - x1^2", "G(-2 v^2) = 0 when the lower variance bound is zero, so V stays at Phi",
      builtin_config("DEGEN-VOL", R"({"type": "box", "lo": [1], "hi": [2], "counts": [11]})", "0", "v1", "0", "0",
                     "0 - x1^2"),
      2e-2, 1.0));
  reg.push_back(make_entry(
      "RUNCOST", "drift v in [-1, 1] with running cost v^2", "x1 - 0.25*(1 - t)",
      "pointwise min of v + v^2 is -1/4 at v = -1/2",
      builtin_config("RUNCOST", R"({"type": "box", "lo": [-1], "hi": [1], "counts": [41]})", "v1", "1", "v1^2", "0",
                     "x1"),
      1e-2, 0.0));
  reg.push_back(make_entry(
      "QV-COST", "running cost on the quadratic variation of B^2", "1 - t",
      "d_t V + G(2 e2 e2^T) = 0 gives V = upper variance * (T - t)",
      builtin_config("QV-COST", zero_control, "0", "0", "0", "1", "0"), 1e-3, 0.0));
  reg.push_back(make_entry(
      "GHEAT-CONVEX", "G-expectation of the positive part; convex payoff selects the upper variance",
      "x1*0.5*(1 + erf(x1/sqrt(2*(1 - t)))) + sqrt((1 - t)/(2*3.141592653589793))*exp(0 - x1^2/(2*(1 - t)))",
      "the heat equation with unit variance, solved in closed form with the normal CDF",
      builtin_config("GHEAT-CONVEX", zero_control, "0", "1", "0", "0", "pos(x1)"), 2e-2, 0.0));
  reg.push_back(make_entry(
      "DEGEN-GHEAT", "G-expectation of -B^2; concave payoff selects the zero variance", "0 - x1^2",
      "G(-2) = 0 when the lower variance bound is zero",
      builtin_config("DEGEN-GHEAT", zero_control, "0", "1", "0", "0", "0 - x1^2"), 2e-2, 0.0));

  for (const BenchmarkEntry& e : reg) {
    const double r = max_closed_form_residual(e);
    if (!(r <= 1e-8)) {
      throw NumericalError("builtin " + e.name + " fails closed-form self-validation: HJB residual " +
                           std::to_string(r));
    }
  }
  return reg;
}

std::string normalize(std::string_view s) {
  std::string out;
  for (char c : s) {
    const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    out.push_back(u == '_' ? '-' : u);
  }
  return out;
}

}  // namespace

const std::vector<BenchmarkEntry>& builtin_registry() {
  static const std::vector<BenchmarkEntry> reg = build_registry();
  return reg;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

const BenchmarkEntry& find_builtin(std::string_view name) {
  const std::string key = normalize(name);
  const auto& reg = builtin_registry();
  std::size_t best = std::numeric_limits<std::size_t>::max();
  std::string suggestion;
  for (const BenchmarkEntry& e : reg) {
    if (e.name == key) return e;
    const std::size_t dist = edit_distance(key, e.name);
    if (dist < best) {
      best = dist;
      suggestion = e.name;
    }
  }
  throw UnknownBuiltin(std::string(name), suggestion);
}

double closed_form_residual(const BenchmarkEntry& entry, double t, const Vector& x) {
  const ControlProblem& p = entry.loaded.problem;
  const int n = p.n;
  const std::span<const double> xs(x.data(), static_cast<std::size_t>(n));
  const EvalPoint at{t, xs, {}, {}};
  HamiltonianInputs in;
  in.t = t;
  in.x = x;
  in.p.resize(n);
  in.A.resize(n, n);
  for (int i = 0; i < n; ++i) {
    const Expr di = entry.closed_form.derivative(VarKind::State, i);
    in.p(i) = di.eval(at);
    for (int j = 0; j < n; ++j) in.A(i, j) = di.derivative(VarKind::State, j).eval(at);
  }
  in.A = (0.5 * (in.A + in.A.transpose())).eval();
  const double v_t = entry.closed_form.derivative(VarKind::Time).eval(at);
  double best = std::numeric_limits<double>::infinity();
  for (const Vector& v : discretize_controls(p.controls)) {
    in.v = v;
    best = std::min(best, hamiltonian(p, entry.loaded.ambiguity, in));
  }
  return v_t + best;
}

double max_closed_form_residual(const BenchmarkEntry& entry, int samples, std::uint64_t seed) {
  const GridSpec& g = entry.loaded.grid;
  const int n = entry.loaded.problem.n;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const auto us = static_cast<std::uint64_t>(s);
    const double t = 0.9 * entry.loaded.problem.horizon * to_unit(counter_hash(seed, us, 0, 0));
    Vector x(n);
    for (int i = 0; i < n; ++i) {
      const double q = 0.25 * (g.hi[i] - g.lo[i]);
      x(i) = g.lo[i] + q + 2.0 * q * to_unit(counter_hash(seed, us, 1, static_cast<std::uint64_t>(i)));
    }
    worst = std::max(worst, std::abs(closed_form_residual(entry, t, x)));
  }
  return worst;
}

}  // namespace gctl
