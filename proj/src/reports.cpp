#include "gctl/reports.hpp"

#include "gctl/dpp.hpp"
#include "gctl/errors.hpp"
#include "gctl/gsde.hpp"
#include "gctl/hjb.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace gctl {

namespace {

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

RegularityMetrics regularity_report(const ValueField& v) {
  const GridSpec& g = v.grid;
  const auto dim = static_cast<std::size_t>(g.dim());
  RegularityMetrics out;
  std::array<double, 2> x{};
  std::array<double, 2> y{};
  for (std::size_t k = 0; k < v.layers.size(); ++k) {
    const auto& layer = v.layers[k];
    for (std::size_t node = 0; node < g.node_count(); ++node) {
      if (!g.in_central(node)) continue;
      const auto ij = g.unflatten(node);
      g.node(node, std::span<double>(x.data(), dim));
      for (int axis = 0; axis < g.dim(); ++axis) {
        for (int s = 1; s < g.nx[axis]; s *= 2) {
          std::array<int, 2> o = ij;
          o[static_cast<std::size_t>(axis)] += s;
          if (o[static_cast<std::size_t>(axis)] >= g.nx[axis]) break;
          const std::size_t other = g.flatten(o[0], o[1]);
          if (!g.in_central(other)) break;
          g.node(other, std::span<double>(y.data(), dim));
          const double dist = s * g.spacing(axis);
          const double scale = (1.0 + norm2({x.data(), dim}) + norm2({y.data(), dim})) * dist;
          out.space_ratio = std::max(out.space_ratio, std::abs(layer[node] - layer[other]) / scale);
        }
      }
    }
  }
  for (std::size_t node = 0; node < g.node_count(); ++node) {
    if (!g.in_central(node)) continue;
    g.node(node, std::span<double>(x.data(), dim));
    const double r = norm2({x.data(), dim});
    for (std::size_t s = 1; s < v.layers.size(); s *= 2) {
      for (std::size_t k = 0; k + s < v.layers.size(); ++k) {
        const double dt = v.times[k + s] - v.times[k];
        const double diff = std::abs(v.layers[k][node] - v.layers[k + s][node]);
        out.time_ratio = std::max(out.time_ratio, diff / ((1.0 + r * r) * std::sqrt(dt)));
      }
    }
  }
  return out;
}

RegularityComparison compare_regularity(const RegularityMetrics& coarse, const RegularityMetrics& fine, double floor) {
  RegularityComparison c{coarse, fine, 0.0, 0.0, false};
  auto growth = [floor](double a, double b) {
    if (b <= floor) return 0.0;
    return b / std::max(a, floor) - 1.0;
  };
  c.space_growth = growth(coarse.space_ratio, fine.space_ratio);
  c.time_growth = growth(coarse.time_ratio, fine.time_ratio);
  c.passed = c.space_growth <= 0.5 && c.time_growth <= 0.5;
  return c;
}

Suite parse_suite(const std::string& name) {
  if (name == "regularity") return Suite::Regularity;
  if (name == "moments") return Suite::Moments;
  if (name == "dpp") return Suite::Dpp;
  if (name == "all") return Suite::All;
  throw ConfigError("unknown check suite '" + name + "' (expected regularity, moments, dpp or all)");
}

std::string error_type_name(const std::exception& e) {
  if (dynamic_cast<const NoNondegenerateComponent*>(&e)) return "NoNondegenerateComponent";
  if (dynamic_cast<const UnknownBuiltin*>(&e)) return "UnknownBuiltin";
  if (dynamic_cast<const SyntaxError*>(&e)) return "SyntaxError";
  if (dynamic_cast<const UnknownIdentifier*>(&e)) return "UnknownIdentifier";
  if (dynamic_cast<const ArityError*>(&e)) return "ArityError";
  if (dynamic_cast<const DimensionError*>(&e)) return "DimensionError";
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  if (dynamic_cast<const DomainEscape*>(&e)) return "DomainEscape";
  if (dynamic_cast<const MonotonicityUnavailable*>(&e)) return "MonotonicityUnavailable";
  if (dynamic_cast<const CflOverflow*>(&e)) return "CflOverflow";
  if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
  if (dynamic_cast<const SolverError*>(&e)) return "SolverError";
  return "Error";
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const SolverError*>(&e)) return 3;
  return 1;
}

CheckReport error_report(const std::string& config_name, const std::string& suite, const std::exception& e) {
  CheckReport r;
  r.config_name = config_name;
  r.suite = suite;
  r.status = "error";
  r.exit_code = exit_code_for(e);
  r.error_type = error_type_name(e);
  r.error_message = e.what();
  return r;
}

namespace {

constexpr double kNoBound = std::numeric_limits<double>::quiet_NaN();

CheckItem item(std::string suite, std::string name, double value, double bound, std::string relation,
               std::string detail = {}) {
  const bool ok = relation == "finite" ? std::isfinite(value) : relation == "<=" ? value <= bound : value >= bound;
  return CheckItem{std::move(suite), std::move(name), value, bound, std::move(relation), ok, std::move(detail)};
}

// sup over a dense sample of the central region of |interpolated layer - reference(t, x)|
double dense_central_error(const GridSpec& g, std::span<const double> layer, const Expr& reference, double t,
                           int per_axis) {
  const auto dim = static_cast<std::size_t>(g.dim());
  std::array<double, 2> x{};
  double worst = 0.0;
  const int n1 = g.dim() > 1 ? per_axis : 1;
  for (int j = 0; j < n1; ++j) {
    for (int i = 0; i < per_axis; ++i) {
      const int idx[2] = {i, j};
      for (std::size_t a = 0; a < dim; ++a) {
        const double q = 0.25 * (g.hi[a] - g.lo[a]);
        x[a] = g.lo[a] + q + 2.0 * q * idx[a] / (per_axis - 1);
      }
      const std::span<const double> xs(x.data(), dim);
      worst = std::max(worst, std::abs(interpolate(g, layer, xs) - reference.eval(EvalPoint{t, xs, {}, {}})));
    }
  }
  return worst;
}

void regularity_checks(const LoadedProblem& lp, const std::vector<Vector>& controls, const CheckOptions& opts,
                       std::vector<CheckItem>& out) {
  HjbOptions ho;
  ho.threads = opts.threads;
  const RegularityMetrics coarse = regularity_report(solve_hjb(lp.problem, lp.ambiguity, lp.grid, controls, ho));
  const RegularityMetrics fine =
      regularity_report(solve_hjb(lp.problem, lp.ambiguity, lp.grid.refined(), controls, ho));
  const RegularityComparison c = compare_regularity(coarse, fine);
  out.push_back(item("regularity", "space_ratio_growth", c.space_growth, 0.5, "<=",
                     "space ratio " + std::to_string(coarse.space_ratio) + " -> " + std::to_string(fine.space_ratio)));
  out.push_back(item("regularity", "time_ratio_growth", c.time_growth, 0.5, "<=",
                     "time ratio " + std::to_string(coarse.time_ratio) + " -> " + std::to_string(fine.time_ratio)));
}

void moment_checks(const LoadedProblem& lp, const std::vector<Vector>& controls, const CheckOptions& opts,
                   std::vector<CheckItem>& out) {
  const double T = lp.problem.horizon;
  const std::vector<double> deltas{0.4 * T, 0.2 * T, 0.1 * T, 0.05 * T};
  Vector x0(lp.problem.n);
  for (int i = 0; i < lp.problem.n; ++i) x0(i) = 0.5 * (lp.grid.lo[i] + lp.grid.hi[i]);
  const MomentReport rep =
      moment_check(lp.problem, lp.ambiguity, x0, deltas, opts.paths, opts.seed, constant_control(controls.front()),
                   64, opts.threads);
  if (rep.trivial) {
    out.push_back(item("moments", "loglog_slope", 0.0, 0.0, ">=", "all moments vanish (no motion)"));
  } else {
    out.push_back(item("moments", "loglog_slope", rep.slope, 0.8, ">=",
                       "second moment of the running sup deviation against delta"));
  }
  double c_max = 0.0;
  for (double c : rep.c_estimates) c_max = std::max(c_max, c);
  out.push_back(item("moments", "c_estimate_max", c_max, kNoBound, "finite",
                     "moment / ((1 + |x0|^2) delta), maximized over deltas"));
}

void dpp_checks(const LoadedProblem& lp, const std::vector<Vector>& controls, const CheckOptions& opts,
                std::vector<CheckItem>& out) {
  DppOptions dopt;
  dopt.threads = opts.threads;
  const DppResult dpp = bellman_backward(lp.problem, lp.ambiguity, lp.grid, controls, dopt);
  const double dt = lp.problem.horizon / lp.grid.nt;
  const double delta = std::max(1.0, std::round(0.5 * lp.grid.nt)) * dt;
  const ConsistencyReport cons = dpp_consistency_check(lp.problem, lp.ambiguity, lp.grid, controls, 0.0, delta, dopt);
  out.push_back(item("dpp", "consistency_residual", cons.residual, cons.interpolation_bound, "<=",
                     "one pass against the composition at delta = " + std::to_string(cons.delta)));

  HjbOptions ho;
  ho.threads = opts.threads;
  const ValueField hjb = solve_hjb(lp.problem, lp.ambiguity, lp.grid, controls, ho);
  double cross = 0.0;
  for (std::size_t node = 0; node < lp.grid.node_count(); ++node) {
    if (lp.grid.in_central(node)) cross = std::max(cross, std::abs(hjb.layers[0][node] - dpp.value.layers[0][node]));
  }
  out.push_back(item("dpp", "cross_solver_sup", cross, 5e-2, "<=", "sup |V_hjb - V_dpp| at t = 0, central region"));

  out.push_back(item("dpp", "growth_constant", dpp.growth_constant, kNoBound, "finite", "max |V| / (1 + |x|^2)"));

  if (lp.closed_form) {
    const double err = dense_central_error(lp.grid, dpp.value.layers[0], *lp.closed_form, 0.0, lp.grid.dim() == 1 ? 401 : 101);
    out.push_back(item("dpp", "closed_form_sup", err, opts.closed_form_tolerance, "<=",
                       "dense sample of the central region at t = 0"));
  }
}

const char* suite_name(Suite s) {
  switch (s) {
    case Suite::Regularity: return "regularity";
    case Suite::Moments: return "moments";
    case Suite::Dpp: return "dpp";
    case Suite::All: return "all";
  }
  return "all";
}

}  // namespace

CheckReport run_check_suite(const LoadedProblem& lp, Suite suite, const CheckOptions& opts) {
  CheckReport rep;
  rep.config_name = lp.problem.name;
  rep.suite = suite_name(suite);
  try {
    const std::vector<Vector> controls = discretize_controls(lp.problem.controls);
    if (suite == Suite::Regularity || suite == Suite::All) regularity_checks(lp, controls, opts, rep.checks);
    if (suite == Suite::Moments || suite == Suite::All) moment_checks(lp, controls, opts, rep.checks);
    if (suite == Suite::Dpp || suite == Suite::All) dpp_checks(lp, controls, opts, rep.checks);
  } catch (const Error& e) {
    CheckReport err = error_report(rep.config_name, rep.suite, e);
    err.checks = std::move(rep.checks);
    return err;
  }
  const bool ok = std::all_of(rep.checks.begin(), rep.checks.end(), [](const CheckItem& c) { return c.passed; });
  rep.status = ok ? "pass" : "fail";
  rep.exit_code = ok ? 0 : 4;
  return rep;
}

std::string to_json(const CheckReport& report) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j;
  j["config"] = report.config_name;
  j["suite"] = report.suite;
  j["status"] = report.status;
  j["exit_code"] = report.exit_code;
  j["checks"] = json::array();
  for (const CheckItem& c : report.checks) {
    j["checks"].push_back({{"suite", c.suite},
                           {"name", c.name},
                           {"value", num(c.value)},
                           {"bound", num(c.bound)},
                           {"relation", c.relation},
                           {"passed", c.passed},
                           {"detail", c.detail}});
  }
  if (report.status == "error") j["error"] = {{"type", report.error_type}, {"message", report.error_message}};
  return j.dump(2);
}

}  // namespace gctl
