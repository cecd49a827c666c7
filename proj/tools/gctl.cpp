#include "gctl/benchmarks.hpp"
#include "gctl/dpp.hpp"
#include "gctl/errors.hpp"
#include "gctl/gheat.hpp"
#include "gctl/gsde.hpp"
#include "gctl/hjb.hpp"
#include "gctl/reports.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using gctl::ConfigError;
using gctl::GridSpec;
using gctl::LoadedProblem;
using gctl::Vector;
using json = nlohmann::json;

struct GlobalOptions {
  std::string config;
  std::string builtin;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;
  std::vector<int> nx;
  int nt = 0;
};

struct Problem {
  LoadedProblem loaded;
  double tolerance = 2e-2;
  std::string label;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Problem load(const GlobalOptions& g) {
  if (g.config.empty() == g.builtin.empty()) throw ConfigError("give exactly one of --config or --builtin");
  Problem p = [&] {
    if (!g.builtin.empty()) {
      const gctl::BenchmarkEntry& e = gctl::find_builtin(g.builtin);
      return Problem{e.loaded, e.tolerance, e.name};
    }
    return Problem{gctl::load_problem(g.config), 2e-2, g.config};
  }();
  if (!g.nx.empty()) {
    if (g.nx.size() != p.loaded.grid.nx.size()) throw ConfigError("--nx needs one count per state axis");
    p.loaded.grid.nx = g.nx;
  }
  if (g.nt > 0) p.loaded.grid.nt = g.nt;
  p.loaded.grid.validate();
  return p;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError(what + ": cannot read '" + tok + "' as a number");
    }
  }
  if (out.empty()) throw ConfigError(what + " is empty");
  return out;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text << "\n";
  } else {
    open_out(path) << text << "\n";
  }
}

std::string axis_header(int n, const char* prefix) {
  std::string h;
  for (int i = 1; i <= n; ++i) h += std::string(",") + prefix + std::to_string(i);
  return h;
}

void write_value_csv(const std::string& path, const gctl::ValueField& v) {
  std::ofstream out = open_out(path);
  out << "t" << axis_header(v.grid.dim(), "x") << ",value\n";
  std::array<double, 2> x{};
  const auto dim = static_cast<std::size_t>(v.grid.dim());
  for (std::size_t k = 0; k < v.layers.size(); ++k) {
    for (std::size_t node = 0; node < v.grid.node_count(); ++node) {
      v.grid.node(node, std::span<double>(x.data(), dim));
      out << fmt(v.times[k]);
      for (std::size_t i = 0; i < dim; ++i) out << "," << fmt(x[i]);
      out << "," << fmt(v.layers[k][node]) << "\n";
    }
  }
}

void write_policy_csv(const std::string& path, const gctl::PolicyField& p) {
  std::ofstream out = open_out(path);
  const auto m = static_cast<int>(p.controls.front().size());
  out << "t" << axis_header(p.grid.dim(), "x") << axis_header(m, "v").c_str() << ",vertex\n";
  std::array<double, 2> x{};
  const auto dim = static_cast<std::size_t>(p.grid.dim());
  for (std::size_t k = 0; k < p.layers(); ++k) {
    for (std::size_t node = 0; node < p.grid.node_count(); ++node) {
      p.grid.node(node, std::span<double>(x.data(), dim));
      out << fmt(p.times[k]);
      for (std::size_t i = 0; i < dim; ++i) out << "," << fmt(x[i]);
      const Vector& v = p.controls[p.control_index[k][node]];
      for (int c = 0; c < m; ++c) out << "," << fmt(v(c));
      out << "," << p.vertex_index[k][node] << "\n";
    }
  }
}

// The grid is recovered from the first layer's coordinates, so a policy
// solved at other --nx/--nt settings than the simulation still loads.
gctl::PolicyField read_policy_csv(const std::string& path, const LoadedProblem& lp) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open policy file '" + path + "'");
  const int n = lp.problem.n;
  const int m = lp.problem.m;
  const auto width = static_cast<std::size_t>(1 + n + m + 1);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_list(line, "policy row " + std::to_string(rows.size() + 1)));
    if (rows.back().size() != width) {
      throw ConfigError("policy row " + std::to_string(rows.size()) + " has " + std::to_string(rows.back().size()) +
                        " fields, expected " + std::to_string(width));
    }
  }
  if (rows.empty()) throw ConfigError("policy file '" + path + "' has no rows");

  std::size_t nodes = 0;
  while (nodes < rows.size() && rows[nodes][0] == rows[0][0]) ++nodes;
  gctl::PolicyField pol;
  pol.grid.lo.assign(static_cast<std::size_t>(n), 0.0);
  pol.grid.hi.assign(static_cast<std::size_t>(n), 0.0);
  pol.grid.nx.assign(static_cast<std::size_t>(n), 0);
  auto coord = [&](std::size_t row, int axis) { return rows[row][static_cast<std::size_t>(1 + axis)]; };
  std::size_t stride = 1;
  for (int a = 0; a < n; ++a) {
    // axis 0 varies fastest
    std::size_t count = 1;
    while (count * stride < nodes && coord(count * stride, a) != coord(0, a)) ++count;
    if (a == n - 1) count = nodes / stride;
    const auto axis = static_cast<std::size_t>(a);
    pol.grid.lo[axis] = coord(0, a);
    pol.grid.hi[axis] = coord((count - 1) * stride, a);
    pol.grid.nx[axis] = static_cast<int>(count);
    stride *= count;
  }
  if (stride != nodes || rows.size() % nodes != 0) {
    throw ConfigError("policy file rows do not form a tensor grid repeated over layers");
  }
  pol.grid.nt = static_cast<int>(rows.size() / nodes);

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::vector<double>& f = rows[r];
    const std::size_t layer = r / nodes;
    if (layer == pol.control_index.size()) {
      pol.control_index.emplace_back(nodes, 0);
      pol.vertex_index.emplace_back(nodes, 0);
      pol.times.push_back(f[0]);
    }
    Vector v(m);
    for (int c = 0; c < m; ++c) v(c) = f[static_cast<std::size_t>(1 + n + c)];
    std::size_t idx = 0;
    while (idx < pol.controls.size() && pol.controls[idx] != v) ++idx;
    if (idx == pol.controls.size()) pol.controls.push_back(v);
    const double vert = f.back();
    if (vert < 0 || vert != std::floor(vert)) throw ConfigError("policy vertex index must be a nonnegative integer");
    pol.control_index[layer][r % nodes] = static_cast<std::uint32_t>(idx);
    pol.vertex_index[layer][r % nodes] = static_cast<std::uint32_t>(vert);
  }
  pol.times.push_back(lp.problem.horizon);
  pol.validate(lp.ambiguity.size());
  return pol;
}

json grid_json(const GridSpec& g) {
  json spacing = json::array();
  for (int a = 0; a < g.dim(); ++a) spacing.push_back(g.spacing(a));
  return {{"x_lo", g.lo}, {"x_hi", g.hi}, {"nx", g.nx}, {"nt", g.nt}, {"h", spacing}};
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---------------------------------------------------------------------------

int cmd_list() {
  for (const gctl::BenchmarkEntry& e : gctl::builtin_registry()) {
    std::cout << e.name << "\n  " << e.description << "\n  V(t, x) = " << e.closed_form_text << "\n";
  }
  return 0;
}

struct GExpectOptions {
  std::string payoff;
  double time = 1.0;
  double h = 0.0;
  std::string beta;
  std::string times;
};

int cmd_g_expect(const GlobalOptions& g, const GExpectOptions& o) {
  const Problem p = load(g);
  const gctl::AmbiguitySet& s = p.loaded.ambiguity;
  gctl::HeatOptions ho;
  ho.threads = g.threads;
  if (!o.times.empty()) {
    const std::vector<double> times = parse_list(o.times, "--times");
    const gctl::Expr phi = gctl::parse_expr(o.payoff, gctl::Symbols{false, 0, 0, static_cast<int>(times.size())});
    const Vector beta = o.beta.empty() ? Vector() : to_vector(parse_list(o.beta, "--beta"));
    const gctl::AmbiguitySet s1 = s.dim() == 1 ? s : gctl::project_direction(s, beta.size() ? beta : Vector(Vector::Unit(s.dim(), 0)));
    const GridSpec grid = gctl::default_heat_grid(s1, times.back(), o.h > 0 ? o.h : (times.size() > 2 ? 0.1 : 0.02));
    const gctl::NestedResult r = gctl::nested_expectation(s, phi, times, grid, ho, beta);
    for (const std::string& w : r.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "E = " << fmt(r.value) << "\n";
    return 0;
  }
  gctl::ValueField field;
  if (!o.beta.empty() || s.dim() > 2) {
    if (o.beta.empty()) throw ConfigError("--beta is required when the brownian dimension exceeds 2");
    const Vector beta = to_vector(parse_list(o.beta, "--beta"));
    const gctl::AmbiguitySet s1 = gctl::project_direction(s, beta);
    const gctl::Expr phi = gctl::parse_expr(o.payoff, gctl::Symbols{false, 1, 0, 0});
    const GridSpec grid = gctl::default_heat_grid(s1, o.time, o.h > 0 ? o.h : 0.01);
    field = gctl::solve_gheat(s1, phi, o.time, grid, ho);
  } else {
    const gctl::Expr phi = gctl::parse_expr(o.payoff, gctl::Symbols{false, s.dim(), 0, 0});
    const GridSpec grid = gctl::default_heat_grid(s, o.time, o.h > 0 ? o.h : (s.dim() == 1 ? 0.01 : 0.05));
    field = gctl::solve_gheat(s, phi, o.time, grid, ho);
  }
  const std::array<double, 2> origin{0.0, 0.0};
  const double value =
      field.at(field.layers.size() - 1, std::span<const double>(origin.data(), static_cast<std::size_t>(field.grid.dim())));
  std::cout << "E = " << fmt(value) << "\n";
  if (!g.out.empty()) {
    std::ofstream out = open_out(g.out);
    out << axis_header(field.grid.dim(), "x").substr(1) << ",u\n";
    std::array<double, 2> x{};
    const auto dim = static_cast<std::size_t>(field.grid.dim());
    for (std::size_t node = 0; node < field.grid.node_count(); ++node) {
      field.grid.node(node, std::span<double>(x.data(), dim));
      for (std::size_t i = 0; i < dim; ++i) out << fmt(x[i]) << ",";
      out << fmt(field.layers.back()[node]) << "\n";
    }
  }
  return 0;
}

struct HjbCmdOptions {
  bool convergence = false;
  std::string report;
  int levels = 3;
};

int cmd_solve_hjb(const GlobalOptions& g, const HjbCmdOptions& o) {
  const Problem p = load(g);
  const auto controls = gctl::discretize_controls(p.loaded.problem.controls);
  gctl::HjbOptions ho;
  ho.threads = g.threads;
  const gctl::ValueField v = gctl::solve_hjb(p.loaded.problem, p.loaded.ambiguity, p.loaded.grid, controls, ho);
  if (!g.out.empty()) write_value_csv(g.out, v);
  if (!o.convergence) return 0;
  const auto grids = gctl::refinement_ladder(p.loaded.grid, o.levels);
  const gctl::Expr* ref = p.loaded.closed_form ? &*p.loaded.closed_form : nullptr;
  const gctl::ConvergenceStudy st =
      gctl::convergence_study(p.loaded.problem, p.loaded.ambiguity, grids, controls, ref, ho);
  json j;
  j["config"] = p.loaded.problem.name;
  j["reference"] = ref ? "closed_form" : "finest_grid";
  j["grids"] = json::array();
  for (const GridSpec& gs : st.grids) j["grids"].push_back(grid_json(gs));
  j["sup_error"] = st.sup_error;
  j["order"] = num(st.order);
  j["exact"] = st.exact;
  write_text(o.report, j.dump(2));
  return 0;
}

int cmd_solve_dpp(const GlobalOptions& g, const std::string& policy_path) {
  const Problem p = load(g);
  const auto controls = gctl::discretize_controls(p.loaded.problem.controls);
  gctl::DppOptions dopt;
  dopt.threads = g.threads;
  const gctl::DppResult r = gctl::bellman_backward(p.loaded.problem, p.loaded.ambiguity, p.loaded.grid, controls, dopt);
  if (!g.out.empty()) write_value_csv(g.out, r.value);
  if (!policy_path.empty()) write_policy_csv(policy_path, r.policy);
  std::cout << "growth constant " << fmt(r.growth_constant) << "\n";
  return 0;
}

struct SimulateOptions {
  std::string x0;
  std::string policy;
  std::string control;
  std::size_t schedules = 0;
  std::size_t paths = 1000;
  std::size_t steps = 100;
  std::string report;
};

int cmd_simulate(const GlobalOptions& g, const SimulateOptions& o) {
  const Problem p = load(g);
  const gctl::ControlProblem& prob = p.loaded.problem;
  const gctl::AmbiguitySet& s = p.loaded.ambiguity;
  const Vector x0 = o.x0.empty() ? Vector(Vector::Zero(prob.n)) : to_vector(parse_list(o.x0, "--x0"));
  if (!o.policy.empty() && !o.control.empty()) throw ConfigError("give at most one of --policy and --control");
  std::optional<gctl::PolicyField> policy;
  gctl::ControlLaw law;
  if (!o.policy.empty()) {
    policy = read_policy_csv(o.policy, p.loaded);
    law = gctl::FeedbackControl{&*policy};
  } else if (!o.control.empty()) {
    gctl::ExprControl ec;
    std::stringstream ss(o.control);
    std::string part;
    while (std::getline(ss, part, ';')) ec.components.push_back(gctl::parse_expr(part, gctl::Symbols{true, prob.n, 0, 0}));
    law = ec;
  } else {
    law = gctl::constant_control(gctl::discretize_controls(prob.controls).front());
  }
  const std::size_t k = o.schedules == 0 ? s.size() : o.schedules;
  const auto family = gctl::schedule_family(s, o.steps, k, g.seed);
  const gctl::ScenarioEstimate est = gctl::estimate_cost(prob, s, 0.0, x0, law, family, o.paths, g.seed, g.threads);
  json j;
  j["config"] = prob.name;
  j["value"] = est.value;
  j["std_error"] = est.std_error;
  j["worst_index"] = est.worst_index;
  j["worst_schedule"] = est.worst_schedule.vertex_index_per_step;
  j["schedule_means"] = est.schedule_means;
  j["schedule_std_errors"] = est.schedule_errors;
  j["paths"] = o.paths;
  j["steps"] = o.steps;
  j["seed"] = g.seed;
  write_text(o.report, j.dump(2));
  if (!g.out.empty()) {
    gctl::SimulationOptions so;
    so.threads = g.threads;
    const gctl::PathBundle b = gctl::simulate_paths(prob, s, x0, law, est.worst_schedule, o.paths, g.seed, so);
    std::ofstream out = open_out(g.out);
    out << "path,step,t" << axis_header(b.n, "x") << axis_header(b.d, "B");
    for (int i = 1; i <= b.d; ++i) {
      for (int jj = i; jj <= b.d; ++jj) out << ",QV" << i << jj;
    }
    out << "\n";
    for (std::size_t path = 0; path < b.n_paths; ++path) {
      for (std::size_t st = 0; st <= b.n_steps; ++st) {
        out << path << "," << st << "," << fmt(b.times[st]);
        for (int i = 0; i < b.n; ++i) out << "," << fmt(b.x(path, st, i));
        for (int i = 0; i < b.d; ++i) out << "," << fmt(b.b(path, st, i));
        for (int i = 0; i < b.d; ++i) {
          for (int jj = i; jj < b.d; ++jj) out << "," << fmt(b.qv(path, st, i, jj));
        }
        out << "\n";
      }
    }
  }
  return 0;
}

int cmd_check(const GlobalOptions& g, const std::string& suite_name, std::size_t paths) {
  const std::string label = !g.builtin.empty() ? g.builtin : g.config;
  const gctl::CheckReport rep = [&] {
    try {
      const gctl::Suite suite = gctl::parse_suite(suite_name);
      const Problem p = load(g);
      gctl::CheckOptions co;
      co.seed = g.seed;
      co.threads = g.threads;
      co.paths = paths;
      co.closed_form_tolerance = p.tolerance;
      return gctl::run_check_suite(p.loaded, suite, co);
    } catch (const gctl::Error& e) {
      return gctl::error_report(label, suite_name, e);
    }
  }();
  write_text(g.out, gctl::to_json(rep));
  if (rep.status == "error") std::cerr << rep.error_type << ": " << rep.error_message << "\n";
  return rep.exit_code;
}

int cmd_bench(const GlobalOptions& g, const std::string& only) {
  json rows = json::array();
  std::printf("%-14s %12s %12s %12s %12s\n", "name", "hjb_err", "dpp_err", "cross", "V(0,probe)");
  for (const gctl::BenchmarkEntry& e : gctl::builtin_registry()) {
    if (!only.empty() && &gctl::find_builtin(only) != &e) continue;
    const auto controls = gctl::discretize_controls(e.loaded.problem.controls);
    gctl::HjbOptions ho;
    ho.threads = g.threads;
    gctl::DppOptions dopt;
    dopt.threads = g.threads;
    const gctl::ValueField vh = gctl::solve_hjb(e.loaded.problem, e.loaded.ambiguity, e.loaded.grid, controls, ho);
    const gctl::DppResult vd = gctl::bellman_backward(e.loaded.problem, e.loaded.ambiguity, e.loaded.grid, controls, dopt);
    const double eh = gctl::central_sup_error(e.loaded.grid, vh.layers.front(), e.closed_form, 0.0);
    const double ed = gctl::central_sup_error(e.loaded.grid, vd.value.layers.front(), e.closed_form, 0.0);
    double cross = 0.0;
    for (std::size_t node = 0; node < e.loaded.grid.node_count(); ++node) {
      if (e.loaded.grid.in_central(node)) cross = std::max(cross, std::abs(vh.layers[0][node] - vd.value.layers[0][node]));
    }
    const std::span<const double> probe(e.probe.data(), static_cast<std::size_t>(e.probe.size()));
    const double at = vd.value.at(0, probe);
    std::printf("%-14s %12.3e %12.3e %12.3e %12.6f\n", e.name.c_str(), eh, ed, cross, at);
    rows.push_back({{"name", e.name}, {"hjb_sup_error", eh}, {"dpp_sup_error", ed}, {"cross_sup", cross},
                    {"dpp_value_at_probe", at}, {"probe", std::vector<double>(e.probe.data(), e.probe.data() + e.probe.size())},
                    {"tolerance", e.tolerance}});
  }
  if (!g.out.empty()) write_text(g.out, json{{"benchmarks", rows}}.dump(2));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gctl: control under volatility uncertainty (G-expectation solvers)"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "problem config (JSON)");
  app.add_option("--builtin", g.builtin, "builtin benchmark name");
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output file");
  app.add_option("--nx", g.nx, "override grid node counts per axis");
  app.add_option("--nt", g.nt, "override grid time steps");
  app.fallthrough();

  auto* list = app.add_subcommand("list", "list builtin benchmarks");

  GExpectOptions ge;
  auto* gexp = app.add_subcommand("g-expect", "sublinear expectation of a payoff of B_t");
  gexp->add_option("--payoff", ge.payoff, "payoff in x1..xd (or y1..yN with --times)")->required();
  gexp->add_option("--time", ge.time, "time t");
  gexp->set_help_flag("--help", "Print this help message and exit");
  gexp->add_option("--h", ge.h, "grid spacing");
  gexp->add_option("--beta", ge.beta, "direction for the marginal beta^T B, comma separated");
  gexp->add_option("--times", ge.times, "increasing times t1,...,tN for a nested expectation");

  HjbCmdOptions ho;
  auto* hjb = app.add_subcommand("solve-hjb", "finite-difference HJB solve");
  hjb->add_flag("--convergence", ho.convergence, "run a refinement study");
  hjb->add_option("--report", ho.report, "convergence JSON (default stdout)");
  hjb->add_option("--levels", ho.levels, "grids in the refinement study")->check(CLI::Range(3, 6));

  std::string policy_out;
  auto* dpp = app.add_subcommand("solve-dpp", "backward dynamic programming solve");
  dpp->add_option("--policy", policy_out, "policy CSV");

  SimulateOptions so;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo cost under volatility scenarios");
  sim->add_option("--x0", so.x0, "initial state, comma separated");
  sim->add_option("--policy", so.policy, "feedback policy CSV from solve-dpp");
  sim->add_option("--control", so.control, "control expressions in t, x; ';' separated");
  sim->add_option("--schedules", so.schedules, "schedule family size");
  sim->add_option("--paths", so.paths, "paths per schedule")->check(CLI::PositiveNumber);
  sim->add_option("--steps", so.steps, "Euler steps")->check(CLI::PositiveNumber);
  sim->add_option("--report", so.report, "estimate JSON (default stdout)");

  std::string suite = "all";
  std::size_t check_paths = 2000;
  auto* check = app.add_subcommand("check", "property and consistency checks");
  check->add_option("--suite", suite, "regularity | moments | dpp | all");
  check->add_option("--paths", check_paths, "Monte Carlo paths for the moment check")->check(CLI::PositiveNumber);

  std::string bench_name;
  auto* bench = app.add_subcommand("bench", "run builtins through both solvers");
  bench->add_option("--name", bench_name, "single builtin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const bool needs_problem = !list->parsed() && !bench->parsed();
  if (needs_problem && g.config.empty() == g.builtin.empty()) {
    std::cerr << "give exactly one of --config or --builtin\n" << app.help();
    return 1;
  }

  try {
    if (list->parsed()) return cmd_list();
    if (gexp->parsed()) return cmd_g_expect(g, ge);
    if (hjb->parsed()) return cmd_solve_hjb(g, ho);
    if (dpp->parsed()) return cmd_solve_dpp(g, policy_out);
    if (sim->parsed()) return cmd_simulate(g, so);
    if (check->parsed()) return cmd_check(g, suite, check_paths);
    if (bench->parsed()) return cmd_bench(g, bench_name);
  } catch (const gctl::Error& e) {
    std::cerr << gctl::error_type_name(e) << ": " << e.what() << "\n";
    return gctl::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
