#include "gctl/problem.hpp"

#include "gctl/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

namespace gctl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Control sets

ControlSet ControlSet::box(Vector lo, Vector hi, std::vector<int> counts) {
  if (lo.size() == 0 || lo.size() != hi.size() ||
      static_cast<std::size_t>(lo.size()) != counts.size()) {
    throw ConfigError("box control set needs lo, hi and counts of equal nonzero length");
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!(lo[i] <= hi[i])) throw ConfigError("box control set needs lo <= hi");
    if (counts[static_cast<std::size_t>(i)] < 1) throw ConfigError("box control counts must be >= 1");
  }
  return ControlSet(BoxControls{std::move(lo), std::move(hi), std::move(counts)});
}

ControlSet ControlSet::finite(std::vector<Vector> points) {
  if (points.empty()) throw ConfigError("finite control set must be nonempty");
  const auto m = points.front().size();
  if (m == 0) throw ConfigError("control points must have at least one component");
  for (const Vector& p : points) {
    if (p.size() != m) throw ConfigError("finite control points have inconsistent dimension");
    if (!p.allFinite()) throw ConfigError("finite control points must be finite");
  }
  return ControlSet(FiniteControls{std::move(points)});
}

int ControlSet::dim() const {
  if (is_box()) return static_cast<int>(as_box().lo.size());
  return static_cast<int>(as_finite().points.front().size());
}

bool ControlSet::contains(const Vector& v, double tol) const {
  if (v.size() != dim()) return false;
  if (is_box()) {
    const BoxControls& b = as_box();
    return ((v - b.lo).array() >= -tol).all() && ((b.hi - v).array() >= -tol).all();
  }
  for (const Vector& p : as_finite().points) {
    if ((p - v).cwiseAbs().maxCoeff() <= tol) return true;
  }
  return false;
}

std::vector<Vector> discretize_controls(const ControlSet& cs) {
  if (!cs.is_box()) return cs.as_finite().points;
  const BoxControls& b = cs.as_box();
  const int m = static_cast<int>(b.lo.size());
  std::vector<std::vector<double>> axes(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const int c = b.counts[static_cast<std::size_t>(k)];
    auto& ax = axes[static_cast<std::size_t>(k)];
    if (c == 1) {
      ax.push_back(0.5 * (b.lo[k] + b.hi[k]));
    } else {
      for (int i = 0; i < c; ++i) {
        ax.push_back(i == c - 1 ? b.hi[k] : b.lo[k] + (b.hi[k] - b.lo[k]) * i / (c - 1));
      }
    }
  }
  std::vector<Vector> out;
  std::vector<std::size_t> idx(static_cast<std::size_t>(m), 0);
  while (true) {
    Vector v(m);
    for (int k = 0; k < m; ++k) v[k] = axes[static_cast<std::size_t>(k)][idx[static_cast<std::size_t>(k)]];
    out.push_back(std::move(v));
    int k = m - 1;
    while (k >= 0) {
      auto& i = idx[static_cast<std::size_t>(k)];
      if (++i < axes[static_cast<std::size_t>(k)].size()) break;
      i = 0;
      --k;
    }
    if (k < 0) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Problem

int ControlProblem::pair_index(int i, int j, int d) {
  if (i > j) std::swap(i, j);
  // rows 0..i-1 contribute d, d-1, ... entries
  return i * d - i * (i - 1) / 2 + (j - i);
}

ControlProblem ControlProblem::zeros(int n, int d, int m) {
  ControlProblem p;
  p.n = n;
  p.d = d;
  p.m = m;
  p.b.assign(static_cast<std::size_t>(n), Expr());
  p.h.assign(static_cast<std::size_t>(pair_count(d)), std::vector<Expr>(static_cast<std::size_t>(n)));
  p.sigma.assign(static_cast<std::size_t>(n * d), Expr());
  p.g.assign(static_cast<std::size_t>(pair_count(d)), Expr());
  p.controls = ControlSet::finite({Vector::Zero(m)});
  return p;
}

void ControlProblem::validate() const {
  if (n < 1 || d < 1 || m < 1) throw DimensionError("dimensions n, d, m must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive");
  const auto pairs = static_cast<std::size_t>(pair_count(d));
  if (b.size() != static_cast<std::size_t>(n)) throw DimensionError("b must have n entries");
  if (sigma.size() != static_cast<std::size_t>(n * d)) throw DimensionError("sigma must be n x d");
  if (h.size() != pairs || g.size() != pairs) throw DimensionError("h and g must have d(d+1)/2 pairs");
  for (const auto& hp : h) {
    if (hp.size() != static_cast<std::size_t>(n)) throw DimensionError("each h_ij must have n entries");
  }
  if (controls.dim() != m) throw DimensionError("control set dimension differs from control_dim");
}

Coefficients ControlProblem::evaluate(double t, std::span<const double> x,
                                      std::span<const double> v) const {
  const EvalPoint p{t, x, v, {}};
  const int pairs = pair_count(d);
  Coefficients c;
  c.b.resize(n);
  for (int i = 0; i < n; ++i) c.b[i] = b[static_cast<std::size_t>(i)].eval(p);
  c.h.resize(n, pairs);
  for (int k = 0; k < pairs; ++k) {
    for (int i = 0; i < n; ++i) c.h(i, k) = h[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)].eval(p);
  }
  c.sigma.resize(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) c.sigma(i, j) = sigma[static_cast<std::size_t>(i * d + j)].eval(p);
  }
  c.f = f.eval(p);
  c.g.resize(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const double gij = g[static_cast<std::size_t>(pair_index(i, j, d))].eval(p);
      c.g(i, j) = gij;
      c.g(j, i) = gij;
    }
  }
  return c;
}

bool ControlProblem::time_dependent() const {
  auto uses_t = [](const Expr& e) { return e.uses(VarKind::Time); };
  if (std::any_of(b.begin(), b.end(), uses_t) || std::any_of(sigma.begin(), sigma.end(), uses_t) ||
      std::any_of(g.begin(), g.end(), uses_t) || uses_t(f)) {
    return true;
  }
  for (const auto& hp : h) {
    if (std::any_of(hp.begin(), hp.end(), uses_t)) return true;
  }
  return false;
}

Vector qv_drift(const Coefficients& c, const Matrix& gamma) {
  const int d = static_cast<int>(gamma.rows());
  Vector out = Vector::Zero(c.b.size());
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const double w = (i == j ? 1.0 : 2.0) * gamma(i, j);
      if (w != 0.0) out += w * c.h.col(ControlProblem::pair_index(i, j, d));
    }
  }
  return out;
}

double qv_rate(const Coefficients& c, const Matrix& gamma) { return c.g.cwiseProduct(gamma).sum(); }

// ---------------------------------------------------------------------------
// JSON config

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw ConfigError("config " + path + ": " + what);
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(path, "missing field '" + key + "'");
  return *it;
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) schema_error(path, "expected an integer");
  return j.get<int>();
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) schema_error(path, "expected a number");
  return j.get<double>();
}

std::vector<double> as_doubles(const json& j, std::size_t len, const std::string& path) {
  if (!j.is_array() || j.size() != len) {
    schema_error(path, "expected an array of " + std::to_string(len) + " numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < len; ++i) out.push_back(as_double(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

Vector as_vector(const json& j, std::size_t len, const std::string& path) {
  const auto v = as_doubles(j, len, path);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Expr as_expr(const json& j, const Symbols& sym, const std::string& path) {
  if (j.is_number()) return Expr::constant(j.get<double>());
  if (!j.is_string()) schema_error(path, "expected an expression string");
  try {
    return parse_expr(j.get<std::string>(), sym);
  } catch (const SyntaxError& e) {
    throw SyntaxError("config " + path + ": " + e.what(), e.offset());
  } catch (const UnknownIdentifier& e) {
    throw UnknownIdentifier("config " + path + ": " + e.what(), e.offset());
  } catch (const ArityError& e) {
    throw ArityError("config " + path + ": " + e.what(), e.offset());
  }
}

// "ij" with 1-based digits; only i <= j is accepted.
std::pair<int, int> pair_key(const std::string& key, int d, const std::string& path) {
  if (key.size() != 2 || key[0] < '1' || key[0] > '9' || key[1] < '1' || key[1] > '9') {
    schema_error(path, "key '" + key + "' is not of the form \"ij\" with 1-based digits");
  }
  const int i = key[0] - '1';
  const int j = key[1] - '1';
  if (i >= d || j >= d) schema_error(path, "key '" + key + "' exceeds brownian_dim");
  if (i > j) {
    schema_error(path, "key '" + key + "': only the upper triangle (i <= j) is accepted");
  }
  return {i, j};
}

ControlSet parse_controls(const json& j, int m) {
  const std::string path = "control_set";
  const json& type = field(j, "type", path);
  if (type == "box") {
    Vector lo = as_vector(field(j, "lo", path), static_cast<std::size_t>(m), path + ".lo");
    Vector hi = as_vector(field(j, "hi", path), static_cast<std::size_t>(m), path + ".hi");
    const json& counts = field(j, "counts", path);
    if (!counts.is_array() || counts.size() != static_cast<std::size_t>(m)) {
      schema_error(path + ".counts", "expected " + std::to_string(m) + " integers");
    }
    std::vector<int> c;
    for (const json& e : counts) c.push_back(as_int(e, path + ".counts"));
    return ControlSet::box(std::move(lo), std::move(hi), std::move(c));
  }
  if (type == "finite") {
    const json& pts = field(j, "points", path);
    if (!pts.is_array() || pts.empty()) schema_error(path + ".points", "expected a nonempty array");
    std::vector<Vector> points;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      points.push_back(as_vector(pts[k], static_cast<std::size_t>(m),
                                 path + ".points[" + std::to_string(k) + "]"));
    }
    return ControlSet::finite(std::move(points));
  }
  schema_error(path + ".type", "expected \"box\" or \"finite\"");
}

}  // namespace

LoadedProblem load_problem_text(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");

  ControlProblem p;
  if (root.contains("name")) {
    if (!root["name"].is_string()) schema_error("name", "expected a string");
    p.name = root["name"].get<std::string>();
  }
  p.n = as_int(field(root, "state_dim", ""), "state_dim");
  p.d = as_int(field(root, "brownian_dim", ""), "brownian_dim");
  p.m = as_int(field(root, "control_dim", ""), "control_dim");
  if (p.n < 1 || p.d < 1 || p.m < 1) throw DimensionError("config: dimensions must be positive");
  if (p.d > 9) throw DimensionError("config: brownian_dim above 9 is not supported by the pair keys");
  p.horizon = as_double(field(root, "horizon", ""), "horizon");
  if (!(p.horizon > 0.0)) schema_error("horizon", "must be positive");

  // ambiguity
  const json& amb = field(root, "ambiguity", "");
  const json& verts = field(amb, "vertices", "ambiguity");
  if (!verts.is_array() || verts.empty()) schema_error("ambiguity.vertices", "expected a nonempty array");
  std::vector<Matrix> vertices;
  for (std::size_t k = 0; k < verts.size(); ++k) {
    const std::string vp = "ambiguity.vertices[" + std::to_string(k) + "]";
    const json& rows = verts[k];
    if (!rows.is_array() || rows.size() != static_cast<std::size_t>(p.d)) {
      schema_error(vp, "expected " + std::to_string(p.d) + " rows");
    }
    Matrix g(p.d, p.d);
    for (int i = 0; i < p.d; ++i) {
      const auto row = as_doubles(rows[static_cast<std::size_t>(i)], static_cast<std::size_t>(p.d),
                                  vp + "[" + std::to_string(i) + "]");
      for (int j = 0; j < p.d; ++j) g(i, j) = row[static_cast<std::size_t>(j)];
    }
    vertices.push_back(std::move(g));
  }
  AmbiguitySet ambiguity(std::move(vertices));

  p.controls = parse_controls(field(root, "control_set", ""), p.m);

  // coefficients
  const json& co = field(root, "coefficients", "");
  const Symbols coef_sym{true, p.n, p.m, 0};
  const json& bj = field(co, "b", "coefficients");
  if (!bj.is_array() || bj.size() != static_cast<std::size_t>(p.n)) {
    schema_error("coefficients.b", "expected " + std::to_string(p.n) + " expressions");
  }
  for (int i = 0; i < p.n; ++i) {
    p.b.push_back(as_expr(bj[static_cast<std::size_t>(i)], coef_sym, "coefficients.b[" + std::to_string(i) + "]"));
  }
  const int pairs = ControlProblem::pair_count(p.d);
  p.h.assign(static_cast<std::size_t>(pairs), std::vector<Expr>(static_cast<std::size_t>(p.n)));
  p.g.assign(static_cast<std::size_t>(pairs), Expr());
  if (co.contains("h")) {
    const json& hj = co["h"];
    if (!hj.is_object()) schema_error("coefficients.h", "expected an object keyed by \"ij\"");
    for (const auto& [key, val] : hj.items()) {
      const std::string hp = "coefficients.h." + key;
      const auto [i, j] = pair_key(key, p.d, "coefficients.h");
      if (!val.is_array() || val.size() != static_cast<std::size_t>(p.n)) {
        schema_error(hp, "expected " + std::to_string(p.n) + " expressions");
      }
      auto& slot = p.h[static_cast<std::size_t>(ControlProblem::pair_index(i, j, p.d))];
      for (int r = 0; r < p.n; ++r) {
        slot[static_cast<std::size_t>(r)] = as_expr(val[static_cast<std::size_t>(r)], coef_sym, hp + "[" + std::to_string(r) + "]");
      }
    }
  }
  const json& sj = field(co, "sigma", "coefficients");
  if (!sj.is_array() || sj.size() != static_cast<std::size_t>(p.n)) {
    schema_error("coefficients.sigma", "expected " + std::to_string(p.n) + " rows");
  }
  for (int i = 0; i < p.n; ++i) {
    const json& row = sj[static_cast<std::size_t>(i)];
    const std::string rp = "coefficients.sigma[" + std::to_string(i) + "]";
    if (!row.is_array() || row.size() != static_cast<std::size_t>(p.d)) {
      schema_error(rp, "expected " + std::to_string(p.d) + " expressions");
    }
    for (int j = 0; j < p.d; ++j) {
      p.sigma.push_back(as_expr(row[static_cast<std::size_t>(j)], coef_sym, rp + "[" + std::to_string(j) + "]"));
    }
  }
  p.f = as_expr(field(co, "f", "coefficients"), coef_sym, "coefficients.f");
  if (co.contains("g")) {
    const json& gj = co["g"];
    if (!gj.is_object()) schema_error("coefficients.g", "expected an object keyed by \"ij\"");
    for (const auto& [key, val] : gj.items()) {
      const auto [i, j] = pair_key(key, p.d, "coefficients.g");
      p.g[static_cast<std::size_t>(ControlProblem::pair_index(i, j, p.d))] =
          as_expr(val, coef_sym, "coefficients.g." + key);
    }
  }
  p.phi = as_expr(field(co, "phi", "coefficients"), Symbols{false, p.n, 0, 0}, "coefficients.phi");

  // grid
  const json& gr = field(root, "grid", "");
  GridSpec grid;
  grid.lo = as_doubles(field(gr, "x_lo", "grid"), static_cast<std::size_t>(p.n), "grid.x_lo");
  grid.hi = as_doubles(field(gr, "x_hi", "grid"), static_cast<std::size_t>(p.n), "grid.x_hi");
  const json& nx = field(gr, "nx", "grid");
  if (!nx.is_array() || nx.size() != static_cast<std::size_t>(p.n)) {
    schema_error("grid.nx", "expected " + std::to_string(p.n) + " integers");
  }
  for (const json& e : nx) grid.nx.push_back(as_int(e, "grid.nx"));
  grid.nt = as_int(field(gr, "nt", "grid"), "grid.nt");
  grid.validate();

  std::optional<Expr> closed_form;
  if (root.contains("closed_form")) {
    closed_form = as_expr(root["closed_form"], Symbols{true, p.n, 0, 0}, "closed_form");
  }

  p.validate();
  H3Certificate cert = check_h3(ambiguity);
  return LoadedProblem{std::move(p), std::move(ambiguity), std::move(cert), std::move(grid), std::move(closed_form)};
}

LoadedProblem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_problem_text(ss.str());
}

// ---------------------------------------------------------------------------
// Lipschitz spot check

LipschitzReport spot_check_lipschitz(const ControlProblem& p, const GridSpec& grid, int samples,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto controls = discretize_controls(p.controls);
  LipschitzReport rep;

  auto sample_ratio = [&](double scale, double& rb, double& rh, double& rs) {
    std::vector<double> x(static_cast<std::size_t>(p.n)), x2(x.size());
    Vector v, v2;
    for (int s = 0; s < samples; ++s) {
      const double t = unit(rng) * p.horizon;
      for (int i = 0; i < p.n; ++i) {
        const double c = 0.5 * (grid.lo[static_cast<std::size_t>(i)] + grid.hi[static_cast<std::size_t>(i)]);
        const double w = 0.5 * (grid.hi[static_cast<std::size_t>(i)] - grid.lo[static_cast<std::size_t>(i)]) * scale;
        x[static_cast<std::size_t>(i)] = c + w * (2.0 * unit(rng) - 1.0);
      }
      if (p.controls.is_box()) {
        const BoxControls& bx = p.controls.as_box();
        v = bx.lo + (bx.hi - bx.lo).cwiseProduct(Vector::NullaryExpr(p.m, [&] { return unit(rng); }));
      } else {
        v = controls[static_cast<std::size_t>(unit(rng) * static_cast<double>(controls.size())) % controls.size()];
      }
      // perturb along a random direction in (x, v)
      const double step = 1e-4 * (1.0 + scale);
      v2 = v;
      double norm_sq = 0.0;
      for (int i = 0; i < p.n; ++i) {
        const double dx = (2.0 * unit(rng) - 1.0) * step;
        x2[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + dx;
        norm_sq += dx * dx;
      }
      if (p.controls.is_box()) {
        for (int k = 0; k < p.m; ++k) {
          const double dv = (2.0 * unit(rng) - 1.0) * step;
          v2[k] += dv;
          norm_sq += dv * dv;
        }
      }
      const double dist = std::sqrt(norm_sq);
      if (dist == 0.0) continue;
      try {
        const Coefficients c1 = p.evaluate(t, x, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
        const Coefficients c2 = p.evaluate(t, x2, std::span<const double>(v2.data(), static_cast<std::size_t>(v2.size())));
        rb = std::max(rb, (c1.b - c2.b).norm() / dist);
        rh = std::max(rh, c1.h.size() ? (c1.h - c2.h).norm() / dist : 0.0);
        rs = std::max(rs, (c1.sigma - c2.sigma).norm() / dist);
      } catch (const DomainError& e) {
        rep.warnings.push_back(std::string("coefficient evaluation failed during Lipschitz check: ") + e.what());
        return;
      }
    }
  };

  double nb = 0, nh = 0, ns = 0, fb = 0, fh = 0, fs = 0;
  sample_ratio(1.0, nb, nh, ns);
  sample_ratio(4.0, fb, fh, fs);
  rep.ratio_b = std::max(nb, fb);
  rep.ratio_h = std::max(nh, fh);
  rep.ratio_sigma = std::max(ns, fs);
  rep.ratio_near = std::max({nb, nh, ns});
  rep.ratio_far = std::max({fb, fh, fs});
  if (!std::isfinite(rep.ratio_far) || !std::isfinite(rep.ratio_near)) {
    rep.warnings.push_back("non-finite Lipschitz ratio for b, h or sigma");
  } else if (rep.ratio_far > 2.0 * rep.ratio_near + 1e-9) {
    rep.warnings.push_back("Lipschitz ratio of b, h or sigma grows with the sampling range (" +
                           std::to_string(rep.ratio_near) + " -> " + std::to_string(rep.ratio_far) +
                           "); coefficients may not be globally Lipschitz");
  }
  return rep;
}

}  // namespace gctl
