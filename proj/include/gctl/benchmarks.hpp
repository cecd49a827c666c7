#pragma once

#include "gctl/expr.hpp"
#include "gctl/problem.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gctl {

/// A built-in problem with a known value function.
struct BenchmarkEntry {
  std::string name;
  std::string description;
  std::string closed_form_text;
  std::string provenance;
  std::string config_json;
  LoadedProblem loaded;
  Expr closed_form;  // V(t, x)
  double tolerance = 0.0;
  Vector probe;      // point where V(0, .) is reported
};

/// The six registered benchmarks. Each closed form is checked against the
/// HJB residual when the registry is first built.
const std::vector<BenchmarkEntry>& builtin_registry();

/// Case-insensitive lookup; '_' and '-' are interchangeable. Throws
/// UnknownBuiltin with the closest name as a suggestion.
const BenchmarkEntry& find_builtin(std::string_view name);

/// d_t V + min over the discretized controls of H(t, x, D V, D^2 V, v) for the
/// closed form, with derivatives taken symbolically.
double closed_form_residual(const BenchmarkEntry& entry, double t, const Vector& x);

/// Max |residual| over `samples` random points with t in [0, 0.9 T] and x in
/// the central region of the grid.
double max_closed_form_residual(const BenchmarkEntry& entry, int samples = 200, std::uint64_t seed = 20);

/// Levenshtein distance, used for suggestions.
std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace gctl
