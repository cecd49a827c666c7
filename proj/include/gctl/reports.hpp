#pragma once

#include "gctl/grid.hpp"
#include "gctl/problem.hpp"

#include <cstdint>
#include <exception>
#include <string>
#include <vector>

namespace gctl {

/// Normalized discrete regularity of a value field over the central region:
///   space: |V(t,x) - V(t,x')| / ((1 + |x| + |x'|) |x - x'|)
///   time:  |V(t,x) - V(t+d,x)| / ((1 + |x|^2) sqrt(d))
/// maximized over node pairs at strides 1, 2, 4, ... along each axis and
/// over layer pairs at strides 1, 2, 4, ...
struct RegularityMetrics {
  double space_ratio = 0.0;
  double time_ratio = 0.0;
};

RegularityMetrics regularity_report(const ValueField& v);

struct RegularityComparison {
  RegularityMetrics coarse;
  RegularityMetrics fine;
  double space_growth = 0.0;  // fine / coarse - 1, 0 when both are below the floor
  double time_growth = 0.0;
  bool passed = false;        // both growths <= 0.5
};

RegularityComparison compare_regularity(const RegularityMetrics& coarse, const RegularityMetrics& fine,
                                        double floor = 1e-8);

enum class Suite { Regularity, Moments, Dpp, All };

/// Throws ConfigError on an unknown name.
Suite parse_suite(const std::string& name);

struct CheckItem {
  std::string suite;
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  std::string relation;  // "<=", ">=" or "finite"
  bool passed = false;
  std::string detail;
};

struct CheckOptions {
  std::uint64_t seed = 1;
  int threads = 1;
  std::size_t paths = 2000;
  double closed_form_tolerance = 2e-2;
};

struct CheckReport {
  std::string config_name;
  std::string suite;
  std::vector<CheckItem> checks;
  std::string status;  // "pass", "fail" or "error"
  int exit_code = 0;   // 0 pass, 2 configuration error, 3 solver error, 4 check failure
  std::string error_type;
  std::string error_message;
};

/// Runs the selected checks. Library errors are captured in the report.
CheckReport run_check_suite(const LoadedProblem& problem, Suite suite, const CheckOptions& opts = {});

/// Report for a failure that happened before any check could run.
CheckReport error_report(const std::string& config_name, const std::string& suite, const std::exception& e);

std::string to_json(const CheckReport& report);

/// Class name of a library error (e.g. "NoNondegenerateComponent").
std::string error_type_name(const std::exception& e);

/// 2 for configuration errors, 3 for solver errors, 1 otherwise.
int exit_code_for(const std::exception& e);

}  // namespace gctl
