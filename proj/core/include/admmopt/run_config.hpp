#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace admmopt {

/// Everything a run needs, after defaults and overrides.
///
/// Config document (JSON):
///   {
///     "space":      {"modules": [...]},          // required for command evaluators
///     "evaluator":  {"builtin": "mixed"} | {"command": "...", "workers": 1, "timeout_s": 300},
///     "solvers":    {"theta": "bo|random", "z": "exhaustive|random|cmab"},
///     "rho": 1.0, "f_hat": 0.7, "priors": 10 | {"alpha": 10, "delta": 10},
///     "epsilons":   [..],  "constrained": true,
///     "budget":     {"max_evals": 400, "max_seconds": 0},
///     "seed":       7,
///     "sub_budgets": {"theta": 16, "z": 8},
///     "random_init": false,
///     "output":     {"trace": "trace.jsonl", "report": "report.json"}
///   }
struct RunConfig {
  std::optional<nlohmann::json> space;
  std::string builtin;
  std::string command;
  std::size_t workers = 1;
  double timeout_s = 300.0;

  std::string theta_solver = "bo";
  std::string z_solver = "cmab";
  double rho = 1.0;
  double f_hat = 0.7;
  double prior_alpha = 10.0;
  double prior_delta = 10.0;
  std::vector<double> epsilons;
  bool constrained = true;

  std::size_t max_evals = 0;
  double max_seconds = 0.0;
  std::optional<std::uint64_t> seed;
  std::size_t theta_budget = 16;
  std::size_t z_budget = 8;
  bool random_init = false;

  std::string trace_path;
  std::string report_path;

  bool budget_is_zero() const noexcept { return max_evals == 0 && !(max_seconds > 0.0); }
};

/// Command-line flags; unset fields keep the config value.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_evals;
  std::optional<double> max_seconds;
  std::optional<std::string> theta_solver;
  std::optional<std::string> z_solver;
  std::optional<double> rho;
  std::optional<double> f_hat;
  std::vector<double> epsilons;  // non-empty replaces the config list
  std::optional<std::string> trace_out;
  std::optional<std::string> report_out;
  std::optional<std::string> evaluator_cmd;
  bool unconstrained = false;
};

/// Throws ConfigError whose path names the offending key.
RunConfig parse_run_config(const nlohmann::json& document);

/// Reads and parses a file; a missing or unreadable file is a ConfigError
/// naming the file.
RunConfig load_run_config(const std::string& path);

void apply_overrides(RunConfig& config, const RunOverrides& overrides);

/// Checks the merged configuration (solver names, positivity, seed present).
/// A zero budget is not an error here; see RunConfig::budget_is_zero.
void validate_run_config(const RunConfig& config);

}  // namespace admmopt
