#pragma once

#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "admmopt/admm.hpp"
#include "admmopt/run_config.hpp"

namespace admmopt {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitEvaluatorFailure = 3,
  kExitBudgetZero = 4,
};

/// Final report: incumbent (active parameters only), loss, feasibility,
/// evaluation and cache counts, feasible fraction, stop reason, residual.
nlohmann::ordered_json make_report(const SearchSpace& space, const RunConfig& config, const RunResult& result,
                                   double wall_seconds);

/// Runs an already merged configuration. Writes the trace and report files
/// it names, prints the report to `out` and diagnostics to `err`.
int run_with_config(const RunConfig& config, std::ostream& out, std::ostream& err);

/// load_run_config + apply_overrides + run_with_config, mapping failures to
/// exit codes.
int run_command(const std::string& config_path, const RunOverrides& overrides, std::ostream& out, std::ostream& err);

/// Writes the convergence CSV of a trace file to `csv_path` ("-" = `out`).
/// Skipped lines are reported on `err`. Returns 0, or 2 if a file cannot be
/// opened.
int export_convergence(const std::string& trace_path, const std::string& csv_path, std::ostream& out,
                       std::ostream& err);

}  // namespace admmopt
