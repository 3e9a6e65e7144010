#include "admmopt/commands.hpp"

#include <chrono>
#include <fstream>
#include <memory>
#include <ostream>

#include <fmt/format.h>

#include "admmopt/errors.hpp"
#include "admmopt/subprocess.hpp"
#include "admmopt/synthetic.hpp"

namespace admmopt {

nlohmann::ordered_json make_report(const SearchSpace& space, const RunConfig& config, const RunResult& result,
                                   double wall_seconds) {
  nlohmann::ordered_json report;
  const Incumbent& inc = result.incumbent;
  if (inc.valid) {
    const EvalRequest active = make_request(space, inc.config, 0);
    nlohmann::ordered_json cfg;
    nlohmann::ordered_json z = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < active.z.choice.size(); ++i) {
      z[space.module_name(i)] = space.algorithm_name(i, active.z.choice[i]);
    }
    nlohmann::ordered_json ints = nlohmann::ordered_json::object();
    for (const auto& v : active.ints) ints[space.int_param(v.index).name] = v.value;
    nlohmann::ordered_json cont = nlohmann::ordered_json::object();
    for (const auto& v : active.cont) cont[space.cont_param(v.index).name] = v.value;
    cfg["z"] = std::move(z);
    cfg["theta_int"] = std::move(ints);
    cfg["theta_cont"] = std::move(cont);
    report["incumbent"] = std::move(cfg);
    report["loss"] = inc.loss;
    report["constraints"] = inc.constraints;
    report["feasible"] = inc.feasible;
    report["found_at"] = {{"eval_index", inc.eval_index}, {"wall_ms", inc.wall_ms}};
  } else {
    report["incumbent"] = nullptr;
    report["loss"] = nullptr;
    report["constraints"] = nlohmann::ordered_json::array();
    report["feasible"] = false;
    report["found_at"] = nullptr;
  }
  report["evaluations"] = result.evaluations;
  report["wall_time_s"] = wall_seconds;
  report["feasible_fraction"] = result.feasible_fraction();
  report["cache_hits"] = result.cache_hits;
  report["failures"] = result.failures;
  report["iterations"] = result.iterations;
  report["stop_reason"] = result.stop_reason;
  report["residual"] = result.residual;
  report["mode"] = config.constrained && !config.epsilons.empty() ? "constrained" : "unconstrained";
  report["epsilons"] = config.epsilons;
  report["seed"] = config.seed.value_or(0);
  report["solvers"] = {{"theta", config.theta_solver}, {"z", config.z_solver}};
  return report;
}

int run_with_config(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    validate_run_config(config);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  }
  if (config.budget_is_zero()) {
    err << "nothing to do: the evaluation budget is zero (set budget.max_evals or --max-evals)\n";
    return kExitBudgetZero;
  }

  std::unique_ptr<SyntheticBenchmark> builtin;
  std::unique_ptr<SearchSpace> owned_space;
  const SearchSpace* space = nullptr;
  try {
    if (!config.builtin.empty()) {
      try {
        builtin = make_builtin(config.builtin);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("evaluator.builtin", e.what());
      }
      space = &builtin->space();
    } else {
      try {
        owned_space = std::make_unique<SearchSpace>(build_space(*config.space));
      } catch (const ConfigError& e) {
        throw ConfigError(e.path().empty() ? "space" : "space." + e.path(), e.detail());
      }
      space = owned_space.get();
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  }

  std::unique_ptr<Evaluator> external;
  Evaluator* evaluator = builtin.get();
  if (!builtin) {
    SubprocessOptions sub;
    sub.command = config.command;
    sub.timeout = std::chrono::milliseconds(static_cast<long long>(config.timeout_s * 1000.0));
    if (!config.epsilons.empty()) sub.expected_constraints = config.epsilons.size();
    try {
      if (config.workers > 1) {
        external = std::make_unique<SubprocessPool>(*space, sub, config.workers);
      } else {
        external = std::make_unique<SubprocessEvaluator>(*space, sub);
      }
    } catch (const EvaluatorUnavailable& e) {
      err << "evaluator failure: " << e.what() << '\n';
      return kExitEvaluatorFailure;
    }
    evaluator = external.get();
  }

  std::ofstream trace_file;
  if (!config.trace_path.empty()) {
    trace_file.open(config.trace_path, std::ios::out | std::ios::trunc);
    if (!trace_file) {
      err << "config error: " << config.trace_path << ": cannot open trace file for writing\n";
      return kExitConfigError;
    }
  }

  AdmmOptions options;
  options.rho = config.rho;
  options.epsilons = config.epsilons;
  options.constrained = config.constrained;
  options.max_evals = config.max_evals;
  options.max_seconds = config.max_seconds;
  options.theta_budget = config.theta_budget;
  options.z_budget = config.z_budget;
  options.seed = *config.seed;
  options.random_init = config.random_init;
  options.clock = builtin ? ClockMode::kSimulated : ClockMode::kWall;
  if (trace_file.is_open()) {
    options.on_record = [&](const TraceRecord& r) { trace_file << trace_line(*space, r) << '\n'; };
  }

  auto theta_solver = make_continuous_solver(config.theta_solver);
  auto z_solver = make_combinatorial_solver(config.z_solver, {config.prior_alpha, config.prior_delta, config.f_hat});

  const auto started = std::chrono::steady_clock::now();
  RunResult result;
  try {
    result = run_admm(*space, *evaluator, *theta_solver, *z_solver, options);
  } catch (const EvaluatorUnavailable& e) {
    err << "evaluator failure: " << e.what() << '\n';
    return kExitEvaluatorFailure;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  trace_file.close();

  const auto report = make_report(*space, config, result, seconds);
  if (!config.report_path.empty()) {
    std::ofstream rep(config.report_path, std::ios::out | std::ios::trunc);
    if (!rep) {
      err << "config error: " << config.report_path << ": cannot open report file for writing\n";
      return kExitConfigError;
    }
    rep << report.dump(2) << '\n';
  }
  out << report.dump(2) << '\n';
  return kExitOk;
}

int run_command(const std::string& config_path, const RunOverrides& overrides, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = load_run_config(config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  }
  apply_overrides(config, overrides);
  return run_with_config(config, out, err);
}

int export_convergence(const std::string& trace_path, const std::string& csv_path, std::ostream& out,
                       std::ostream& err) {
  std::ifstream in(trace_path);
  if (!in) {
    err << "error: " << trace_path << ": cannot open trace file\n";
    return kExitConfigError;
  }
  const ConvergenceTable table = convergence_from_trace(in);
  if (csv_path.empty() || csv_path == "-") {
    write_convergence_csv(out, table);
  } else {
    std::ofstream csv(csv_path, std::ios::out | std::ios::trunc);
    if (!csv) {
      err << "error: " << csv_path << ": cannot open output file\n";
      return kExitConfigError;
    }
    write_convergence_csv(csv, table);
  }
  if (table.skipped > 0) err << "warning: skipped " << table.skipped << " malformed trace line(s)\n";
  return kExitOk;
}

}  // namespace admmopt
