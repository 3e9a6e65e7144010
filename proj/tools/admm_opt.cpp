#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "admmopt/commands.hpp"
#include "admmopt/logging.hpp"

int main(int argc, char** argv) {
  admmopt::init_logging_from_env();

  CLI::App app{"Mixed continuous-integer black-box optimisation by ADMM"};
  app.require_subcommand(1);

  std::string config_path;
  admmopt::RunOverrides o;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_evals;
  std::optional<double> max_seconds, rho, f_hat;
  std::optional<std::string> theta_solver, z_solver, trace_out, report_out, evaluator_cmd;

  CLI::App* run = app.add_subcommand("run", "Optimise the problem described by a config file");
  run->add_option("--config", config_path, "Run configuration (JSON)")->required();
  run->add_option("--seed", seed, "Random seed");
  run->add_option("--max-evals", max_evals, "Evaluation budget");
  run->add_option("--max-seconds", max_seconds, "Wall-clock budget in seconds");
  run->add_option("--theta-solver", theta_solver, "bo | random");
  run->add_option("--z-solver", z_solver, "exhaustive | random | cmab");
  run->add_option("--rho", rho, "ADMM penalty parameter");
  run->add_option("--f-hat", f_hat, "Loss upper bound for bandit rewards");
  run->add_option("--epsilon", o.epsilons, "Constraint threshold (repeat once per constraint)")->take_all();
  run->add_option("--trace-out", trace_out, "Trace file (JSON lines)");
  run->add_option("--report-out", report_out, "Report file (JSON)");
  run->add_option("--evaluator-cmd", evaluator_cmd, "External evaluator command line");
  run->add_flag("--unconstrained", o.unconstrained, "Ignore constraints during the search; thresholds only classify");

  std::string trace_path;
  std::string csv_path = "-";
  CLI::App* exp = app.add_subcommand("export-convergence", "Convert a trace into a convergence CSV");
  exp->add_option("trace", trace_path, "Trace file")->required();
  exp->add_option("-o,--output", csv_path, "CSV file, - for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : admmopt::kExitConfigError;
  }

  if (*run) {
    o.seed = seed;
    o.max_evals = max_evals;
    o.max_seconds = max_seconds;
    o.theta_solver = theta_solver;
    o.z_solver = z_solver;
    o.rho = rho;
    o.f_hat = f_hat;
    o.trace_out = trace_out;
    o.report_out = report_out;
    o.evaluator_cmd = evaluator_cmd;
    return admmopt::run_command(config_path, o, std::cout, std::cerr);
  }
  return admmopt::export_convergence(trace_path, csv_path, std::cout, std::cerr);
}
