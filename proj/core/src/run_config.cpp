#include "admmopt/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "admmopt/errors.hpp"

namespace admmopt {

namespace {

using json = nlohmann::json;

const json* member(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path, "expected a finite number");
  return d;
}

std::size_t count(const json& v, const std::string& path) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError(path, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

bool flag(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
  return v.get<bool>();
}

const json& object(const json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError(path, "expected an object");
  return v;
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  object(doc, "");
  static const char* known[] = {"space", "evaluator", "solvers", "rho", "f_hat", "priors", "epsilons", "constrained",
                                "budget", "seed", "sub_budgets", "random_init", "output"};
  for (const auto& [key, _] : doc.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw ConfigError(key, "unknown key");
    }
  }

  RunConfig c;
  if (const json* s = member(doc, "space")) c.space = object(*s, "space");
  if (const json* e = member(doc, "evaluator")) {
    object(*e, "evaluator");
    const json* b = member(*e, "builtin");
    const json* cmd = member(*e, "command");
    if (b && cmd) throw ConfigError("evaluator", "give either builtin or command, not both");
    if (b) c.builtin = text(*b, "evaluator.builtin");
    if (cmd) c.command = text(*cmd, "evaluator.command");
    if (const json* w = member(*e, "workers")) c.workers = count(*w, "evaluator.workers");
    if (const json* t = member(*e, "timeout_s")) c.timeout_s = number(*t, "evaluator.timeout_s");
  }
  if (const json* s = member(doc, "solvers")) {
    object(*s, "solvers");
    if (const json* t = member(*s, "theta")) c.theta_solver = text(*t, "solvers.theta");
    if (const json* z = member(*s, "z")) c.z_solver = text(*z, "solvers.z");
  }
  if (const json* r = member(doc, "rho")) c.rho = number(*r, "rho");
  if (const json* f = member(doc, "f_hat")) c.f_hat = number(*f, "f_hat");
  if (const json* p = member(doc, "priors")) {
    if (p->is_number()) {
      c.prior_alpha = c.prior_delta = number(*p, "priors");
    } else {
      object(*p, "priors");
      if (const json* a = member(*p, "alpha")) c.prior_alpha = number(*a, "priors.alpha");
      if (const json* d = member(*p, "delta")) c.prior_delta = number(*d, "priors.delta");
    }
  }
  if (const json* e = member(doc, "epsilons")) {
    if (!e->is_array()) throw ConfigError("epsilons", "expected an array");
    for (std::size_t i = 0; i < e->size(); ++i) c.epsilons.push_back(number((*e)[i], fmt::format("epsilons[{}]", i)));
  }
  if (const json* k = member(doc, "constrained")) c.constrained = flag(*k, "constrained");
  if (const json* b = member(doc, "budget")) {
    object(*b, "budget");
    if (const json* n = member(*b, "max_evals")) c.max_evals = count(*n, "budget.max_evals");
    if (const json* s = member(*b, "max_seconds")) c.max_seconds = number(*s, "budget.max_seconds");
  }
  if (const json* s = member(doc, "seed")) {
    if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<long long>() >= 0)) {
      throw ConfigError("seed", "expected a non-negative integer");
    }
    c.seed = s->get<std::uint64_t>();
  }
  if (const json* s = member(doc, "sub_budgets")) {
    object(*s, "sub_budgets");
    if (const json* t = member(*s, "theta")) c.theta_budget = count(*t, "sub_budgets.theta");
    if (const json* z = member(*s, "z")) c.z_budget = count(*z, "sub_budgets.z");
  }
  if (const json* r = member(doc, "random_init")) c.random_init = flag(*r, "random_init");
  if (const json* o = member(doc, "output")) {
    object(*o, "output");
    if (const json* t = member(*o, "trace")) c.trace_path = text(*t, "output.trace");
    if (const json* r = member(*o, "report")) c.report_path = text(*r, "output.report");
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const json doc = json::parse(buffer.str(), nullptr, false);
  if (doc.is_discarded()) throw ConfigError(path, "config file is not valid JSON");
  try {
    return parse_run_config(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(e.path().empty() ? path : path + ": " + e.path(), e.detail());
  }
}

void apply_overrides(RunConfig& c, const RunOverrides& o) {
  if (o.seed) c.seed = o.seed;
  if (o.max_evals) c.max_evals = *o.max_evals;
  if (o.max_seconds) c.max_seconds = *o.max_seconds;
  if (o.theta_solver) c.theta_solver = *o.theta_solver;
  if (o.z_solver) c.z_solver = *o.z_solver;
  if (o.rho) c.rho = *o.rho;
  if (o.f_hat) c.f_hat = *o.f_hat;
  if (!o.epsilons.empty()) c.epsilons = o.epsilons;
  if (o.trace_out) c.trace_path = *o.trace_out;
  if (o.report_out) c.report_path = *o.report_out;
  if (o.evaluator_cmd) {
    c.command = *o.evaluator_cmd;
    c.builtin.clear();
  }
  if (o.unconstrained) c.constrained = false;
}

void validate_run_config(const RunConfig& c) {
  if (c.builtin.empty() && c.command.empty()) throw ConfigError("evaluator", "no evaluator configured");
  if (!c.command.empty() && !c.space) throw ConfigError("space", "a command evaluator needs a search space");
  if (!c.builtin.empty() && c.space) throw ConfigError("space", "builtin evaluators define their own space");
  if (c.workers == 0) throw ConfigError("evaluator.workers", "must be at least 1");
  if (!(c.timeout_s > 0.0)) throw ConfigError("evaluator.timeout_s", "must be positive");
  if (c.theta_solver != "bo" && c.theta_solver != "random") {
    throw ConfigError("solvers.theta", fmt::format("unknown solver '{}' (expected bo or random)", c.theta_solver));
  }
  if (c.z_solver != "exhaustive" && c.z_solver != "random" && c.z_solver != "cmab") {
    throw ConfigError("solvers.z",
                      fmt::format("unknown solver '{}' (expected exhaustive, random or cmab)", c.z_solver));
  }
  if (!(c.rho > 0.0)) throw ConfigError("rho", "must be positive");
  if (!(c.f_hat > 0.0)) throw ConfigError("f_hat", "must be positive");
  if (!(c.prior_alpha > 0.0)) throw ConfigError("priors.alpha", "must be positive");
  if (!(c.prior_delta > 0.0)) throw ConfigError("priors.delta", "must be positive");
  for (std::size_t i = 0; i < c.epsilons.size(); ++i) {
    if (!(c.epsilons[i] >= 0.0)) throw ConfigError(fmt::format("epsilons[{}]", i), "must be >= 0");
  }
  if (c.max_seconds < 0.0) throw ConfigError("budget.max_seconds", "must be >= 0");
  if (!c.seed) throw ConfigError("seed", "a seed is required (config key or --seed)");
  if (c.theta_budget < 1) throw ConfigError("sub_budgets.theta", "must be at least 1");
  if (c.z_budget < 1) throw ConfigError("sub_budgets.z", "must be at least 1");
}

}  // namespace admmopt
