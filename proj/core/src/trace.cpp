#include "admmopt/trace.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include <fmt/format.h>

namespace admmopt {

std::string_view phase_name(Phase phase) noexcept {
  switch (phase) {
    case Phase::kTheta:
      return "theta";
    case Phase::kZ:
      return "z";
    case Phase::kMultiplier:
      return "multiplier";
  }
  return "theta";
}

nlohmann::ordered_json trace_to_json(const SearchSpace& space, const TraceRecord& r) {
  nlohmann::ordered_json z = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < r.z.choice.size(); ++i) z[space.module_name(i)] = space.algorithm_name(i, r.z.choice[i]);
  nlohmann::ordered_json ints = nlohmann::ordered_json::object();
  for (const auto& v : r.theta_int) ints[space.int_param(v.index).name] = v.value;
  nlohmann::ordered_json cont = nlohmann::ordered_json::object();
  for (const auto& v : r.theta_cont) cont[space.cont_param(v.index).name] = v.value;

  nlohmann::ordered_json j;
  j["eval_index"] = r.eval_index;
  j["wall_ms"] = r.wall_ms;
  j["admm_iter"] = r.admm_iter;
  j["phase"] = phase_name(r.phase);
  j["z"] = std::move(z);
  j["theta_int"] = std::move(ints);
  j["theta_cont"] = std::move(cont);
  j["loss"] = r.loss;
  j["constraints"] = r.constraints;
  j["feasible"] = r.feasible;
  j["incumbent_loss"] = r.incumbent_loss;
  if (r.failed) j["failed"] = true;
  return j;
}

std::string trace_line(const SearchSpace& space, const TraceRecord& record) {
  return trace_to_json(space, record).dump();
}

std::optional<TracePoint> parse_trace_point(std::string_view line) {
  const auto j = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto number = [&](const char* key) { return j.contains(key) && j[key].is_number(); };
  if (!number("eval_index") || !number("wall_ms") || !number("loss") || !j.contains("feasible") ||
      !j["feasible"].is_boolean()) {
    return std::nullopt;
  }
  TracePoint p;
  p.eval_index = j["eval_index"].get<std::size_t>();
  p.wall_ms = j["wall_ms"].get<double>();
  p.loss = j["loss"].get<double>();
  p.feasible = j["feasible"].get<bool>();
  p.failed = j.contains("failed") && j["failed"].is_boolean() && j["failed"].get<bool>();
  if (!std::isfinite(p.wall_ms) || !std::isfinite(p.loss)) return std::nullopt;
  return p;
}

ConvergenceTable convergence_from_trace(std::istream& in) {
  ConvergenceTable table;
  double best = std::numeric_limits<double>::infinity();
  std::optional<double> best_feasible;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto p = parse_trace_point(line);
    if (!p) {
      ++table.skipped;
      continue;
    }
    if (!p->failed) {
      best = std::min(best, p->loss);
      if (p->feasible && (!best_feasible || p->loss < *best_feasible)) best_feasible = p->loss;
    }
    table.rows.push_back({p->wall_ms, best, best_feasible});
  }
  return table;
}

void write_convergence_csv(std::ostream& out, const ConvergenceTable& table) {
  out << "wall_ms,incumbent_loss,feasible_incumbent_loss\n";
  for (const auto& r : table.rows) {
    out << fmt::format("{},{}", r.wall_ms, std::isfinite(r.incumbent_loss) ? fmt::format("{}", r.incumbent_loss) : "");
    out << ',';
    if (r.feasible_incumbent_loss) out << fmt::format("{}", *r.feasible_incumbent_loss);
    out << '\n';
  }
}

}  // namespace admmopt
