#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "admmopt/evaluator.hpp"
#include "admmopt/search_space.hpp"

namespace admmopt {

enum class Phase { kTheta, kZ, kMultiplier };

std::string_view phase_name(Phase phase) noexcept;

/// One fresh black-box evaluation. Cache hits produce no record.
struct TraceRecord {
  std::size_t eval_index = 0;
  double wall_ms = 0.0;
  std::size_t admm_iter = 0;
  Phase phase = Phase::kTheta;
  ZAssignment z;
  std::vector<ActiveValue<std::int64_t>> theta_int;  // exactly what the evaluator received
  std::vector<ActiveValue<double>> theta_cont;
  double loss = 0.0;
  std::vector<double> constraints;
  bool feasible = true;
  double incumbent_loss = 0.0;
  bool failed = false;
};

/// Field order: eval_index, wall_ms, admm_iter, phase, z, theta_int,
/// theta_cont, loss, constraints, feasible, incumbent_loss[, failed].
nlohmann::ordered_json trace_to_json(const SearchSpace& space, const TraceRecord& record);

/// Single line, no trailing newline.
std::string trace_line(const SearchSpace& space, const TraceRecord& record);

/// The subset of a trace line needed for convergence curves.
struct TracePoint {
  std::size_t eval_index = 0;
  double wall_ms = 0.0;
  double loss = 0.0;
  bool feasible = true;
  bool failed = false;
};

/// Parses one trace line; nullopt if it is not a valid record.
std::optional<TracePoint> parse_trace_point(std::string_view line);

struct ConvergenceRow {
  double wall_ms = 0.0;
  double incumbent_loss = 0.0;
  std::optional<double> feasible_incumbent_loss;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  std::size_t skipped = 0;
};

/// Running best loss and running best feasible loss, one row per valid
/// trace line. Failed evaluations keep the previous incumbents.
ConvergenceTable convergence_from_trace(std::istream& in);

/// "wall_ms,incumbent_loss,feasible_incumbent_loss" plus one line per row;
/// the feasible column is empty until the first feasible evaluation.
void write_convergence_csv(std::ostream& out, const ConvergenceTable& table);

}  // namespace admmopt
