#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "admmopt/admm_state.hpp"
#include "admmopt/cmab.hpp"
#include "admmopt/continuous_solvers.hpp"
#include "admmopt/evaluator.hpp"
#include "admmopt/search_space.hpp"
#include "admmopt/trace.hpp"

namespace admmopt {

enum class ClockMode {
  kSimulated,  // wall_ms = evaluation count; byte-identical traces
  kWall,       // real elapsed time
};

struct AdmmOptions {
  double rho = 1.0;
  /// Thresholds epsilon_i, one per evaluator constraint, or none for an
  /// unconstrained run. With constrained = false they only classify
  /// feasibility.
  std::vector<double> epsilons;
  bool constrained = true;

  std::size_t max_evals = 0;   // 0 = no limit (then max_seconds must be set)
  double max_seconds = 0.0;    // 0 = no limit
  std::size_t theta_budget = 16;
  std::size_t z_budget = 8;

  std::uint64_t seed = 0;
  bool random_init = false;
  std::size_t stall_iterations = 3;     // incumbent unchanged this long with zero residual -> stop
  std::size_t idle_iterations = 50;     // iterations without a fresh evaluation -> stop
  std::size_t warm_start_cap = 24;
  ClockMode clock = ClockMode::kSimulated;

  /// Called for every trace record as soon as it exists.
  std::function<void(const TraceRecord&)> on_record;
};

struct Incumbent {
  bool valid = false;
  CandidateConfig config;
  double loss = 0.0;
  std::vector<double> constraints;
  bool feasible = false;
  std::size_t eval_index = 0;
  double wall_ms = 0.0;
};

struct RunResult {
  Incumbent incumbent;
  std::vector<TraceRecord> trace;
  AdmmState state;
  std::size_t evaluations = 0;
  std::size_t cache_hits = 0;
  std::size_t failures = 0;
  std::size_t feasible_evaluations = 0;
  std::size_t iterations = 0;
  double wall_ms = 0.0;
  /// budget | time | converged | stalled
  std::string stop_reason;
  /// Consensus residual after the last completed iteration (or of the
  /// initial iterate when none completed).
  double residual = 0.0;
  std::vector<double> residual_history;

  double feasible_fraction() const noexcept {
    return evaluations == 0 ? 0.0 : static_cast<double>(feasible_evaluations) / static_cast<double>(evaluations);
  }
};

/// Alternates theta-min (continuous solver on the active box, plus slack
/// coordinates when constrained), the inactive projection, delta-min, z-min
/// (combinatorial solver), and the multiplier updates until the budget is
/// spent or the iterate settles.
///
/// Throws std::invalid_argument for a zero budget or mismatched epsilons,
/// and lets EvaluatorUnavailable through. Failed candidates are retried once
/// and then scored as worst-seen loss + 1.
RunResult run_admm(const SearchSpace& space, Evaluator& evaluator, ContinuousSolver& theta_solver,
                   CombinatorialSolver& z_solver, const AdmmOptions& options);

/// The candidate the evaluator sees for a relaxed iterate: every relaxed
/// integer rounded onto its range.
CandidateConfig round_candidate(const SearchSpace& space, const ZAssignment& z, const ThetaVector& theta);

/// Ranking used for the incumbent: feasibility first when `constrained`,
/// then lower loss.
bool better_candidate(double loss, bool feasible, double other_loss, bool other_feasible, bool constrained);

bool is_feasible(std::span<const double> gvals, std::span<const double> epsilons);

}  // namespace admmopt
