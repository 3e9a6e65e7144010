#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

#include "admmopt/admm.hpp"
#include "admmopt/errors.hpp"
#include "log.hpp"

namespace admmopt {

CandidateConfig round_candidate(const SearchSpace& space, const ZAssignment& z, const ThetaVector& theta) {
  CandidateConfig c;
  c.z = z;
  c.cont.resize(space.cont_size());
  for (std::size_t k = 0; k < space.cont_size(); ++k) {
    const ContParam& p = space.cont_param(k);
    c.cont[k] = project_box(theta.cont.at(k), p.lower, p.upper);
  }
  c.ints.resize(space.int_size());
  for (std::size_t k = 0; k < space.int_size(); ++k) {
    const IntParam& p = space.int_param(k);
    c.ints[k] = project_and_round(theta.relaxed_int.at(k), p.lower, p.upper);
  }
  return c;
}

bool is_feasible(std::span<const double> gvals, std::span<const double> epsilons) {
  if (epsilons.empty() || gvals.size() != epsilons.size()) return true;
  for (std::size_t i = 0; i < gvals.size(); ++i) {
    if (!(gvals[i] <= epsilons[i])) return false;
  }
  return true;
}

bool better_candidate(double loss, bool feasible, double other_loss, bool other_feasible, bool constrained) {
  if (constrained && feasible != other_feasible) return feasible;
  return loss < other_loss;
}

namespace {

using Clock = std::chrono::steady_clock;

struct HistoryEntry {
  CandidateConfig candidate;
  EvalOutcome outcome;
};

// Cache, budget, failure policy, incumbent and trace for one run.
class Session {
 public:
  Session(const SearchSpace& space, Evaluator& evaluator, const AdmmOptions& options, RunResult& result)
      : space_(space), evaluator_(evaluator), options_(options), result_(result), start_(Clock::now()) {}

  const EvalOutcome* peek(const CandidateConfig& c) const { return cache_.find(cache_key(make_request(space_, c, 0))); }

  EvalOutcome evaluate(const CandidateConfig& c, Phase phase, std::size_t iter) {
    EvalRequest request = make_request(space_, c, 0);
    if (const EvalOutcome* hit = cache_.find(cache_key(request))) {
      ++result_.cache_hits;
      return *hit;
    }
    check_budget(1);
    request.id = next_id_++;
    EvalOutcome out;
    bool failed = false;
    try {
      out = checked(evaluator_.evaluate(request));
    } catch (const EvaluationError& e) {
      failed = !retry(request, e.what(), out);
    }
    record(c, request, out, failed, phase, iter);
    return out;
  }

  std::vector<EvalOutcome> evaluate_batch(std::span<const CandidateConfig> cs, Phase phase, std::size_t iter) {
    std::vector<EvalOutcome> outs(cs.size());
    std::vector<EvalRequest> requests;
    std::vector<std::size_t> owner;                  // candidate index of each request
    std::vector<std::size_t> source(cs.size(), 0);   // request slot serving each candidate
    std::vector<bool> from_cache(cs.size(), false);
    std::unordered_map<std::string, std::size_t> pending;
    bool truncated = false;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      EvalRequest request = make_request(space_, cs[i], 0);
      const std::string key = cache_key(request);
      if (const EvalOutcome* hit = cache_.find(key)) {
        ++result_.cache_hits;
        outs[i] = *hit;
        from_cache[i] = true;
        continue;
      }
      if (auto it = pending.find(key); it != pending.end()) {
        ++result_.cache_hits;
        source[i] = it->second;
        continue;
      }
      if (!affordable(requests.size() + 1)) {
        exhausted_reason_ = time_left() ? "budget" : "time";
        truncated = true;
        break;
      }
      pending.emplace(key, requests.size());
      source[i] = requests.size();
      owner.push_back(i);
      requests.push_back(std::move(request));
    }
    if (requests.empty() && truncated) check_budget(1);

    for (auto& r : requests) r.id = next_id_++;
    Evaluator::BatchResult batch = evaluator_.evaluate_batch(requests);
    std::vector<EvalOutcome> served(requests.size());
    for (std::size_t s = 0; s < requests.size(); ++s) {
      EvalOutcome out;
      bool failed = false;
      if (batch.errors[s].empty()) {
        try {
          out = checked(std::move(batch.outcomes[s]));
        } catch (const EvaluationError& e) {
          failed = !retry(requests[s], e.what(), out);
        }
      } else {
        failed = !retry(requests[s], batch.errors[s], out);
      }
      record(cs[owner[s]], requests[s], out, failed, phase, iter);
      served[s] = out;
    }
    if (truncated) throw BudgetExhausted();
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (!from_cache[i]) outs[i] = served[source[i]];
    }
    return outs;
  }

  std::size_t fresh() const noexcept { return result_.evaluations; }
  const std::vector<HistoryEntry>& history() const noexcept { return history_; }
  const std::string& exhausted_reason() const noexcept { return exhausted_reason_; }

  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
  }

 private:
  bool time_left() const { return !(options_.max_seconds > 0.0) || elapsed_ms() < options_.max_seconds * 1000.0; }

  bool affordable(std::size_t n) const {
    if (options_.max_evals > 0 && result_.evaluations + n > options_.max_evals) return false;
    return time_left();
  }

  void check_budget(std::size_t n) {
    if (options_.max_evals > 0 && result_.evaluations + n > options_.max_evals) {
      exhausted_reason_ = "budget";
      throw BudgetExhausted();
    }
    if (!time_left()) {
      exhausted_reason_ = "time";
      throw BudgetExhausted();
    }
  }

  EvalOutcome checked(EvalOutcome out) const {
    if (!std::isfinite(out.loss)) throw EvaluationError("evaluator returned a non-finite loss");
    if (out.constraints.size() != evaluator_.num_constraints()) {
      throw EvaluationError(fmt::format("evaluator returned {} constraint values, expected {}",
                                        out.constraints.size(), evaluator_.num_constraints()));
    }
    for (double g : out.constraints) {
      if (!std::isfinite(g)) throw EvaluationError("evaluator returned a non-finite constraint value");
    }
    return out;
  }

  // One more attempt under a fresh id; on failure fills `out` with the penalty outcome.
  bool retry(EvalRequest& request, const std::string& why, EvalOutcome& out) {
    log::warn("evaluation {} failed ({}); retrying once", request.id, why);
    request.id = next_id_++;
    try {
      out = checked(evaluator_.evaluate(request));
      return true;
    } catch (const EvaluationError& e) {
      log::warn("evaluation {} failed again ({}); scoring it as a failure", request.id, e.what());
    }
    out = failure_outcome(request.id);
    return false;
  }

  EvalOutcome failure_outcome(std::uint64_t id) const {
    EvalOutcome out;
    out.candidate_id = id;
    out.loss = worst_loss_ ? *worst_loss_ + 1.0 : 1.0;
    const std::size_t m = evaluator_.num_constraints();
    out.constraints.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      double base = i < worst_g_.size() ? worst_g_[i] : 0.0;
      if (i < options_.epsilons.size()) base = std::max(base, options_.epsilons[i]);
      out.constraints[i] = base + 1.0;
    }
    return out;
  }

  void record(const CandidateConfig& c, const EvalRequest& request, const EvalOutcome& out, bool failed, Phase phase,
              std::size_t iter) {
    const std::size_t index = result_.evaluations++;
    const bool feasible = !failed && is_feasible(out.constraints, options_.epsilons);
    if (feasible) ++result_.feasible_evaluations;
    const double wall_ms = options_.clock == ClockMode::kSimulated ? static_cast<double>(index + 1) : elapsed_ms();

    if (failed) {
      ++result_.failures;
    } else {
      worst_loss_ = worst_loss_ ? std::max(*worst_loss_, out.loss) : out.loss;
      if (worst_g_.size() < out.constraints.size()) {
        worst_g_.resize(out.constraints.size(), -std::numeric_limits<double>::infinity());
      }
      for (std::size_t i = 0; i < out.constraints.size(); ++i) worst_g_[i] = std::max(worst_g_[i], out.constraints[i]);
      cache_.store(cache_key(request), out);
      history_.push_back({c, out});

      Incumbent& inc = result_.incumbent;
      if (!inc.valid || better_candidate(out.loss, feasible, inc.loss, inc.feasible, options_.constrained)) {
        inc.valid = true;
        inc.config = c;
        inc.loss = out.loss;
        inc.constraints = out.constraints;
        inc.feasible = feasible;
        inc.eval_index = index;
        inc.wall_ms = wall_ms;
      }
    }

    TraceRecord rec;
    rec.eval_index = index;
    rec.wall_ms = wall_ms;
    rec.admm_iter = iter;
    rec.phase = phase;
    rec.z = request.z;
    rec.theta_int = request.ints;
    rec.theta_cont = request.cont;
    rec.loss = out.loss;
    rec.constraints = out.constraints;
    rec.feasible = feasible;
    rec.incumbent_loss = result_.incumbent.valid ? result_.incumbent.loss : out.loss;
    rec.failed = failed;
    if (options_.on_record) options_.on_record(rec);
    result_.trace.push_back(std::move(rec));
  }

  const SearchSpace& space_;
  Evaluator& evaluator_;
  const AdmmOptions& options_;
  RunResult& result_;
  Clock::time_point start_;
  EvaluationCache cache_;
  std::vector<HistoryEntry> history_;
  std::optional<double> worst_loss_;
  std::vector<double> worst_g_;
  std::uint64_t next_id_ = 1;
  std::string exhausted_reason_ = "budget";
};

// Coordinates of the theta-min search vector: [active cont | active ints | slacks].
struct ThetaLayout {
  ActiveSet active;
  std::size_t slacks = 0;

  std::size_t dim() const noexcept { return active.cont.size() + active.ints.size() + slacks; }
  std::size_t int_begin() const noexcept { return active.cont.size(); }
  std::size_t slack_begin() const noexcept { return active.cont.size() + active.ints.size(); }
};

}  // namespace

RunResult run_admm(const SearchSpace& space, Evaluator& evaluator, ContinuousSolver& theta_solver,
                   CombinatorialSolver& z_solver, const AdmmOptions& options) {
  if (options.max_evals == 0 && !(options.max_seconds > 0.0)) {
    throw std::invalid_argument("the evaluation budget must be positive");
  }
  const std::size_t m = evaluator.num_constraints();
  if (!options.epsilons.empty() && options.epsilons.size() != m) {
    throw std::invalid_argument(
        fmt::format("{} epsilon values given but the evaluator reports {} constraints", options.epsilons.size(), m));
  }
  const bool penalised = options.constrained && !options.epsilons.empty();

  RunResult result;
  Session session(space, evaluator, options, result);
  Rng rng(options.seed);
  std::vector<double> eps = penalised ? options.epsilons : std::vector<double>{};
  AdmmState& state = result.state;
  state = options.random_init ? random_initial_state(space, options.rho, eps, rng)
                              : initial_state(space, options.rho, eps);
  result.residual = consensus_residual(state.theta.relaxed_int, state.delta);

  std::size_t stable = 0;
  std::size_t idle = 0;
  std::size_t last_incumbent = std::numeric_limits<std::size_t>::max();
  bool warned_projection = false;

  try {
    for (;;) {
      const std::size_t fresh_before = session.fresh();
      const std::size_t iter = state.t;

      ThetaLayout layout{space.active_indices(state.z), penalised ? m : 0};
      const std::vector<double> b = consensus_target(state);
      Box box;
      for (std::size_t k : layout.active.cont) {
        box.lower.push_back(space.cont_param(k).lower);
        box.upper.push_back(space.cont_param(k).upper);
      }
      for (std::size_t k : layout.active.ints) {
        box.lower.push_back(static_cast<double>(space.int_param(k).lower));
        box.upper.push_back(static_cast<double>(space.int_param(k).upper));
      }
      for (std::size_t i = 0; i < layout.slacks; ++i) {
        box.lower.push_back(0.0);
        box.upper.push_back(state.epsilons[i]);
      }

      auto assemble = [&](std::span<const double> x) {
        ThetaVector theta = state.theta;
        for (std::size_t j = 0; j < layout.active.cont.size(); ++j) theta.cont[layout.active.cont[j]] = x[j];
        for (std::size_t j = 0; j < layout.active.ints.size(); ++j) {
          theta.relaxed_int[layout.active.ints[j]] = x[layout.int_begin() + j];
        }
        return theta;
      };
      auto slack_of = [&](std::span<const double> x) { return x.subspan(layout.slack_begin(), layout.slacks); };
      auto value_at = [&](const EvalOutcome& out, std::span<const double> x) {
        double v = out.loss;
        double pen = 0.0;
        for (std::size_t j = 0; j < layout.active.ints.size(); ++j) {
          const double diff = x[layout.int_begin() + j] - b[layout.active.ints[j]];
          pen += diff * diff;
        }
        v += 0.5 * state.rho * pen;
        if (penalised) v += constraint_penalty(out.constraints, slack_of(x), state);
        return v;
      };
      // Moves integer coordinates to the penalty minimiser inside their
      // rounding cell and slacks to their closed-form optimum.
      auto polish = [&](std::vector<double> x, const EvalOutcome& out) {
        for (std::size_t j = 0; j < layout.active.ints.size(); ++j) {
          const std::size_t k = layout.active.ints[j];
          const IntParam& p = space.int_param(k);
          double& v = x[layout.int_begin() + j];
          const std::int64_t r = project_and_round(v, p.lower, p.upper);
          const double rd = static_cast<double>(r);
          double t = std::clamp(b[k], std::max(static_cast<double>(p.lower), rd - 0.5),
                                std::min(static_cast<double>(p.upper), rd + 0.5));
          if (std::abs(t - rd) < 1e-9) t = rd;
          while (project_and_round(t, p.lower, p.upper) != r) t = std::nextafter(t, rd);
          v = t;
        }
        if (penalised) {
          const std::vector<double> u = best_slack(out.constraints, state);
          std::copy(u.begin(), u.end(), x.begin() + static_cast<std::ptrdiff_t>(layout.slack_begin()));
        }
        return x;
      };

      // theta-min
      ContinuousProblem problem;
      problem.box = box;
      problem.budget = options.theta_budget;
      problem.objective = [&](std::span<const double> xin) {
        std::vector<double> x(xin.begin(), xin.end());
        if (!box.contains(x)) {
          if (!warned_projection) {
            log::warn("theta solver proposed a point outside the box; projecting it back");
            warned_projection = true;
          }
          for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], box.lower[j], box.upper[j]);
        }
        const EvalOutcome out =
            session.evaluate(round_candidate(space, state.z, assemble(x)), Phase::kTheta, iter);
        return value_at(out, x);
      };
      {
        std::vector<Observation> warm;
        for (const HistoryEntry& h : session.history()) {
          if (h.candidate.z != state.z) continue;
          std::vector<double> x(layout.dim(), 0.0);
          for (std::size_t j = 0; j < layout.active.cont.size(); ++j) x[j] = h.candidate.cont[layout.active.cont[j]];
          for (std::size_t j = 0; j < layout.active.ints.size(); ++j) {
            x[layout.int_begin() + j] = static_cast<double>(h.candidate.ints[layout.active.ints[j]]);
          }
          x = polish(std::move(x), h.outcome);
          const double v = value_at(h.outcome, x);
          warm.push_back({std::move(x), v});
        }
        if (warm.size() > options.warm_start_cap) {
          std::stable_sort(warm.begin(), warm.end(),
                           [](const Observation& a, const Observation& c) { return a.value < c.value; });
          warm.resize(options.warm_start_cap);
        }
        problem.warm_start = std::move(warm);
      }
      const ContinuousResult solved = theta_solver.solve(problem, rng);
      std::vector<double> x = solved.x;
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], box.lower[j], box.upper[j]);
      if (const EvalOutcome* out = session.peek(round_candidate(space, state.z, assemble(x)))) {
        x = polish(std::move(x), *out);
      }
      state.theta = assemble(x);
      if (penalised) {
        const auto u = slack_of(x);
        state.u.assign(u.begin(), u.end());
      }

      // inactive integers and delta
      solve_inactive(space, state, inactive_ints(space, layout.active), state.theta.relaxed_int);
      state.delta = delta_min(space, state, state.theta.relaxed_int);

      // z-min
      ZProblem zp;
      zp.algorithm_counts = space.algorithm_counts();
      zp.budget = options.z_budget;
      auto z_value = [&](const EvalOutcome& out) {
        return out.loss + (penalised ? constraint_penalty(out.constraints, state.u, state) : 0.0);
      };
      zp.objective = [&](const ZAssignment& z) {
        return z_value(session.evaluate(round_candidate(space, z, state.theta), Phase::kZ, iter));
      };
      zp.batch_objective = [&](std::span<const ZAssignment> zs) {
        std::vector<CandidateConfig> cs;
        cs.reserve(zs.size());
        for (const auto& z : zs) cs.push_back(round_candidate(space, z, state.theta));
        const std::vector<EvalOutcome> outs = session.evaluate_batch(cs, Phase::kZ, iter);
        std::vector<double> values;
        values.reserve(outs.size());
        for (const auto& out : outs) values.push_back(z_value(out));
        return values;
      };
      state.z = z_solver.solve(zp, rng).z;

      // multipliers
      const double residual = update_lambda(state, state.theta.relaxed_int);
      if (penalised) {
        const EvalOutcome out =
            session.evaluate(round_candidate(space, state.z, state.theta), Phase::kMultiplier, iter);
        update_mu(state, out.constraints);
      }
      ++state.t;
      ++result.iterations;
      result.residual = residual;
      result.residual_history.push_back(residual);
      log::debug("iteration {}: residual {}, evaluations {}, incumbent {}", iter, residual, result.evaluations,
                 result.incumbent.valid ? result.incumbent.loss : std::nan(""));

      idle = session.fresh() == fresh_before ? idle + 1 : 0;
      const std::size_t current = result.incumbent.valid ? result.incumbent.eval_index : last_incumbent;
      stable = current == last_incumbent ? stable + 1 : 0;
      last_incumbent = current;
      if (residual == 0.0 && stable >= options.stall_iterations) {
        result.stop_reason = "converged";
        break;
      }
      if (idle >= options.idle_iterations) {
        result.stop_reason = "stalled";
        break;
      }
    }
  } catch (const BudgetExhausted&) {
    result.stop_reason = session.exhausted_reason();
  }
  result.wall_ms = options.clock == ClockMode::kSimulated ? static_cast<double>(result.evaluations)
                                                          : session.elapsed_ms();
  return result;
}

}  // namespace admmopt
