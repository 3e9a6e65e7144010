#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "admmopt/search_space.hpp"

namespace admmopt {

/// Fully resolved candidate: relaxed integers already rounded. Carries the
/// whole flat layout; only the active coordinates are sent anywhere.
struct CandidateConfig {
  ZAssignment z;
  std::vector<double> cont;
  std::vector<std::int64_t> ints;
};

template <typename T>
struct ActiveValue {
  std::size_t index = 0;  // flat index in the space layout
  T value{};
};

/// What an evaluator receives: the selection plus all and only the active
/// parameters of the selected algorithms.
struct EvalRequest {
  std::uint64_t id = 0;
  ZAssignment z;
  std::vector<ActiveValue<std::int64_t>> ints;
  std::vector<ActiveValue<double>> cont;
};

struct EvalOutcome {
  double loss = 0.0;
  std::vector<double> constraints;
  std::chrono::nanoseconds wall_time{0};
  std::uint64_t candidate_id = 0;
};

EvalRequest make_request(const SearchSpace& space, const CandidateConfig& candidate, std::uint64_t id);

/// Wire form {"id", "z", "theta_int", "theta_cont"} keyed by declared names.
nlohmann::json request_to_wire(const SearchSpace& space, const EvalRequest& request);

/// Black-box backend. Implementations throw EvaluationError for a failed
/// candidate and EvaluatorUnavailable when they cannot continue at all.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  virtual std::size_t num_constraints() const = 0;
  virtual EvalOutcome evaluate(const EvalRequest& request) = 0;

  /// Outcomes in request order. Default runs sequentially; failures are
  /// reported per slot so one bad candidate does not sink the batch.
  struct BatchResult {
    std::vector<EvalOutcome> outcomes;
    std::vector<std::string> errors;  // empty string = success
  };
  virtual BatchResult evaluate_batch(std::span<const EvalRequest> requests);
};

/// Canonical serialization of (z, ints, continuous values quantized to 1e-9).
std::string cache_key(const EvalRequest& request);

inline constexpr double kCacheQuantum = 1e-9;

/// Outcome cache; concurrent readers, exclusive writers.
class EvaluationCache {
 public:
  const EvalOutcome* find(const std::string& key) const;
  void store(const std::string& key, const EvalOutcome& outcome);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, EvalOutcome> entries_;
};

/// Wraps a backend with an EvaluationCache and hit/miss accounting.
class CachedEvaluator final : public Evaluator {
 public:
  explicit CachedEvaluator(Evaluator& backend) : backend_(backend) {}

  std::size_t num_constraints() const override { return backend_.num_constraints(); }
  EvalOutcome evaluate(const EvalRequest& request) override;

  std::size_t hits() const noexcept { return hits_; }
  std::size_t misses() const noexcept { return misses_; }
  const EvaluationCache& cache() const noexcept { return cache_; }

 private:
  Evaluator& backend_;
  EvaluationCache cache_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Per-group metric values for the group-disparity constraint. Holdout mode
/// uses `groups`; k-fold mode uses `folds` (one group list per fold).
struct GroupMetrics {
  std::vector<double> groups;
  std::vector<std::vector<double>> folds;
};

/// max - min over groups (holdout), or the fold average of per-fold max - min.
double group_disparity(const GroupMetrics& metrics);

}  // namespace admmopt
