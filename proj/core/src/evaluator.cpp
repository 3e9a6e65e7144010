#include "admmopt/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "admmopt/errors.hpp"

namespace admmopt {

EvalRequest make_request(const SearchSpace& space, const CandidateConfig& candidate, std::uint64_t id) {
  const ActiveSet active = space.active_indices(candidate.z);
  if (candidate.cont.size() != space.cont_size() || candidate.ints.size() != space.int_size()) {
    throw std::invalid_argument("candidate layout does not match the search space");
  }
  EvalRequest request;
  request.id = id;
  request.z = candidate.z;
  request.ints.reserve(active.ints.size());
  for (std::size_t p : active.ints) request.ints.push_back({p, candidate.ints[p]});
  request.cont.reserve(active.cont.size());
  for (std::size_t p : active.cont) request.cont.push_back({p, candidate.cont[p]});
  return request;
}

nlohmann::json request_to_wire(const SearchSpace& space, const EvalRequest& request) {
  nlohmann::json z = nlohmann::json::object();
  for (std::size_t i = 0; i < request.z.choice.size(); ++i) {
    z[space.module_name(i)] = space.algorithm_name(i, request.z.choice[i]);
  }
  nlohmann::json ints = nlohmann::json::object();
  for (const auto& v : request.ints) ints[space.int_param(v.index).name] = v.value;
  nlohmann::json cont = nlohmann::json::object();
  for (const auto& v : request.cont) cont[space.cont_param(v.index).name] = v.value;
  return {{"id", request.id}, {"z", z}, {"theta_int", ints}, {"theta_cont", cont}};
}

Evaluator::BatchResult Evaluator::evaluate_batch(std::span<const EvalRequest> requests) {
  BatchResult result;
  result.outcomes.resize(requests.size());
  result.errors.resize(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    try {
      result.outcomes[i] = evaluate(requests[i]);
    } catch (const EvaluationError& e) {
      result.errors[i] = e.what();
      if (result.errors[i].empty()) result.errors[i] = "evaluation failed";
    }
  }
  return result;
}

std::string cache_key(const EvalRequest& request) {
  std::string key = "z";
  for (std::size_t c : request.z.choice) key += fmt::format(":{}", c);
  key += "|d";
  for (const auto& v : request.ints) key += fmt::format(":{}={}", v.index, v.value);
  key += "|c";
  for (const auto& v : request.cont) {
    const double q = std::round(v.value / kCacheQuantum);
    key += fmt::format(":{}={:.0f}", v.index, q == 0.0 ? 0.0 : q);
  }
  return key;
}

const EvalOutcome* EvaluationCache::find(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void EvaluationCache::store(const std::string& key, const EvalOutcome& outcome) {
  std::lock_guard lock(mutex_);
  entries_.insert_or_assign(key, outcome);
}

std::size_t EvaluationCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

EvalOutcome CachedEvaluator::evaluate(const EvalRequest& request) {
  const std::string key = cache_key(request);
  if (const EvalOutcome* hit = cache_.find(key)) {
    ++hits_;
    EvalOutcome out = *hit;
    out.candidate_id = request.id;
    return out;
  }
  ++misses_;
  EvalOutcome out = backend_.evaluate(request);  // errors are not cached
  cache_.store(key, out);
  return out;
}

double group_disparity(const GroupMetrics& metrics) {
  auto spread = [](const std::vector<double>& values) {
    if (values.size() < 2) throw std::invalid_argument("group disparity needs at least 2 groups");
    for (double v : values) {
      if (!std::isfinite(v)) throw std::invalid_argument("group metric is not finite");
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return *hi - *lo;
  };
  if (!metrics.folds.empty()) {
    double total = 0.0;
    for (const auto& fold : metrics.folds) total += spread(fold);
    return total / static_cast<double>(metrics.folds.size());
  }
  return spread(metrics.groups);
}

}  // namespace admmopt
