#pragma once

#include <memory>
#include <string>
#include <vector>

#include "admmopt/evaluator.hpp"
#include "admmopt/search_space.hpp"

namespace admmopt {

/// Quadratic pull of one parameter toward its target.
struct SeparableTerm {
  double target = 0.0;
  double weight = 0.0;
};

/// Linear synthetic constraint: g = sum_i base[i][z_i] + sum_active slope_p * theta_p.
struct LinearConstraint {
  std::string name;
  std::vector<std::vector<double>> base;  // [module][algorithm]
  std::vector<double> cont_slope;         // per flat continuous index
  std::vector<double> int_slope;          // per flat integer index
};

/// Deterministic separable benchmark with a known global optimum:
///
///   loss = clip(c_z + sum_{active p} w_p (theta_p - target_p)^2, 0, 1)
///   c_z  = base_offset + sum_i module_offset[i][z_i]
///
/// Integer targets are integral, so the optimum lies on the lattice.
class SyntheticBenchmark final : public Evaluator {
 public:
  SyntheticBenchmark(std::string name, SearchSpace space, double base_offset,
                     std::vector<std::vector<double>> module_offsets, std::vector<SeparableTerm> cont_terms,
                     std::vector<SeparableTerm> int_terms, std::vector<LinearConstraint> constraints = {});

  const std::string& name() const noexcept { return name_; }
  const SearchSpace& space() const noexcept { return space_; }
  const std::vector<SeparableTerm>& cont_terms() const noexcept { return cont_terms_; }
  const std::vector<SeparableTerm>& int_terms() const noexcept { return int_terms_; }
  const std::vector<LinearConstraint>& constraints() const noexcept { return constraints_; }

  double offset(const ZAssignment& z) const;

  /// Lowest-offset combination with every parameter at its target.
  CandidateConfig optimum() const;
  double optimal_loss() const;

  std::size_t num_constraints() const override { return constraints_.size(); }
  EvalOutcome evaluate(const EvalRequest& request) override;

  /// Same objective on a full candidate (only active coordinates matter).
  EvalOutcome evaluate(const CandidateConfig& candidate) const;

 private:
  EvalOutcome score(const ZAssignment& z, const std::vector<ActiveValue<std::int64_t>>& ints,
                    const std::vector<ActiveValue<double>>& cont) const;

  std::string name_;
  SearchSpace space_;
  double base_offset_;
  std::vector<std::vector<double>> module_offsets_;
  std::vector<SeparableTerm> cont_terms_;
  std::vector<SeparableTerm> int_terms_;
  std::vector<LinearConstraint> constraints_;
};

/// Built-in benchmarks:
///  - "mixed":         3 modules (2 x 3 x 4 = 24 combinations), 5 continuous + 3 integer active dims.
///  - "mixed_latency": "mixed" plus one latency-like constraint; the threshold
///                     kMixedLatencyThreshold is met by 25% of the space.
///  - "pipeline":      6 x 3 x 6 = 108 combination space shaped like a small
///                     scaler / transformer / estimator pipeline.
std::unique_ptr<SyntheticBenchmark> make_builtin(const std::string& name);
std::vector<std::string> builtin_names();

inline constexpr double kMixedLatencyThreshold = 0.3;

}  // namespace admmopt
