#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "admmopt/gp.hpp"
#include "admmopt/search_space.hpp"

namespace admmopt {

/// Black-box objective over algorithm selections.
struct ZProblem {
  std::vector<std::size_t> algorithm_counts;  // K_i per module
  std::function<double(const ZAssignment&)> objective;
  /// Optional; when set, exhaustive and random search submit all their
  /// candidates at once. Must return one value per input, in order.
  std::function<std::vector<double>(std::span<const ZAssignment>)> batch_objective;
  std::size_t budget = 0;
};

struct ZResult {
  ZAssignment z;
  double value = 0.0;
  std::size_t evaluations = 0;
};

class CombinatorialSolver {
 public:
  virtual ~CombinatorialSolver() = default;
  virtual std::string name() const = 0;
  virtual ZResult solve(const ZProblem& problem, Rng& rng) = 0;
};

/// Every combination, in lexicographic order; the budget is ignored. Throws
/// std::invalid_argument when the space has more than `cap` combinations.
class ExhaustiveZSolver final : public CombinatorialSolver {
 public:
  explicit ExhaustiveZSolver(std::size_t cap = 4096) : cap_(cap) {}
  std::string name() const override { return "exhaustive"; }
  ZResult solve(const ZProblem& problem, Rng& rng) override;

 private:
  std::size_t cap_;
};

/// Best of `budget` uniform draws (with replacement).
class RandomZSolver final : public CombinatorialSolver {
 public:
  std::string name() const override { return "random"; }
  ZResult solve(const ZProblem& problem, Rng& rng) override;
};

struct BanditConfig {
  double alpha0 = 10.0;
  double delta0 = 10.0;
  double f_hat = 0.7;
};

/// Beta-Bernoulli posterior per arm; one arm per (module, algorithm).
struct BanditState {
  BanditConfig config;
  std::vector<std::size_t> arm_offset;  // first arm of each module
  std::vector<std::size_t> arms_per_module;
  std::vector<std::uint64_t> pulls;     // n_j
  std::vector<std::uint64_t> rewards;   // r_j <= n_j
  std::uint64_t rounds = 0;

  BanditState() = default;
  BanditState(std::vector<std::size_t> algorithm_counts, BanditConfig config);

  std::size_t num_arms() const noexcept { return pulls.size(); }
  std::size_t arm(std::size_t module, std::size_t algorithm) const { return arm_offset.at(module) + algorithm; }
  double alpha(std::size_t arm) const { return config.alpha0 + static_cast<double>(rewards.at(arm)); }
  double delta(std::size_t arm) const {
    return config.delta0 + static_cast<double>(pulls.at(arm) - rewards.at(arm));
  }
};

/// Source of the two random draws in a bandit round; swappable in tests.
class ArmSampler {
 public:
  virtual ~ArmSampler() = default;
  virtual double beta(double alpha, double delta) = 0;
  virtual bool bernoulli(double p) = 0;
};

class RngArmSampler final : public ArmSampler {
 public:
  explicit RngArmSampler(Rng& rng) : rng_(rng) {}
  double beta(double alpha, double delta) override;
  bool bernoulli(double p) override;

 private:
  Rng& rng_;
};

/// Per module, the arm with the largest omega; ties go to the lowest index.
ZAssignment select_arms(std::span<const double> omega, std::span<const std::size_t> algorithm_counts);

/// 1 - min(max(loss / f_hat, 0), 1); NaN maps to 0.
double reward_from_loss(double loss, double f_hat);

struct RoundResult {
  ZAssignment z;
  double loss = 0.0;
  double reward_probability = 0.0;
  bool reward = false;
};

/// One Thompson-sampling round. If the objective throws, the state is left
/// untouched and the exception propagates.
RoundResult cmab_round(BanditState& state, const std::function<double(const ZAssignment&)>& objective,
                       ArmSampler& sampler);

/// Thompson sampling with a posterior that persists across solve() calls.
/// Returns the best observed loss of the call.
class CmabZSolver final : public CombinatorialSolver {
 public:
  explicit CmabZSolver(BanditConfig config = {}) : config_(config) {}
  std::string name() const override { return "cmab"; }
  ZResult solve(const ZProblem& problem, Rng& rng) override;

  const BanditState& state() const noexcept { return state_; }

 private:
  BanditConfig config_;
  BanditState state_;
  bool initialised_ = false;
};

/// All combinations, module 0 most significant.
std::vector<ZAssignment> enumerate_z(std::span<const std::size_t> algorithm_counts);

/// Uniform random selection.
ZAssignment random_z(std::span<const std::size_t> algorithm_counts, Rng& rng);

/// Dispatch by strategy name: "exhaustive", "random" or "cmab".
ZResult solve_z_min(const std::string& strategy, const ZProblem& problem, Rng& rng);

std::unique_ptr<CombinatorialSolver> make_combinatorial_solver(const std::string& name, BanditConfig config = {});

}  // namespace admmopt
