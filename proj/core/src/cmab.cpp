#include "admmopt/cmab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace admmopt {

namespace {

void check_counts(std::span<const std::size_t> counts) {
  if (counts.empty()) throw std::invalid_argument("no modules");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) throw std::invalid_argument(fmt::format("module {} has no algorithms", i));
  }
}

std::vector<double> evaluate_all(const ZProblem& problem, std::span<const ZAssignment> zs) {
  if (problem.batch_objective) {
    std::vector<double> values = problem.batch_objective(zs);
    if (values.size() != zs.size()) throw std::logic_error("batch objective returned the wrong number of values");
    return values;
  }
  std::vector<double> values;
  values.reserve(zs.size());
  for (const auto& z : zs) values.push_back(problem.objective(z));
  return values;
}

ZResult pick_best(std::span<const ZAssignment> zs, std::span<const double> values) {
  ZResult out;
  out.value = std::numeric_limits<double>::infinity();
  out.evaluations = zs.size();
  for (std::size_t i = 0; i < zs.size(); ++i) {
    if (i == 0 || values[i] < out.value) {
      out.z = zs[i];
      out.value = values[i];
    }
  }
  return out;
}

}  // namespace

std::vector<ZAssignment> enumerate_z(std::span<const std::size_t> algorithm_counts) {
  check_counts(algorithm_counts);
  std::vector<ZAssignment> all;
  ZAssignment z;
  z.choice.assign(algorithm_counts.size(), 0);
  for (;;) {
    all.push_back(z);
    std::size_t i = algorithm_counts.size();
    while (i > 0) {
      --i;
      if (++z.choice[i] < algorithm_counts[i]) break;
      z.choice[i] = 0;
      if (i == 0) return all;
    }
  }
}

ZAssignment random_z(std::span<const std::size_t> algorithm_counts, Rng& rng) {
  check_counts(algorithm_counts);
  ZAssignment z;
  for (std::size_t k : algorithm_counts) z.choice.push_back(std::uniform_int_distribution<std::size_t>(0, k - 1)(rng));
  return z;
}

ZResult ExhaustiveZSolver::solve(const ZProblem& problem, Rng&) {
  check_counts(problem.algorithm_counts);
  std::size_t total = 1;
  for (std::size_t k : problem.algorithm_counts) {
    if (total > cap_ / k) throw std::invalid_argument(fmt::format("more than {} combinations to enumerate", cap_));
    total *= k;
  }
  const std::vector<ZAssignment> all = enumerate_z(problem.algorithm_counts);
  const std::vector<double> values = evaluate_all(problem, all);
  return pick_best(all, values);
}

ZResult RandomZSolver::solve(const ZProblem& problem, Rng& rng) {
  if (problem.budget < 1) throw std::invalid_argument("z-min needs a budget of at least 1");
  std::vector<ZAssignment> draws;
  for (std::size_t k = 0; k < problem.budget; ++k) draws.push_back(random_z(problem.algorithm_counts, rng));
  const std::vector<double> values = evaluate_all(problem, draws);
  return pick_best(draws, values);
}

BanditState::BanditState(std::vector<std::size_t> algorithm_counts, BanditConfig cfg)
    : config(cfg), arms_per_module(std::move(algorithm_counts)) {
  check_counts(arms_per_module);
  if (!(config.alpha0 > 0.0) || !(config.delta0 > 0.0)) throw std::invalid_argument("Beta priors must be positive");
  if (!(config.f_hat > 0.0)) throw std::invalid_argument("f_hat must be positive");
  std::size_t total = 0;
  for (std::size_t k : arms_per_module) {
    arm_offset.push_back(total);
    total += k;
  }
  pulls.assign(total, 0);
  rewards.assign(total, 0);
}

double RngArmSampler::beta(double alpha, double delta) {
  const double x = std::gamma_distribution<double>(alpha, 1.0)(rng_);
  const double y = std::gamma_distribution<double>(delta, 1.0)(rng_);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

bool RngArmSampler::bernoulli(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }

ZAssignment select_arms(std::span<const double> omega, std::span<const std::size_t> algorithm_counts) {
  check_counts(algorithm_counts);
  std::size_t total = 0;
  for (std::size_t k : algorithm_counts) total += k;
  if (omega.size() != total) throw std::invalid_argument("omega does not cover every arm");
  ZAssignment z;
  std::size_t offset = 0;
  for (std::size_t k : algorithm_counts) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (omega[offset + j] > omega[offset + best]) best = j;
    }
    z.choice.push_back(best);
    offset += k;
  }
  return z;
}

double reward_from_loss(double loss, double f_hat) {
  if (std::isnan(loss)) return 0.0;
  return 1.0 - std::min(std::max(loss / f_hat, 0.0), 1.0);
}

RoundResult cmab_round(BanditState& state, const std::function<double(const ZAssignment&)>& objective,
                       ArmSampler& sampler) {
  std::vector<double> omega(state.num_arms());
  for (std::size_t a = 0; a < omega.size(); ++a) omega[a] = sampler.beta(state.alpha(a), state.delta(a));
  RoundResult out;
  out.z = select_arms(omega, state.arms_per_module);
  out.loss = objective(out.z);
  out.reward_probability = reward_from_loss(out.loss, state.config.f_hat);
  out.reward = sampler.bernoulli(out.reward_probability);
  for (std::size_t i = 0; i < out.z.choice.size(); ++i) {
    const std::size_t a = state.arm(i, out.z.choice[i]);
    ++state.pulls[a];
    if (out.reward) ++state.rewards[a];
  }
  ++state.rounds;
  return out;
}

ZResult CmabZSolver::solve(const ZProblem& problem, Rng& rng) {
  if (problem.budget < 1) throw std::invalid_argument("z-min needs a budget of at least 1");
  if (!initialised_ || state_.arms_per_module != problem.algorithm_counts) {
    state_ = BanditState(problem.algorithm_counts, config_);
    initialised_ = true;
  }
  RngArmSampler sampler(rng);
  ZResult out;
  for (std::size_t k = 0; k < problem.budget; ++k) {
    const RoundResult r = cmab_round(state_, problem.objective, sampler);
    ++out.evaluations;
    if (k == 0 || r.loss < out.value) {
      out.z = r.z;
      out.value = r.loss;
    }
  }
  return out;
}

std::unique_ptr<CombinatorialSolver> make_combinatorial_solver(const std::string& name, BanditConfig config) {
  if (name == "exhaustive") return std::make_unique<ExhaustiveZSolver>();
  if (name == "random") return std::make_unique<RandomZSolver>();
  if (name == "cmab") return std::make_unique<CmabZSolver>(config);
  throw std::invalid_argument(fmt::format("unknown z solver '{}' (expected exhaustive, random or cmab)", name));
}

ZResult solve_z_min(const std::string& strategy, const ZProblem& problem, Rng& rng) {
  return make_combinatorial_solver(strategy)->solve(problem, rng);
}

}  // namespace admmopt
