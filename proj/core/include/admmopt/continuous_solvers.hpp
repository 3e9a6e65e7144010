#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "admmopt/gp.hpp"

namespace admmopt {

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const noexcept { return lower.size(); }
  bool contains(std::span<const double> x) const;
};

struct Observation {
  std::vector<double> x;
  double value = 0.0;
};

/// A bounded black-box minimisation task. `objective` may throw (the
/// exception propagates out of the solver untouched).
struct ContinuousProblem {
  Box box;
  std::function<double(std::span<const double>)> objective;
  std::size_t budget = 0;
  /// Points already known, e.g. from earlier iterations; they inform the
  /// model but do not count against the budget.
  std::vector<Observation> warm_start;
};

struct ContinuousResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  std::size_t degenerate_proposals = 0;
  bool from_warm_start = false;  // best point came from warm_start, not a fresh call
};

class ContinuousSolver {
 public:
  virtual ~ContinuousSolver() = default;
  virtual std::string name() const = 0;
  /// Never calls the objective more than problem.budget times.
  virtual ContinuousResult solve(const ContinuousProblem& problem, Rng& rng) = 0;
};

/// Uniform random points in the box.
class RandomSearchSolver final : public ContinuousSolver {
 public:
  std::string name() const override { return "random"; }
  ContinuousResult solve(const ContinuousProblem& problem, Rng& rng) override;
};

struct BayesOptOptions {
  /// Fresh design points: max(min_design, ceil(budget * design_fraction)),
  /// less the number of warm-start points, never below zero.
  double design_fraction = 0.25;
  std::size_t min_design = 2;
  std::size_t refit_every = 5;
  std::size_t max_train = 120;
  /// Fit the GP to log(y - min y + warp_offset * (max y - min y)) instead of
  /// y, which spreads out the values near the best observation.
  bool log_warp = true;
  double warp_offset = 0.01;
  /// Where the GP prior mean sits between the mean (0) and the worst (1)
  /// training value.
  double prior_level = 1.0;
  FitOptions fit;
  ProposeOptions propose;
};

/// GP regression with ARD Matern 5/2 and expected improvement. Inputs are
/// mapped to the unit cube and outputs standardised before fitting.
/// Kernel parameters fitted in one solve() seed the first fit of the next
/// solve() of the same dimension.
class BayesOptSolver final : public ContinuousSolver {
 public:
  explicit BayesOptSolver(BayesOptOptions options = {}) : options_(std::move(options)) {}
  std::string name() const override { return "bo"; }
  ContinuousResult solve(const ContinuousProblem& problem, Rng& rng) override;

 private:
  BayesOptOptions options_;
  KernelParams last_params_;
  double last_noise_ = 1e-6;
};

/// Stratified (Latin hypercube) sample of n points in the box.
std::vector<std::vector<double>> latin_hypercube(const Box& box, std::size_t n, Rng& rng);

/// GP-EI minimisation of `objective` over [lower, upper] with at most
/// `budget` calls. Throws std::invalid_argument for budget < 2.
ContinuousResult solve_theta_min(const std::function<double(std::span<const double>)>& objective,
                                 std::span<const double> lower, std::span<const double> upper, std::size_t budget,
                                 Rng& rng);

std::unique_ptr<ContinuousSolver> make_continuous_solver(const std::string& name);

}  // namespace admmopt
