#include "admmopt/continuous_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace admmopt {

bool Box::contains(std::span<const double> x) const {
  if (x.size() != dim()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
  }
  return true;
}

namespace {

void check_box(const Box& box) {
  if (box.lower.size() != box.upper.size()) throw std::invalid_argument("box bounds have different lengths");
  for (std::size_t i = 0; i < box.dim(); ++i) {
    if (!(box.lower[i] <= box.upper[i])) throw std::invalid_argument(fmt::format("box coordinate {} is inverted", i));
  }
}

std::vector<double> uniform_point(const Box& box, Rng& rng) {
  std::vector<double> x(box.dim());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = box.lower[i] == box.upper[i] ? box.lower[i]
                                        : std::uniform_real_distribution<double>(box.lower[i], box.upper[i])(rng);
  }
  return x;
}

// Tracks the best of warm-start and fresh observations.
struct Tracker {
  ContinuousResult result;
  bool any = false;

  void offer(const std::vector<double>& x, double value, bool warm) {
    if (!any || value < result.value) {
      result.x = x;
      result.value = value;
      result.from_warm_start = warm;
      any = true;
    }
  }
};

}  // namespace

std::vector<std::vector<double>> latin_hypercube(const Box& box, std::size_t n, Rng& rng) {
  check_box(box);
  std::vector<std::vector<double>> points(n, std::vector<double>(box.dim()));
  std::vector<std::size_t> strata(n);
  for (std::size_t j = 0; j < box.dim(); ++j) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    std::shuffle(strata.begin(), strata.end(), rng);
    const double width = box.upper[j] - box.lower[j];
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (static_cast<double>(strata[i]) + std::uniform_real_distribution<double>(0.0, 1.0)(rng)) /
                       static_cast<double>(n);
      points[i][j] = std::clamp(box.lower[j] + u * width, box.lower[j], box.upper[j]);
    }
  }
  return points;
}

ContinuousResult RandomSearchSolver::solve(const ContinuousProblem& problem, Rng& rng) {
  check_box(problem.box);
  Tracker best;
  for (const auto& w : problem.warm_start) best.offer(w.x, w.value, true);
  if (problem.box.dim() == 0 && problem.budget > 0) {
    best.offer({}, problem.objective({}), false);
    best.result.evaluations = 1;
    return best.result;
  }
  for (std::size_t k = 0; k < problem.budget; ++k) {
    std::vector<double> x = uniform_point(problem.box, rng);
    const double v = problem.objective(x);
    ++best.result.evaluations;
    best.offer(x, v, false);
  }
  if (!best.any) throw std::invalid_argument("nothing to return: zero budget and no warm start");
  return best.result;
}

ContinuousResult BayesOptSolver::solve(const ContinuousProblem& problem, Rng& rng) {
  const Box& box = problem.box;
  check_box(box);
  const std::size_t d = box.dim();

  Tracker best;
  std::vector<Observation> seen;
  for (const auto& w : problem.warm_start) {
    if (w.x.size() != d) throw std::invalid_argument("warm-start point has the wrong dimension");
    if (!std::isfinite(w.value)) continue;
    best.offer(w.x, w.value, true);
    seen.push_back(w);
  }

  std::size_t& used = best.result.evaluations;
  auto evaluate = [&](std::vector<double> x) {
    const double v = problem.objective(x);
    ++used;
    best.offer(x, v, false);
    if (std::isfinite(v)) seen.push_back({std::move(x), v});
  };

  if (d == 0) {
    if (problem.budget > 0) evaluate({});
    if (!best.any) throw std::invalid_argument("nothing to return: zero budget and no warm start");
    return best.result;
  }

  const auto wanted = std::max<std::size_t>(
      options_.min_design,
      static_cast<std::size_t>(std::ceil(options_.design_fraction * static_cast<double>(problem.budget))));
  const std::size_t design = std::min(problem.budget, wanted - std::min(wanted, seen.size()));
  for (auto& x : latin_hypercube(box, design, rng)) evaluate(std::move(x));

  std::vector<double> width(d);
  for (std::size_t j = 0; j < d; ++j) width[j] = box.upper[j] - box.lower[j];
  const std::vector<double> unit_lo(d, 0.0);
  const std::vector<double> unit_hi(d, 1.0);

  KernelParams params = last_params_;
  double noise = last_noise_;
  if (params.length_scales.size() != d) {
    params.amplitude = 1.0;
    params.length_scales.assign(d, 0.5);
    noise = 1e-6;
  }
  bool have_fit = false;
  std::size_t since_fit = 0;

  while (used < problem.budget) {
    // training set: the best max_train observations
    std::vector<std::size_t> order(seen.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (order.size() > options_.max_train) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return seen[a].value < seen[b].value; });
      order.resize(options_.max_train);
    }
    if (order.empty()) {
      evaluate(uniform_point(box, rng));
      continue;
    }
    const auto n = static_cast<Eigen::Index>(order.size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(d));
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Observation& o = seen[order[static_cast<std::size_t>(i)]];
      for (std::size_t j = 0; j < d; ++j) {
        x(i, static_cast<Eigen::Index>(j)) = width[j] > 0.0 ? (o.x[j] - box.lower[j]) / width[j] : 0.0;
      }
      y(i) = o.value;
    }
    if (options_.log_warp) {
      const double lo = y.minCoeff();
      const double offset = std::max(options_.warp_offset * (y.maxCoeff() - lo), 1e-12);
      y = (y.array() - lo + offset).log();
    }
    const double mean = y.mean();
    const double spread = std::sqrt((y.array() - mean).square().sum() / static_cast<double>(n));
    const double centre = mean + options_.prior_level * (y.maxCoeff() - mean);
    y = (y.array() - centre) / (spread > 1e-12 ? spread : 1.0);

    GpModel model(params, noise);
    model.set_data(std::move(x), std::move(y));
    if (model.size() >= 2 && (!have_fit || since_fit >= options_.refit_every)) {
      model = fit_hyperparams(model, rng, options_.fit);
      params = last_params_ = model.params();
      noise = last_noise_ = model.noise();
      have_fit = true;
      since_fit = 0;
    }

    Proposal p = propose_next(model, unit_lo, unit_hi, rng, options_.propose);
    if (p.degenerate) ++best.result.degenerate_proposals;
    std::vector<double> next(d);
    for (std::size_t j = 0; j < d; ++j) {
      next[j] = std::clamp(box.lower[j] + p.x[j] * width[j], box.lower[j], box.upper[j]);
    }
    evaluate(std::move(next));
    ++since_fit;
  }
  if (!best.any) throw std::invalid_argument("nothing to return: zero budget and no warm start");
  return best.result;
}

ContinuousResult solve_theta_min(const std::function<double(std::span<const double>)>& objective,
                                 std::span<const double> lower, std::span<const double> upper, std::size_t budget,
                                 Rng& rng) {
  if (budget < 2) throw std::invalid_argument("theta-min needs a budget of at least 2");
  ContinuousProblem problem;
  problem.box.lower.assign(lower.begin(), lower.end());
  problem.box.upper.assign(upper.begin(), upper.end());
  problem.objective = objective;
  problem.budget = budget;
  return BayesOptSolver().solve(problem, rng);
}

std::unique_ptr<ContinuousSolver> make_continuous_solver(const std::string& name) {
  if (name == "bo") return std::make_unique<BayesOptSolver>();
  if (name == "random") return std::make_unique<RandomSearchSolver>();
  throw std::invalid_argument(fmt::format("unknown theta solver '{}' (expected bo or random)", name));
}

}  // namespace admmopt
