#include "admmopt/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>
#include <stdexcept>

#include "admmopt/box_minimizer.hpp"

namespace admmopt {

namespace {

constexpr double kSqrt5 = 2.23606797749978969640917366873128;

// Kernel shape as a function of r, amplitude factored out.
inline double matern_shape(double r) {
  const double s = kSqrt5 * r;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

// -(1/r) d(shape)/dr = (5/3)(1 + sqrt5 r) exp(-sqrt5 r); finite at r = 0.
inline double matern_slope(double r) {
  const double s = kSqrt5 * r;
  return (5.0 / 3.0) * (1.0 + s) * std::exp(-s);
}

}  // namespace

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double matern52(std::span<const double> x, std::span<const double> x_prime, const KernelParams& params) {
  if (x.size() != x_prime.size() || x.size() != params.length_scales.size()) {
    throw std::invalid_argument("kernel inputs have mismatched dimensions");
  }
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = (x[i] - x_prime[i]) / params.length_scales[i];
    r2 += d * d;
  }
  return params.amplitude * params.amplitude * matern_shape(std::sqrt(r2));
}

GpModel::GpModel(KernelParams params, double noise)
    : params_(std::move(params)), noise_(std::max(noise, kNoiseFloor)), effective_noise_(noise_) {
  if (!(params_.amplitude > 0.0)) throw std::invalid_argument("kernel amplitude must be positive");
  for (double l : params_.length_scales) {
    if (!(l > 0.0)) throw std::invalid_argument("length scales must be positive");
  }
  inv_sq_scales_.resize(params_.length_scales.size());
  for (std::size_t i = 0; i < inv_sq_scales_.size(); ++i) {
    inv_sq_scales_[i] = 1.0 / (params_.length_scales[i] * params_.length_scales[i]);
  }
  x_.resize(0, static_cast<Eigen::Index>(dim()));
}

void GpModel::set_params(KernelParams params, double noise) {
  GpModel fresh(std::move(params), noise);
  if (fresh.dim() != dim()) throw std::invalid_argument("parameter dimension mismatch");
  params_ = std::move(fresh.params_);
  noise_ = fresh.noise_;
  inv_sq_scales_ = std::move(fresh.inv_sq_scales_);
  if (fitted()) refactor();
}

void GpModel::set_data(Eigen::MatrixXd x, Eigen::VectorXd y) {
  if (x.cols() != static_cast<Eigen::Index>(dim()) || x.rows() != y.size()) {
    throw std::invalid_argument("training data shape mismatch");
  }
  x_ = std::move(x);
  y_ = std::move(y);
  refactor();
}

void GpModel::append(std::span<const double> x, double y) {
  if (x.size() != dim()) throw std::invalid_argument("training point dimension mismatch");
  const Eigen::Index n = x_.rows();
  x_.conservativeResize(n + 1, Eigen::NoChange);
  y_.conservativeResize(n + 1);
  for (std::size_t j = 0; j < x.size(); ++j) x_(n, static_cast<Eigen::Index>(j)) = x[j];
  y_(n) = y;
  refactor();
}

void GpModel::refactor() {
  const Eigen::Index n = x_.rows();
  const double amp2 = params_.amplitude * params_.amplitude;
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    gram(i, i) = amp2;
    for (Eigen::Index j = 0; j < i; ++j) {
      double r2 = 0.0;
      for (Eigen::Index k = 0; k < x_.cols(); ++k) {
        const double d = x_(i, k) - x_(j, k);
        r2 += d * d * inv_sq_scales_[static_cast<std::size_t>(k)];
      }
      gram(i, j) = gram(j, i) = amp2 * matern_shape(std::sqrt(r2));
    }
  }
  effective_noise_ = noise_;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::MatrixXd cov = gram;
    cov.diagonal().array() += effective_noise_;
    llt_.compute(cov);
    if (llt_.info() == Eigen::Success) break;
    effective_noise_ = std::max(effective_noise_ * 10.0, 1e-10 * amp2);
  }
  if (llt_.info() != Eigen::Success) throw std::runtime_error("covariance factorisation failed");
  alpha_ = llt_.solve(y_);
}

void GpModel::kernel_row(std::span<const double> x, Eigen::VectorXd& k) const {
  const Eigen::Index n = x_.rows();
  const double amp2 = params_.amplitude * params_.amplitude;
  k.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double r2 = 0.0;
    for (Eigen::Index j = 0; j < x_.cols(); ++j) {
      const double d = x[static_cast<std::size_t>(j)] - x_(i, j);
      r2 += d * d * inv_sq_scales_[static_cast<std::size_t>(j)];
    }
    k(i) = amp2 * matern_shape(std::sqrt(r2));
  }
}

Posterior GpModel::posterior(std::span<const double> x) const {
  if (!fitted()) throw std::logic_error("posterior queried on an unfitted model");
  if (x.size() != dim()) throw std::invalid_argument("query dimension mismatch");
  Eigen::VectorXd k;
  kernel_row(x, k);
  Posterior p;
  p.mean = k.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(k);
  p.variance = std::max(0.0, params_.amplitude * params_.amplitude - v.squaredNorm());
  return p;
}

Posterior GpModel::posterior(std::span<const double> x, std::span<double> mean_grad, std::span<double> var_grad) const {
  if (!fitted()) throw std::logic_error("posterior queried on an unfitted model");
  const std::size_t d = dim();
  if (x.size() != d || mean_grad.size() != d || var_grad.size() != d) {
    throw std::invalid_argument("query dimension mismatch");
  }
  const Eigen::Index n = x_.rows();
  const double amp2 = params_.amplitude * params_.amplitude;
  Eigen::VectorXd k(n);
  Eigen::VectorXd slope(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = x[j] - x_(i, static_cast<Eigen::Index>(j));
      r2 += diff * diff * inv_sq_scales_[j];
    }
    const double r = std::sqrt(r2);
    k(i) = amp2 * matern_shape(r);
    slope(i) = amp2 * matern_slope(r);
  }
  Posterior p;
  p.mean = k.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(k);
  const double var = amp2 - v.squaredNorm();
  p.variance = std::max(0.0, var);
  const Eigen::VectorXd w = llt_.matrixU().solve(v);  // (K + noise I)^{-1} k

  std::fill(mean_grad.begin(), mean_grad.end(), 0.0);
  std::fill(var_grad.begin(), var_grad.end(), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      // dk_i/dx_j = -slope_i (x_j - x_ij) / l_j^2
      const double dk = -slope(i) * (x[j] - x_(i, static_cast<Eigen::Index>(j))) * inv_sq_scales_[j];
      mean_grad[j] += alpha_(i) * dk;
      var_grad[j] -= 2.0 * w(i) * dk;
    }
  }
  if (var <= 0.0) std::fill(var_grad.begin(), var_grad.end(), 0.0);
  return p;
}

double GpModel::nlml() const {
  if (!fitted()) throw std::logic_error("nlml of an unfitted model");
  const auto& l = llt_.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += 2.0 * std::log(l(i, i));
  return logdet + y_.dot(alpha_);
}

double GpModel::y_min() const {
  if (!fitted()) throw std::logic_error("empty model");
  return y_.minCoeff();
}

double nlml_with_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const double> log_params,
                          std::span<double> grad) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (log_params.size() != static_cast<std::size_t>(d + 2) || grad.size() != log_params.size()) {
    throw std::invalid_argument("parameter vector has the wrong size");
  }
  const double amp2 = std::exp(2.0 * log_params[0]);
  std::vector<double> inv_sq(static_cast<std::size_t>(d));
  for (Eigen::Index k = 0; k < d; ++k) inv_sq[static_cast<std::size_t>(k)] = std::exp(-2.0 * log_params[k + 1]);
  const double noise = std::exp(log_params[static_cast<std::size_t>(d + 1)]);

  Eigen::MatrixXd gram(n, n);
  Eigen::MatrixXd slope(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    gram(i, i) = amp2;
    slope(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      double r2 = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = x(i, k) - x(j, k);
        r2 += diff * diff * inv_sq[static_cast<std::size_t>(k)];
      }
      const double r = std::sqrt(r2);
      gram(i, j) = gram(j, i) = amp2 * matern_shape(r);
      slope(i, j) = slope(j, i) = amp2 * matern_slope(r);
    }
  }
  Eigen::MatrixXd cov = gram;
  cov.diagonal().array() += noise;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const auto& l = llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(l(i, i));
  const Eigen::VectorXd alpha = llt.solve(y);
  const double value = logdet + y.dot(alpha);

  // d/dp = tr(W dK), W = K^{-1} - alpha alpha^T
  Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(n, n));
  w.noalias() -= alpha * alpha.transpose();

  grad[0] = 2.0 * (w.cwiseProduct(gram)).sum();
  for (Eigen::Index k = 0; k < d; ++k) {
    const double s = inv_sq[static_cast<std::size_t>(k)];
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < i; ++j) {
        const double diff = x(i, k) - x(j, k);
        acc += 2.0 * w(i, j) * slope(i, j) * diff * diff * s;
      }
    }
    grad[static_cast<std::size_t>(k + 1)] = acc;
  }
  grad[static_cast<std::size_t>(d + 1)] = noise * w.trace();
  return value;
}

GpModel fit_hyperparams(const GpModel& model, Rng& rng, const FitOptions& options, FitReport* report) {
  if (model.size() < 2) throw std::invalid_argument("hyperparameter fitting needs at least two points");
  const std::size_t d = model.dim();
  const std::size_t np = d + 2;
  std::vector<double> lower(np), upper(np);
  lower[0] = std::log(options.min_amplitude);
  upper[0] = std::log(options.max_amplitude);
  for (std::size_t k = 0; k < d; ++k) {
    lower[k + 1] = std::log(options.min_length_scale);
    upper[k + 1] = std::log(options.max_length_scale);
  }
  lower[d + 1] = std::log(std::max(options.min_noise, kNoiseFloor));
  upper[d + 1] = std::log(options.max_noise);

  auto clamp_all = [&](std::vector<double> p) {
    for (std::size_t i = 0; i < np; ++i) p[i] = std::clamp(p[i], lower[i], upper[i]);
    return p;
  };

  std::vector<std::vector<double>> starts;
  {
    std::vector<double> current(np);
    current[0] = std::log(model.params().amplitude);
    for (std::size_t k = 0; k < d; ++k) current[k + 1] = std::log(model.params().length_scales[k]);
    current[d + 1] = std::log(model.noise());
    starts.push_back(clamp_all(current));
  }
  {
    std::vector<double> unit(np, std::log(0.5));
    unit[0] = 0.0;
    unit[d + 1] = std::log(1e-4);
    starts.push_back(clamp_all(unit));
  }
  while (starts.size() < std::max<std::size_t>(options.starts, 1)) {
    std::vector<double> p(np);
    for (std::size_t i = 0; i < np; ++i) p[i] = std::uniform_real_distribution<double>(lower[i], upper[i])(rng);
    starts.push_back(std::move(p));
  }
  starts.resize(std::max<std::size_t>(options.starts, 1));

  const Eigen::MatrixXd& x = model.train_x();
  const Eigen::VectorXd& y = model.train_y();
  SmoothObjective objective = [&](std::span<const double> p, std::span<double> g) {
    return nlml_with_gradient(x, y, p, g);
  };

  BoxMinimizerOptions bopts;
  bopts.max_iterations = options.max_iterations;
  bopts.gradient_tolerance = 1e-4;
  bopts.value_tolerance = 1e-7;

  std::vector<double> scratch(np);
  double best_start = std::numeric_limits<double>::infinity();
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<double> best = starts.front();
  for (const auto& s : starts) {
    best_start = std::min(best_start, nlml_with_gradient(x, y, s, scratch));
    BoxMinimum m = minimize_in_box(objective, s, lower, upper, bopts);
    if (m.value < best_value) {
      best_value = m.value;
      best = m.x;
    }
  }
  if (!std::isfinite(best_value)) {
    // nothing factorises; fall back to the loudest noise we allow
    best = starts.front();
    best[d + 1] = upper[d + 1];
  }

  KernelParams params;
  params.amplitude = std::exp(best[0]);
  for (std::size_t k = 0; k < d; ++k) params.length_scales.push_back(std::exp(best[k + 1]));
  GpModel fitted(std::move(params), std::exp(best[d + 1]));
  fitted.set_data(x, y);
  if (report) {
    report->best_start_nlml = best_start;
    report->final_nlml = best_value;
  }
  return fitted;
}

double expected_improvement(double mean, double std, double y_best) {
  const double gain = y_best - mean;
  if (!(std > 0.0)) return std::max(gain, 0.0);
  const double z = gain / std;
  return std::max(0.0, gain * normal_cdf(z) + std * normal_pdf(z));
}

namespace {

// EI and its gradient with respect to x.
double ei_with_gradient(const GpModel& model, std::span<const double> x, double y_best, std::span<double> grad,
                        std::vector<double>& mean_grad, std::vector<double>& var_grad) {
  const Posterior p = model.posterior(x, mean_grad, var_grad);
  const double sigma = std::sqrt(p.variance);
  const double gain = y_best - p.mean;
  if (sigma < 1e-12) {
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] = gain > 0.0 ? -mean_grad[j] : 0.0;
    return std::max(gain, 0.0);
  }
  const double z = gain / sigma;
  const double cdf = normal_cdf(z);
  const double pdf = normal_pdf(z);
  for (std::size_t j = 0; j < grad.size(); ++j) {
    const double dsigma = var_grad[j] / (2.0 * sigma);
    grad[j] = -cdf * mean_grad[j] + pdf * dsigma;
  }
  return std::max(0.0, gain * cdf + sigma * pdf);
}

}  // namespace

Proposal propose_next(const GpModel& model, std::span<const double> lower, std::span<const double> upper, Rng& rng,
                      const ProposeOptions& options) {
  const std::size_t d = model.dim();
  if (lower.size() != d || upper.size() != d) throw std::invalid_argument("bounds dimension mismatch");
  const double y_best = model.y_min();

  auto random_point = [&] {
    std::vector<double> p(d);
    for (std::size_t j = 0; j < d; ++j) p[j] = std::uniform_real_distribution<double>(lower[j], upper[j])(rng);
    return p;
  };
  auto ei_at = [&](std::span<const double> p) {
    const Posterior post = model.posterior(p);
    return expected_improvement(post.mean, std::sqrt(post.variance), y_best);
  };

  // seeds: best observed point + the best of a screen that mixes uniform
  // points with perturbations of the best training points
  const Eigen::Index n = model.size();
  std::vector<Eigen::Index> ranked(static_cast<std::size_t>(n));
  std::iota(ranked.begin(), ranked.end(), Eigen::Index{0});
  const std::size_t centres = std::min<std::size_t>(ranked.size(), options.local_centres);
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(centres), ranked.end(),
                    [&](Eigen::Index a, Eigen::Index b) { return model.train_y()(a) < model.train_y()(b); });
  const std::size_t local = centres > 0 ? static_cast<std::size_t>(options.local_fraction * options.screening) : 0;

  std::vector<std::pair<double, std::vector<double>>> screen;
  screen.reserve(options.screening);
  std::normal_distribution<double> step(0.0, 1.0);
  std::bernoulli_distribution pick(std::min(1.0, 2.0 / static_cast<double>(std::max<std::size_t>(d, 1))));
  for (std::size_t s = 0; s < options.screening; ++s) {
    std::vector<double> p;
    if (s < local) {
      const Eigen::Index row = ranked[s % centres];
      const double shrink = std::pow(0.1, static_cast<double>((s / centres) % 3));
      const std::size_t forced = std::uniform_int_distribution<std::size_t>(0, d - 1)(rng);
      p.resize(d);
      for (std::size_t j = 0; j < d; ++j) {
        p[j] = std::clamp(model.train_x()(row, static_cast<Eigen::Index>(j)), lower[j], upper[j]);
        if (j != forced && !pick(rng)) continue;
        const double scale = options.local_scale * shrink * (upper[j] - lower[j]);
        p[j] = std::clamp(p[j] + scale * step(rng), lower[j], upper[j]);
      }
    } else {
      p = random_point();
    }
    const double ei = ei_at(p);
    screen.emplace_back(ei, std::move(p));
  }
  const std::size_t keep = std::min(screen.size(), options.restarts > 0 ? options.restarts - 1 : 0);
  std::partial_sort(screen.begin(), screen.begin() + static_cast<std::ptrdiff_t>(keep), screen.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<std::vector<double>> seeds;
  {
    Eigen::Index best_row = 0;
    model.train_y().minCoeff(&best_row);
    std::vector<double> p(d);
    for (std::size_t j = 0; j < d; ++j) {
      p[j] = std::clamp(model.train_x()(best_row, static_cast<Eigen::Index>(j)), lower[j], upper[j]);
    }
    seeds.push_back(std::move(p));
  }
  for (std::size_t s = 0; s < keep; ++s) seeds.push_back(screen[s].second);

  std::vector<double> mean_grad(d), var_grad(d);
  SmoothObjective neg_ei = [&](std::span<const double> p, std::span<double> g) {
    const double v = ei_with_gradient(model, p, y_best, g, mean_grad, var_grad);
    for (double& gj : g) gj = -gj;
    return -v;
  };
  BoxMinimizerOptions bopts;
  bopts.max_iterations = 50;
  bopts.gradient_tolerance = 1e-9;
  bopts.value_tolerance = 1e-12;

  Proposal best;
  best.ei = -1.0;
  for (const auto& seed : seeds) {
    BoxMinimum m = minimize_in_box(neg_ei, seed, lower, upper, bopts);
    const double ei = ei_at(m.x);
    if (ei > best.ei) {
      best.ei = ei;
      best.x = std::move(m.x);
    }
  }
  if (!(best.ei > 0.0)) {
    best.x = random_point();
    best.ei = ei_at(best.x);
    best.degenerate = true;
  }
  return best;
}

}  // namespace admmopt
