#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace admmopt {

using Rng = std::mt19937_64;

/// ARD Matérn 5/2 hyperparameters: an amplitude and one length scale per input dimension.
struct KernelParams {
  double amplitude = 1.0;
  std::vector<double> length_scales;
};

/// k(x, y) = a^2 exp(-sqrt5 r) (1 + sqrt5 r + 5/3 r^2),  r^2 = sum (x_i - y_i)^2 / l_i^2.
/// Throws std::invalid_argument on a dimension mismatch.
double matern52(std::span<const double> x, std::span<const double> x_prime, const KernelParams& params);

inline constexpr double kNoiseFloor = 1e-10;

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

/// Gaussian-process regression model with zero prior mean. Inputs are
/// expected in the unit hypercube (callers normalise); the factorisation of
/// K + noise I is refreshed on every fit/append.
class GpModel {
 public:
  GpModel(KernelParams params, double noise);

  std::size_t dim() const noexcept { return params_.length_scales.size(); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(x_.rows()); }
  bool fitted() const noexcept { return size() > 0; }

  const KernelParams& params() const noexcept { return params_; }
  double noise() const noexcept { return noise_; }
  /// Noise actually used in the factorisation; above noise() when jitter
  /// was needed to keep the Cholesky factor positive definite.
  double effective_noise() const noexcept { return effective_noise_; }

  const Eigen::MatrixXd& train_x() const noexcept { return x_; }
  const Eigen::VectorXd& train_y() const noexcept { return y_; }

  /// Replace the training set (rows are points).
  void set_data(Eigen::MatrixXd x, Eigen::VectorXd y);
  void append(std::span<const double> x, double y);
  /// Change hyperparameters and refactorise the current data.
  void set_params(KernelParams params, double noise);

  /// Throws std::logic_error when no data has been set.
  Posterior posterior(std::span<const double> x) const;

  /// Posterior plus gradients of mean and variance with respect to x.
  Posterior posterior(std::span<const double> x, std::span<double> mean_grad, std::span<double> var_grad) const;

  /// log det(K + noise I) + y^T (K + noise I)^{-1} y.
  double nlml() const;

  double y_min() const;

 private:
  void refactor();
  void kernel_row(std::span<const double> x, Eigen::VectorXd& k) const;

  KernelParams params_;
  double noise_;
  double effective_noise_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  std::vector<double> inv_sq_scales_;
};

/// NLML and its gradient with respect to
/// (log amplitude, log length scales, log noise). Returns +inf when the
/// covariance is not positive definite.
double nlml_with_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const double> log_params,
                          std::span<double> grad);

struct FitOptions {
  std::size_t starts = 4;
  double min_length_scale = 1e-2;
  double max_length_scale = 20.0;
  double min_amplitude = 1e-2;
  double max_amplitude = 20.0;
  double min_noise = 1e-8;
  double max_noise = 1.0;
  std::size_t max_iterations = 40;
};

struct FitReport {
  double best_start_nlml = 0.0;
  double final_nlml = 0.0;
};

/// Multi-start bounded minimisation of the NLML in log-parameter space.
/// Starts: the model's current parameters, a unit default, and random
/// draws. The result never has a larger NLML than the best start. Needs at
/// least two training points.
GpModel fit_hyperparams(const GpModel& model, Rng& rng, const FitOptions& options = {},
                        FitReport* report = nullptr);

/// (y+ - mean) Phi(z) + std phi(z), z = (y+ - mean) / std; max(y+ - mean, 0) at std = 0.
double expected_improvement(double mean, double std, double y_best);

struct Proposal {
  std::vector<double> x;
  double ei = 0.0;
  bool degenerate = false;  // EI vanished everywhere; x is a random point
};

struct ProposeOptions {
  std::size_t restarts = 8;
  std::size_t screening = 512;
  /// Share of the screen drawn around the best training points. Each local
  /// point moves a random subset of coordinates (about two) by Gaussian steps
  /// of local_scale, local_scale / 10 or local_scale / 100 times the width.
  double local_fraction = 0.5;
  std::size_t local_centres = 4;
  double local_scale = 0.1;
};

/// Maximises EI (with y+ = min observed y) by multi-start projected
/// quasi-Newton ascent within [lower, upper]. Seeds: the best training point
/// plus the top screening points.
Proposal propose_next(const GpModel& model, std::span<const double> lower, std::span<const double> upper, Rng& rng,
                      const ProposeOptions& options = {});

double normal_pdf(double z);
double normal_cdf(double z);

}  // namespace admmopt
