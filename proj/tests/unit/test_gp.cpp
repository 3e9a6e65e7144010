#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "admmopt/gp.hpp"

using namespace admmopt;

namespace {

Eigen::MatrixXd random_points(std::size_t n, std::size_t d, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = u(rng);
  }
  return x;
}

std::vector<double> row(const Eigen::MatrixXd& x, Eigen::Index i) {
  std::vector<double> r(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) r[static_cast<std::size_t>(j)] = x(i, j);
  return r;
}

// Textbook Matern 5/2 written out independently of the library.
double matern_ref(const std::vector<double>& a, const std::vector<double>& b, double amp,
                  const std::vector<double>& ls) {
  double r2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r2 += (a[i] - b[i]) * (a[i] - b[i]) / (ls[i] * ls[i]);
  const double r = std::sqrt(r2);
  return amp * amp * (1.0 + std::sqrt(5.0) * r + 5.0 / 3.0 * r2) * std::exp(-std::sqrt(5.0) * r);
}

// Posterior through an explicit dense inverse of (K + noise I).
Posterior dense_posterior(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const KernelParams& p, double noise,
                          const std::vector<double>& q) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = matern_ref(row(x, i), row(x, j), p.amplitude, p.length_scales);
    ks(i) = matern_ref(row(x, i), q, p.amplitude, p.length_scales);
  }
  k += noise * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd inv = k.inverse();
  return {ks.dot(inv * y), matern_ref(q, q, p.amplitude, p.length_scales) - ks.dot(inv * ks)};
}

KernelParams iso(std::size_t d, double ls, double amp = 1.0) { return {amp, std::vector<double>(d, ls)}; }

}  // namespace

TEST_CASE("matern 5/2 kernel") {
  const KernelParams p = iso(1, 1.0);
  const std::vector<double> a{0.3}, b{1.3};
  CHECK(matern52(a, a, {2.0, {1.0}}) == doctest::Approx(4.0));
  CHECK(matern52(a, b, p) == doctest::Approx(0.5239941088318203).epsilon(1e-12));
  double prev = 1.0;
  for (double t = 0.5; t < 200.0; t *= 1.5) {
    const double v = matern52(std::vector<double>{0.0}, std::vector<double>{t}, p);
    REQUIRE(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-100);
  CHECK_THROWS_AS(matern52(std::vector<double>{0.0, 1.0}, a, p), std::invalid_argument);

  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x{u(rng), u(rng), u(rng)}, y{u(rng), u(rng), u(rng)}, ls{u(rng) + 0.1, u(rng) + 0.1, 0.4};
    REQUIRE(matern52(x, y, {1.7, ls}) == doctest::Approx(matern_ref(x, y, 1.7, ls)).epsilon(1e-12));
  }
}

TEST_CASE("single point posterior") {
  GpModel m(iso(2, 0.5), 0.01);
  Eigen::MatrixXd x(1, 2);
  x << 0.2, 0.7;
  Eigen::VectorXd y(1);
  y << 3.0;
  m.set_data(x, y);
  const Posterior p = m.posterior(std::vector<double>{0.2, 0.7});
  CHECK(p.mean == doctest::Approx(3.0 / 1.01).epsilon(1e-12));
  CHECK(p.variance == doctest::Approx(1.0 - 1.0 / 1.01).epsilon(1e-9));
  CHECK(p.variance == doctest::Approx(0.009901).epsilon(1e-4));

  const Posterior far = m.posterior(std::vector<double>{60.0, -40.0});
  CHECK(std::abs(far.mean) < 1e-12);
  CHECK(far.variance == doctest::Approx(1.0).epsilon(1e-12));

  GpModel empty(iso(1, 1.0), 0.01);
  CHECK_THROWS_AS(empty.posterior(std::vector<double>{0.0}), std::logic_error);
}

TEST_CASE("posterior matches the dense-inverse formula") {
  Rng rng(7);
  std::uniform_real_distribution<double> u(0.2, 1.5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + trial % 4;
    KernelParams p{u(rng), {}};
    for (std::size_t j = 0; j < d; ++j) p.length_scales.push_back(u(rng));
    const double noise = 1e-3 + 0.05 * u(rng);
    const Eigen::MatrixXd x = random_points(10, d, rng);
    Eigen::VectorXd y(10);
    for (auto& v : y) v = g(rng);
    GpModel m(p, noise);
    m.set_data(x, y);
    for (int q = 0; q < 5; ++q) {
      const std::vector<double> at = row(random_points(1, d, rng), 0);
      const Posterior got = m.posterior(at);
      const Posterior want = dense_posterior(x, y, p, noise, at);
      REQUIRE(std::abs(got.mean - want.mean) < 1e-8);
      REQUIRE(std::abs(got.variance - want.variance) < 1e-8);
    }
  }
}

TEST_CASE("append equals refit") {
  Rng rng(2);
  const Eigen::MatrixXd x = random_points(6, 2, rng);
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0);
  GpModel a(iso(2, 0.4), 1e-4);
  a.set_data(x.topRows(5), y.head(5));
  a.append(row(x, 5), y(5));
  GpModel b(iso(2, 0.4), 1e-4);
  b.set_data(x, y);
  const std::vector<double> q{0.3, 0.6};
  CHECK(a.posterior(q).mean == doctest::Approx(b.posterior(q).mean).epsilon(1e-12));
  CHECK(a.size() == 6);
}

TEST_CASE("gram matrix is positive semidefinite") {
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    const Eigen::MatrixXd x = random_points(30, 3, rng);
    const KernelParams p{1.3, {0.2, 0.5, 1.1}};
    Eigen::MatrixXd k(30, 30);
    for (Eigen::Index i = 0; i < 30; ++i) {
      for (Eigen::Index j = 0; j < 30; ++j) k(i, j) = matern52(row(x, i), row(x, j), p);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    REQUIRE(es.eigenvalues().minCoeff() > -1e-10);
  }
}

TEST_CASE("posterior gradients match finite differences") {
  Rng rng(9);
  const Eigen::MatrixXd x = random_points(12, 3, rng);
  Eigen::VectorXd y(12);
  for (Eigen::Index i = 0; i < 12; ++i) y(i) = std::sin(3.0 * x(i, 0)) + x(i, 1) * x(i, 2);
  GpModel m({1.1, {0.3, 0.6, 0.9}}, 1e-4);
  m.set_data(x, y);
  for (int q = 0; q < 10; ++q) {
    std::vector<double> at = row(random_points(1, 3, rng), 0);
    std::vector<double> gm(3), gv(3);
    m.posterior(at, gm, gv);
    for (std::size_t j = 0; j < 3; ++j) {
      const double h = 1e-6;
      auto up = at, dn = at;
      up[j] += h;
      dn[j] -= h;
      const Posterior pu = m.posterior(up), pd = m.posterior(dn);
      REQUIRE(gm[j] == doctest::Approx((pu.mean - pd.mean) / (2 * h)).epsilon(1e-4).scale(1.0));
      REQUIRE(gv[j] == doctest::Approx((pu.variance - pd.variance) / (2 * h)).epsilon(1e-4).scale(1.0));
    }
  }
}

TEST_CASE("nlml gradient matches finite differences") {
  Rng rng(4);
  const Eigen::MatrixXd x = random_points(15, 2, rng);
  Eigen::VectorXd y(15);
  for (Eigen::Index i = 0; i < 15; ++i) y(i) = std::cos(4.0 * x(i, 0)) - x(i, 1);
  const std::vector<double> lp{std::log(0.8), std::log(0.3), std::log(0.7), std::log(1e-2)};
  std::vector<double> grad(4), scratch(4);
  const double f = nlml_with_gradient(x, y, lp, grad);
  CHECK(std::isfinite(f));
  for (std::size_t j = 0; j < 4; ++j) {
    const double h = 1e-5;
    auto up = lp, dn = lp;
    up[j] += h;
    dn[j] -= h;
    const double fd = (nlml_with_gradient(x, y, up, scratch) - nlml_with_gradient(x, y, dn, scratch)) / (2 * h);
    CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }

  GpModel m({0.8, {0.3, 0.7}}, 1e-2);
  m.set_data(x, y);
  CHECK(m.nlml() == doctest::Approx(f).epsilon(1e-10));
}

TEST_CASE("fit recovers a generating length scale") {
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const Eigen::MatrixXd x = random_points(50, 1, rng);
    Eigen::MatrixXd k(50, 50);
    for (Eigen::Index i = 0; i < 50; ++i) {
      for (Eigen::Index j = 0; j < 50; ++j) k(i, j) = matern_ref(row(x, i), row(x, j), 1.0, {0.3});
    }
    k += 1e-6 * Eigen::MatrixXd::Identity(50, 50);
    const Eigen::MatrixXd l = k.llt().matrixL();
    Eigen::VectorXd z(50);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& v : z) v = g(rng);
    GpModel m(iso(1, 1.0), 1e-4);
    m.set_data(x, l * z);
    const GpModel fitted = fit_hyperparams(m, rng);
    const double ls = fitted.params().length_scales[0];
    MESSAGE("seed " << seed << " length scale " << ls);
    if (ls > 0.15 && ls < 0.6) ++recovered;
  }
  CHECK(recovered == 5);
}

TEST_CASE("fit on constant data") {
  Rng rng(3);
  const Eigen::MatrixXd x = random_points(10, 2, rng);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(10, 0.5);
  GpModel m(iso(2, 0.5), 1e-6);
  m.set_data(x, y);
  FitReport report;
  const GpModel fitted = fit_hyperparams(m, rng, {}, &report);
  CHECK(fitted.nlml() <= m.nlml() + 1e-9);
  CHECK(report.final_nlml <= report.best_start_nlml + 1e-12);
  for (Eigen::Index i = 0; i < 10; ++i) REQUIRE(fitted.posterior(row(x, i)).variance < 1e-3);
}

TEST_CASE("fit absorbs contradictory duplicates in noise") {
  Rng rng(1);
  Eigen::MatrixXd x(2, 1);
  x << 0.4, 0.4;
  Eigen::VectorXd y(2);
  y << -1.0, 1.0;
  GpModel m(iso(1, 0.5), 1e-6);
  m.set_data(x, y);
  const GpModel fitted = fit_hyperparams(m, rng);
  CHECK(std::isfinite(fitted.nlml()));
  CHECK(fitted.noise() > 1e-2);
  CHECK(std::abs(fitted.posterior(std::vector<double>{0.4}).mean) < 0.2);
}

TEST_CASE("expected improvement") {
  CHECK(expected_improvement(0.3, 1.0, 0.3) == doctest::Approx(0.398942280401433).epsilon(1e-12));
  CHECK(std::abs(expected_improvement(0.0, 1e-12, 1.0) - 1.0) < 1e-9);
  CHECK(expected_improvement(0.0, 0.1, -5.0) < 1e-10);
  CHECK(expected_improvement(0.0, 0.0, 0.5) == 0.5);
  CHECK(expected_improvement(0.0, 0.0, -0.5) == 0.0);

  Rng rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 3; ++t) {
    const double mean = 0.2 * t, sd = 0.5 + t, best = 0.4;
    double sum = 0.0;
    for (int k = 0; k < 200000; ++k) sum += std::max(best - (mean + sd * g(rng)), 0.0);
    CHECK(sum / 200000 == doctest::Approx(expected_improvement(mean, sd, best)).epsilon(0.02));
  }
}

TEST_CASE("proposal ascends EI from a single observation") {
  GpModel m(iso(1, 0.3), 1e-4);
  Eigen::MatrixXd x(1, 1);
  x << 0.5;
  Eigen::VectorXd y(1);
  y << 0.0;
  m.set_data(x, y);
  Rng rng(0);
  const std::vector<double> lo{0.0}, hi{1.0};
  const Proposal p = propose_next(m, lo, hi, rng);
  const Posterior at_train = m.posterior(std::vector<double>{0.5});
  const double ei_train = expected_improvement(at_train.mean, std::sqrt(at_train.variance), m.y_min());
  CHECK(p.x[0] != 0.5);
  CHECK(p.ei >= ei_train);
  CHECK(p.x[0] >= 0.0);
  CHECK(p.x[0] <= 1.0);
}

TEST_CASE("proposal matches a dense EI grid on a quadratic bowl") {
  Eigen::MatrixXd x(8, 1);
  Eigen::VectorXd y(8);
  const double xs[8] = {0.02, 0.15, 0.3, 0.42, 0.55, 0.7, 0.85, 0.97};
  for (int i = 0; i < 8; ++i) {
    x(i, 0) = xs[i];
    y(i) = (xs[i] - 0.47) * (xs[i] - 0.47);
  }
  GpModel m(iso(1, 0.3), 1e-6);
  m.set_data(x, y);
  double grid_best = 0.0, grid_x = 0.0;
  for (int k = 0; k <= 10000; ++k) {
    const double t = k / 10000.0;
    const Posterior p = m.posterior(std::vector<double>{t});
    const double ei = expected_improvement(p.mean, std::sqrt(std::max(p.variance, 0.0)), m.y_min());
    if (ei > grid_best) {
      grid_best = ei;
      grid_x = t;
    }
  }
  Rng rng(6);
  const std::vector<double> lo{0.0}, hi{1.0};
  const Proposal p = propose_next(m, lo, hi, rng);
  CHECK(p.ei >= 0.999 * grid_best);
  CHECK(p.x[0] > 0.3);
  CHECK(p.x[0] < 0.55);
  MESSAGE("grid argmax " << grid_x << " proposal " << p.x[0]);
}

TEST_CASE("proposals stay in the box") {
  Rng rng(8);
  const Eigen::MatrixXd x = random_points(20, 3, rng);
  Eigen::VectorXd y(20);
  for (Eigen::Index i = 0; i < 20; ++i) y(i) = -(x(i, 0) + x(i, 1) + x(i, 2));  // pushes toward the upper corner
  GpModel m(iso(3, 0.5), 1e-4);
  m.set_data(x, y);
  const std::vector<double> lo{0.1, 0.2, 0.0}, hi{0.6, 0.9, 0.5};
  for (int k = 0; k < 10; ++k) {
    const Proposal p = propose_next(m, lo, hi, rng);
    for (std::size_t j = 0; j < 3; ++j) {
      REQUIRE(p.x[j] >= lo[j]);
      REQUIRE(p.x[j] <= hi[j]);
    }
  }
}

TEST_CASE("normal helpers") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327));
}
