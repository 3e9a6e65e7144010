#include <doctest.h>

#include <cmath>

#include "admmopt/box_minimizer.hpp"
#include "admmopt/continuous_solvers.hpp"

using namespace admmopt;

namespace {

double sphere(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += (v - 0.5) * (v - 0.5);
  return s;
}

ContinuousProblem problem(std::size_t d, std::size_t budget, std::function<double(std::span<const double>)> f) {
  ContinuousProblem p;
  p.box.lower.assign(d, 0.0);
  p.box.upper.assign(d, 1.0);
  p.objective = std::move(f);
  p.budget = budget;
  return p;
}

}  // namespace

TEST_CASE("box minimizer on a shifted quadratic") {
  const std::vector<double> lo{0.0, 0.0}, hi{1.0, 0.5};
  auto f = [](std::span<const double> x, std::span<double> g) {
    g[0] = 2.0 * (x[0] - 0.3);
    g[1] = 2.0 * (x[1] - 0.8);
    return (x[0] - 0.3) * (x[0] - 0.3) + (x[1] - 0.8) * (x[1] - 0.8);
  };
  const BoxMinimum m = minimize_in_box(f, {0.9, 0.1}, lo, hi);
  CHECK(m.x[0] == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(m.x[1] == 0.5);
  CHECK(m.value == doctest::Approx(0.09).epsilon(1e-8));
}

TEST_CASE("box minimizer never worsens the start") {
  auto f = [](std::span<const double> x, std::span<double> g) {
    g[0] = std::cos(20.0 * x[0]) * 20.0;
    return std::sin(20.0 * x[0]);
  };
  const std::vector<double> lo{0.0}, hi{1.0};
  for (double s = 0.0; s <= 1.0; s += 0.05) {
    std::vector<double> g(1);
    const double start = f(std::vector<double>{s}, g);
    REQUIRE(minimize_in_box(f, {s}, lo, hi).value <= start);
  }
}

TEST_CASE("latin hypercube stratifies every coordinate") {
  Rng rng(1);
  const Box box{{0.0, -2.0}, {1.0, 2.0}};
  const auto pts = latin_hypercube(box, 10, rng);
  REQUIRE(pts.size() == 10);
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<int> hits(10, 0);
    for (const auto& p : pts) {
      const double u = (p[j] - box.lower[j]) / (box.upper[j] - box.lower[j]);
      ++hits[std::min(9, static_cast<int>(u * 10))];
    }
    for (int h : hits) CHECK(h == 1);
  }
}

TEST_CASE("random search respects budget and box") {
  Rng rng(2);
  std::size_t calls = 0;
  auto p = problem(3, 25, [&](std::span<const double> x) {
    ++calls;
    return sphere(x);
  });
  RandomSearchSolver solver;
  const ContinuousResult r = solver.solve(p, rng);
  CHECK(calls == 25);
  CHECK(r.evaluations == 25);
  CHECK(p.box.contains(r.x));
  CHECK(r.value == doctest::Approx(sphere(r.x)));
}

TEST_CASE("bo respects budget and box") {
  for (std::size_t budget : {2u, 5u, 16u}) {
    Rng rng(budget);
    std::size_t calls = 0;
    std::vector<std::vector<double>> seen;
    auto p = problem(2, budget, [&](std::span<const double> x) {
      ++calls;
      seen.emplace_back(x.begin(), x.end());
      return sphere(x);
    });
    BayesOptSolver solver;
    const ContinuousResult r = solver.solve(p, rng);
    REQUIRE(calls == budget);
    for (const auto& x : seen) REQUIRE(p.box.contains(x));
    double best = 1e9;
    for (const auto& x : seen) best = std::min(best, sphere(x));
    CHECK(r.value == best);
  }
}

TEST_CASE("bo with budget 2 returns the better design point") {
  Rng rng(3);
  std::vector<double> values;
  auto p = problem(3, 2, [&](std::span<const double> x) {
    values.push_back(sphere(x));
    return values.back();
  });
  const ContinuousResult r = BayesOptSolver().solve(p, rng);
  REQUIRE(values.size() == 2);
  CHECK(r.value == std::min(values[0], values[1]));
}

TEST_CASE("bo on a flat objective") {
  Rng rng(4);
  auto p = problem(2, 12, [](std::span<const double>) { return 0.25; });
  const ContinuousResult r = BayesOptSolver().solve(p, rng);
  CHECK(r.value == 0.25);
  CHECK(p.box.contains(r.x));
}

TEST_CASE("bo beats random on the sphere in most seeds") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng a(seed), b(seed + 1000);
    const double bo = BayesOptSolver().solve(problem(3, 32, sphere), a).value;
    const double rs = RandomSearchSolver().solve(problem(3, 32, sphere), b).value;
    if (bo <= rs) ++wins;
  }
  CHECK(wins >= 16);
}

TEST_CASE("warm start informs without spending budget") {
  Rng rng(5);
  std::size_t calls = 0;
  auto p = problem(2, 6, [&](std::span<const double> x) {
    ++calls;
    return sphere(x) + 0.01;
  });
  p.warm_start.push_back({{0.5, 0.5}, 0.0});
  const ContinuousResult r = BayesOptSolver().solve(p, rng);
  CHECK(calls == 6);
  CHECK(r.evaluations == 6);
  CHECK(r.value == 0.0);
  CHECK(r.from_warm_start);
}

TEST_CASE("objective exceptions propagate") {
  Rng rng(6);
  auto p = problem(1, 5, [](std::span<const double>) -> double { throw std::runtime_error("boom"); });
  CHECK_THROWS_AS(BayesOptSolver().solve(p, rng), std::runtime_error);
}

TEST_CASE("solve_theta_min") {
  Rng rng(7);
  const std::vector<double> lo{-1.0}, hi{1.0};
  const ContinuousResult r = solve_theta_min([](std::span<const double> x) { return x[0] * x[0]; }, lo, hi, 12, rng);
  CHECK(r.value < 0.05);
  CHECK_THROWS_AS(solve_theta_min([](std::span<const double>) { return 0.0; }, lo, hi, 1, rng), std::invalid_argument);
  CHECK_THROWS_AS(make_continuous_solver("nelder"), std::invalid_argument);
  CHECK(make_continuous_solver("bo")->name() == "bo");
}
