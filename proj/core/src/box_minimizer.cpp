#include "admmopt/box_minimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace admmopt {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

struct Pair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

}  // namespace

BoxMinimum minimize_in_box(const SmoothObjective& objective, std::vector<double> x0, std::span<const double> lower,
                           std::span<const double> upper, const BoxMinimizerOptions& options) {
  const std::size_t n = x0.size();
  if (lower.size() != n || upper.size() != n) throw std::invalid_argument("box dimension mismatch");

  auto project = [&](std::vector<double>& x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
  };
  BoxMinimum out;
  auto eval = [&](const std::vector<double>& x, std::vector<double>& g) {
    ++out.evaluations;
    std::fill(g.begin(), g.end(), 0.0);
    const double v = objective(x, g);
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    for (double gi : g) {
      if (!std::isfinite(gi)) return std::numeric_limits<double>::infinity();
    }
    return v;
  };

  std::vector<double> x = std::move(x0);
  project(x);
  std::vector<double> g(n);
  double f = eval(x, g);
  out.x = x;
  out.value = f;
  if (n == 0 || !std::isfinite(f)) return out;

  std::deque<Pair> memory;
  std::vector<double> d(n), x_new(n), g_new(n), free_grad(n);
  const double tiny = 1e-12;

  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    out.iterations = iter + 1;
    // Coordinates pinned at a bound with the gradient pushing outward stay fixed.
    double pg_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool at_lower = x[i] <= lower[i] + tiny && g[i] > 0.0;
      const bool at_upper = x[i] >= upper[i] - tiny && g[i] < 0.0;
      free_grad[i] = (at_lower || at_upper) ? 0.0 : g[i];
      pg_norm = std::max(pg_norm, std::abs(std::clamp(x[i] - g[i], lower[i], upper[i]) - x[i]));
    }
    if (pg_norm < options.gradient_tolerance) break;

    // Two-loop recursion on the free subspace.
    d = free_grad;
    std::vector<double> alpha(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      alpha[k] = memory[k].rho * dot(memory[k].s, d);
      for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * memory[k].y[i];
    }
    if (!memory.empty()) {
      const Pair& last = memory.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (double& di : d) di *= gamma;
    } else {
      // first step: unit move along the largest gradient component, bounded by the box
      double gmax = 0.0;
      double width = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        gmax = std::max(gmax, std::abs(free_grad[i]));
        width = std::max(width, upper[i] - lower[i]);
      }
      const double scale = gmax > 0.0 ? std::min(1.0, 0.1 * width / gmax) : 1.0;
      for (double& di : d) di *= scale;
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const double beta = memory[k].rho * dot(memory[k].y, d);
      for (std::size_t i = 0; i < n; ++i) d[i] += memory[k].s[i] * (alpha[k] - beta);
    }
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = free_grad[i] == 0.0 ? 0.0 : -d[i];
    }
    if (dot(d, free_grad) >= 0.0) {
      // not a descent direction; fall back to steepest descent
      memory.clear();
      double gmax = 0.0;
      for (double gi : free_grad) gmax = std::max(gmax, std::abs(gi));
      for (std::size_t i = 0; i < n; ++i) d[i] = -free_grad[i] / std::max(gmax, 1.0);
    }

    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int k = 0; k < 40; ++k) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * d[i];
      project(x_new);
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (x_new[i] - x[i]);
      if (decrease >= 0.0 && k > 0) {
        step *= 0.5;
        continue;
      }
      f_new = eval(x_new, g_new);
      if (f_new <= f + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (memory.empty()) break;
      memory.clear();
      continue;
    }

    Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = x_new[i] - x[i];
      p.y[i] = g_new[i] - g[i];
    }
    const double sy = dot(p.s, p.y);
    if (sy > 1e-12 * std::sqrt(dot(p.s, p.s) * dot(p.y, p.y)) && sy > 0.0) {
      p.rho = 1.0 / sy;
      memory.push_back(std::move(p));
      if (memory.size() > options.memory) memory.pop_front();
    }
    const double change = f - f_new;
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    if (change <= options.value_tolerance * std::max(1.0, std::abs(f))) break;
  }
  out.x = std::move(x);
  out.value = f;
  return out;
}

}  // namespace admmopt
