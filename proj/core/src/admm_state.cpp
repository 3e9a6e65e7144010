#include "admmopt/admm_state.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace admmopt {

namespace {

void init_multipliers(AdmmState& s, const SearchSpace& space, double rho, std::vector<double> epsilons) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw std::invalid_argument("rho must be positive");
  for (double e : epsilons) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw std::invalid_argument("epsilon values must be finite and >= 0");
  }
  s.rho = rho;
  s.lambda.assign(space.int_size(), 0.0);
  s.mu.assign(epsilons.size(), 0.0);
  s.u.resize(epsilons.size());
  for (std::size_t i = 0; i < epsilons.size(); ++i) s.u[i] = 0.5 * epsilons[i];
  s.epsilons = std::move(epsilons);
  s.delta.resize(space.int_size());
  for (std::size_t k = 0; k < space.int_size(); ++k) {
    const IntParam& p = space.int_param(k);
    s.delta[k] = project_and_round(s.theta.relaxed_int[k], p.lower, p.upper);
  }
}

}  // namespace

AdmmState initial_state(const SearchSpace& space, double rho, std::vector<double> epsilons) {
  AdmmState s;
  s.theta = space.midpoint();
  s.z.choice.assign(space.num_modules(), 0);
  init_multipliers(s, space, rho, std::move(epsilons));
  return s;
}

AdmmState random_initial_state(const SearchSpace& space, double rho, std::vector<double> epsilons, Rng& rng) {
  AdmmState s;
  for (std::size_t i = 0; i < space.num_modules(); ++i) {
    s.z.choice.push_back(std::uniform_int_distribution<std::size_t>(0, space.num_algorithms(i) - 1)(rng));
  }
  for (std::size_t k = 0; k < space.cont_size(); ++k) {
    const ContParam& p = space.cont_param(k);
    s.theta.cont.push_back(std::uniform_real_distribution<double>(p.lower, p.upper)(rng));
  }
  for (std::size_t k = 0; k < space.int_size(); ++k) {
    const IntParam& p = space.int_param(k);
    const double lo = static_cast<double>(p.lower);
    const double hi = static_cast<double>(p.upper);
    s.theta.relaxed_int.push_back(lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng));
  }
  init_multipliers(s, space, rho, std::move(epsilons));
  return s;
}

void check_state(const SearchSpace& space, const AdmmState& s) {
  if (!(s.rho > 0.0)) throw std::invalid_argument("rho must be positive");
  space.validate(s.z);
  if (s.theta.cont.size() != space.cont_size() || s.theta.relaxed_int.size() != space.int_size()) {
    throw std::invalid_argument("theta does not match the space layout");
  }
  if (s.delta.size() != space.int_size() || s.lambda.size() != space.int_size()) {
    throw std::invalid_argument("delta / lambda do not match the integer layout");
  }
  for (std::size_t k = 0; k < s.delta.size(); ++k) {
    const IntParam& p = space.int_param(k);
    if (s.delta[k] < p.lower || s.delta[k] > p.upper) {
      throw std::invalid_argument(fmt::format("delta of '{}' is outside its range", p.name));
    }
  }
  const std::size_t m = s.epsilons.size();
  if (s.mu.size() != m || s.u.size() != m) throw std::invalid_argument("mu / u do not match the constraint count");
  for (std::size_t i = 0; i < m; ++i) {
    if (!(s.u[i] >= 0.0 && s.u[i] <= s.epsilons[i])) {
      throw std::invalid_argument(fmt::format("slack {} is outside [0, epsilon]", i));
    }
  }
}

std::vector<double> consensus_target(const AdmmState& s) {
  std::vector<double> b(s.delta.size());
  for (std::size_t k = 0; k < b.size(); ++k) b[k] = static_cast<double>(s.delta[k]) - s.lambda[k] / s.rho;
  return b;
}

double theta_penalty(std::span<const double> relaxed_int, const AdmmState& s) {
  if (relaxed_int.size() != s.delta.size()) throw std::invalid_argument("theta_int and delta differ in length");
  double sum = 0.0;
  for (std::size_t k = 0; k < relaxed_int.size(); ++k) {
    const double diff = relaxed_int[k] - (static_cast<double>(s.delta[k]) - s.lambda[k] / s.rho);
    sum += diff * diff;
  }
  return 0.5 * s.rho * sum;
}

double constraint_penalty(std::span<const double> gvals, const AdmmState& s) {
  return constraint_penalty(gvals, s.u, s);
}

double constraint_penalty(std::span<const double> gvals, std::span<const double> u, const AdmmState& s) {
  const std::size_t m = s.epsilons.size();
  if (gvals.size() != m || u.size() != m) throw std::invalid_argument("constraint vector has the wrong length");
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = gvals[i] + u[i] - s.epsilons[i] + s.mu[i] / s.rho;
    sum += r * r;
  }
  return 0.5 * s.rho * sum;
}

std::vector<double> best_slack(std::span<const double> gvals, const AdmmState& s) {
  const std::size_t m = s.epsilons.size();
  if (gvals.size() != m) throw std::invalid_argument("constraint vector has the wrong length");
  std::vector<double> u(m);
  for (std::size_t i = 0; i < m; ++i) {
    u[i] = std::clamp(s.epsilons[i] - gvals[i] - s.mu[i] / s.rho, 0.0, s.epsilons[i]);
  }
  return u;
}

std::vector<std::size_t> inactive_ints(const SearchSpace& space, const ActiveSet& active) {
  std::vector<bool> on(space.int_size(), false);
  for (std::size_t k : active.ints) on.at(k) = true;
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < on.size(); ++k) {
    if (!on[k]) out.push_back(k);
  }
  return out;
}

void solve_inactive(const SearchSpace& space, const AdmmState& s, std::span<const std::size_t> inactive,
                    std::span<double> relaxed_int) {
  for (std::size_t k : inactive) {
    const IntParam& p = space.int_param(k);
    const double b = static_cast<double>(s.delta.at(k)) - s.lambda.at(k) / s.rho;
    relaxed_int[k] = project_box(b, static_cast<double>(p.lower), static_cast<double>(p.upper));
  }
}

std::vector<std::int64_t> delta_min(const SearchSpace& space, const AdmmState& s,
                                    std::span<const double> relaxed_int) {
  if (relaxed_int.size() != space.int_size() || s.lambda.size() != space.int_size()) {
    throw std::invalid_argument("integer vectors do not match the layout");
  }
  std::vector<std::int64_t> out(relaxed_int.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const IntParam& p = space.int_param(k);
    out[k] = project_and_round(relaxed_int[k] + s.lambda[k] / s.rho, p.lower, p.upper);
  }
  return out;
}

double consensus_residual(std::span<const double> relaxed_int, std::span<const std::int64_t> delta) {
  if (relaxed_int.size() != delta.size()) throw std::invalid_argument("theta_int and delta differ in length");
  double r = 0.0;
  for (std::size_t k = 0; k < delta.size(); ++k) {
    r = std::max(r, std::abs(relaxed_int[k] - static_cast<double>(delta[k])));
  }
  return r;
}

double update_lambda(AdmmState& s, std::span<const double> relaxed_int) {
  if (relaxed_int.size() != s.delta.size()) throw std::invalid_argument("theta_int and delta differ in length");
  for (std::size_t k = 0; k < s.delta.size(); ++k) {
    s.lambda[k] += s.rho * (relaxed_int[k] - static_cast<double>(s.delta[k]));
  }
  return consensus_residual(relaxed_int, s.delta);
}

void update_mu(AdmmState& s, std::span<const double> gvals) {
  const std::size_t m = s.epsilons.size();
  if (m == 0) return;
  if (gvals.size() != m) throw std::invalid_argument("constraint vector has the wrong length");
  for (std::size_t i = 0; i < m; ++i) s.mu[i] += s.rho * (gvals[i] - s.epsilons[i] + s.u[i]);
}

}  // namespace admmopt
