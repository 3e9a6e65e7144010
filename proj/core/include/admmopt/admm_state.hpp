#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "admmopt/gp.hpp"
#include "admmopt/search_space.hpp"

namespace admmopt {

/// Iterate of the alternating scheme. mu, u and epsilons are empty when the
/// problem has no constraints.
struct AdmmState {
  std::size_t t = 0;
  std::vector<std::int64_t> delta;  // integer copy of the relaxed integers
  std::vector<double> lambda;       // one multiplier per integer parameter
  double rho = 1.0;
  std::vector<double> mu;
  std::vector<double> u;  // slack, u_i in [0, epsilon_i]
  std::vector<double> epsilons;
  ZAssignment z;
  ThetaVector theta;

  std::size_t num_constraints() const noexcept { return epsilons.size(); }
};

/// Box midpoints, first algorithm of every module, delta = round(theta),
/// lambda = 0, mu = 0, u = epsilon / 2.
AdmmState initial_state(const SearchSpace& space, double rho, std::vector<double> epsilons);

/// Same multipliers and slacks, but theta and z drawn uniformly.
AdmmState random_initial_state(const SearchSpace& space, double rho, std::vector<double> epsilons, Rng& rng);

/// Throws std::invalid_argument when the state does not fit the space or
/// breaks an invariant (rho <= 0, u outside [0, epsilon], delta out of range).
void check_state(const SearchSpace& space, const AdmmState& state);

/// b = delta - lambda / rho, per integer parameter.
std::vector<double> consensus_target(const AdmmState& state);

/// (rho/2) ||theta_int - b||^2 over the whole integer layout.
double theta_penalty(std::span<const double> relaxed_int, const AdmmState& state);

/// (rho/2) sum_i (g_i + u_i - epsilon_i + mu_i / rho)^2 with the state's own u.
double constraint_penalty(std::span<const double> gvals, const AdmmState& state);

/// Same with an explicit slack vector.
double constraint_penalty(std::span<const double> gvals, std::span<const double> u, const AdmmState& state);

/// Slack that minimises constraint_penalty for fixed g: clamp(eps - g - mu/rho, 0, eps).
std::vector<double> best_slack(std::span<const double> gvals, const AdmmState& state);

/// Integer flat indices not in `active`.
std::vector<std::size_t> inactive_ints(const SearchSpace& space, const ActiveSet& active);

/// Sets every listed coordinate of relaxed_int to clamp(b, lower, upper).
/// Continuous coordinates are not touched.
void solve_inactive(const SearchSpace& space, const AdmmState& state, std::span<const std::size_t> inactive,
                    std::span<double> relaxed_int);

/// Round(clamp(theta_int + lambda / rho)) per coordinate.
std::vector<std::int64_t> delta_min(const SearchSpace& space, const AdmmState& state,
                                    std::span<const double> relaxed_int);

/// lambda += rho (theta_int - delta); returns ||theta_int - delta||_inf.
/// Expects state.delta to hold the new delta.
double update_lambda(AdmmState& state, std::span<const double> relaxed_int);

/// mu_i += rho (g_i - epsilon_i + u_i). No-op without constraints.
void update_mu(AdmmState& state, std::span<const double> gvals);

/// ||theta_int - delta||_inf.
double consensus_residual(std::span<const double> relaxed_int, std::span<const std::int64_t> delta);

}  // namespace admmopt
