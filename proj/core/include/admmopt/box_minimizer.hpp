#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace admmopt {

/// Value-and-gradient callback; writes the gradient into `grad`.
using SmoothObjective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct BoxMinimizerOptions {
  std::size_t max_iterations = 100;
  std::size_t memory = 8;
  double gradient_tolerance = 1e-7;  // on the projected gradient, inf-norm
  double value_tolerance = 1e-10;    // relative decrease
};

struct BoxMinimum {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
};

/// Projected limited-memory BFGS with Armijo backtracking along the
/// projection arc. Never returns a point with a larger value than the
/// (projected) start. Non-finite objective values are treated as +inf.
BoxMinimum minimize_in_box(const SmoothObjective& objective, std::vector<double> x0, std::span<const double> lower,
                           std::span<const double> upper, const BoxMinimizerOptions& options = {});

}  // namespace admmopt
