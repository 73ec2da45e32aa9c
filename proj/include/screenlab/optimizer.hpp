#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace screenlab {

using Objective = std::function<double(std::span<const double>)>;

struct MinimizeOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;  // max-norm, relative to max(1, |f|)
  double min_step = 1e-12;           // relative step length treated as underflow
  double max_step = 5.0;             // cap on the max-norm of a trial step
};

enum class StopReason { gradient, step_underflow, max_iterations, non_finite };

std::string_view to_string(StopReason reason);

struct MinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  std::vector<double> gradient;
  int iterations = 0;
  int evaluations = 0;
  StopReason stop = StopReason::non_finite;

  bool converged() const noexcept { return stop == StopReason::gradient || stop == StopReason::step_underflow; }
};

// Central-difference gradient with step 6e-6 * max(1, |x_i|).
std::vector<double> central_gradient(const Objective& f, std::span<const double> x, int* evaluations = nullptr);

// Quasi-Newton (BFGS, inverse-Hessian form) with backtracking Armijo line search and
// finite-difference gradients. Falls back to a steepest-descent step once before
// declaring step underflow.
MinimizeResult minimize_bfgs(const Objective& f, std::vector<double> x0, const MinimizeOptions& options = {});

}  // namespace screenlab
