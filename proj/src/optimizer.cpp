#include "screenlab/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace screenlab {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::gradient:
      return "gradient";
    case StopReason::step_underflow:
      return "step_underflow";
    case StopReason::max_iterations:
      return "max_iterations";
    case StopReason::non_finite:
      return "non_finite";
  }
  return "unknown";
}

std::vector<double> central_gradient(const Objective& f, std::span<const double> x, int* evaluations) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = 6e-6 * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  if (evaluations) *evaluations += static_cast<int>(2 * x.size());
  return g;
}

MinimizeResult minimize_bfgs(const Objective& f, std::vector<double> x0, const MinimizeOptions& options) {
  const std::size_t n = x0.size();
  MinimizeResult res;
  res.x = std::move(x0);
  res.value = f(res.x);
  res.evaluations = 1;
  if (!std::isfinite(res.value)) {
    res.stop = StopReason::non_finite;
    return res;
  }
  if (n == 0) {
    res.stop = StopReason::gradient;
    return res;
  }
  res.gradient = central_gradient(f, res.x, &res.evaluations);

  // Inverse Hessian approximation, row-major.
  std::vector<double> H(n * n, 0.0);
  const auto reset_identity = [&](double scale) {
    std::fill(H.begin(), H.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) H[i * n + i] = scale;
  };
  reset_identity(1.0);
  bool fresh_identity = true;

  std::vector<double> dir(n), trial(n), step(n), dgrad(n), Hy(n);
  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (max_abs(res.gradient) < options.gradient_tolerance * std::max(1.0, std::abs(res.value))) {
      res.stop = StopReason::gradient;
      return res;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s -= H[i * n + j] * res.gradient[j];
      dir[i] = s;
    }
    double slope = dot(dir, res.gradient);
    if (!(slope < 0.0)) {
      reset_identity(1.0);
      fresh_identity = true;
      for (std::size_t i = 0; i < n; ++i) dir[i] = -res.gradient[i];
      slope = dot(dir, res.gradient);
    }
    double alpha = std::min(1.0, options.max_step / std::max(max_abs(dir), 1e-300));
    const double x_scale = std::max(1.0, max_abs(res.x));

    // Backtracking with safeguarded quadratic interpolation.
    double f_trial = std::numeric_limits<double>::infinity();
    bool accepted = false;
    while (alpha * max_abs(dir) > options.min_step * x_scale) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = res.x[i] + alpha * dir[i];
      f_trial = f(trial);
      ++res.evaluations;
      if (std::isfinite(f_trial) && f_trial <= res.value + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      double next = 0.5 * alpha;
      if (std::isfinite(f_trial)) {
        const double q = -slope * alpha * alpha / (2.0 * (f_trial - res.value - slope * alpha));
        if (std::isfinite(q)) next = std::clamp(q, 0.1 * alpha, 0.5 * alpha);
      }
      alpha = next;
    }
    if (!accepted) {
      if (!fresh_identity) {
        reset_identity(1.0 / std::max(1.0, max_abs(res.gradient)));
        fresh_identity = true;
        continue;
      }
      res.stop = StopReason::step_underflow;
      return res;
    }

    const std::vector<double> g_new = central_gradient(f, trial, &res.evaluations);
    for (std::size_t i = 0; i < n; ++i) {
      step[i] = trial[i] - res.x[i];
      dgrad[i] = g_new[i] - res.gradient[i];
    }
    const double sy = dot(step, dgrad);
    if (sy > 1e-12 * std::sqrt(dot(step, step) * dot(dgrad, dgrad))) {
      if (fresh_identity) {
        // Shanno-Phua scaling of the initial matrix.
        reset_identity(sy / dot(dgrad, dgrad));
      }
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += H[i * n + j] * dgrad[j];
        Hy[i] = s;
      }
      const double yHy = dot(dgrad, Hy);
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          H[i * n + j] += rho * ((1.0 + rho * yHy) * step[i] * step[j] - (Hy[i] * step[j] + step[i] * Hy[j]));
        }
      }
      fresh_identity = false;
    }
    res.x = trial;
    res.value = f_trial;
    res.gradient = g_new;
  }
  res.stop = max_abs(res.gradient) < options.gradient_tolerance * std::max(1.0, std::abs(res.value))
                 ? StopReason::gradient
                 : StopReason::max_iterations;
  return res;
}

}  // namespace screenlab
