#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "screenlab/model.hpp"
#include "screenlab/optimizer.hpp"
#include "screenlab/screening.hpp"

namespace screenlab {

// Box constraints on the log-normal intensity parameters.
inline constexpr double kMuLower = 3.5;
inline constexpr double kMuUpper = 4.5;
inline constexpr double kSUpper = 1.0;
// Probabilities are clamped into [kProbFloor, 1 - kProbFloor] before taking logs.
inline constexpr double kProbFloor = 1e-12;

struct LikelihoodStats {
  long long clamp_events = 0;
};

// -[r ln I + s ln D + (n - s - r) ln(1 - D - I)] for one cell, after clamping D and I.
// Increments *clamps for each clamped probability that carries a nonzero count.
double cell_neg_log_likelihood(long long n, long long s, long long r, double d, double i,
                               long long* clamps = nullptr);

// -log L summed over all cells with n > 0. Cells are folded in sorted (t0, k, n, s, r)
// order, so the value does not depend on row order. Throws std::domain_error when a
// log-normal intensity is outside 3.5 <= mu <= 4.5, 0 < s <= 1, or when a cell's
// cohort lies outside the design's entry-age range.
double neg_log_likelihood(const ModelParams& params, const CountsTable& counts, const ScreeningDesign& design,
                          LikelihoodStats* stats = nullptr, IntervalTerms terms = IntervalTerms::complete);

// Which parameter blocks an estimation varies; everything else is taken from `base`.
struct FitSpec {
  SojournFamily family = SojournFamily::exponential;
  bool fix_b1 = false;
  bool fix_sensitivity = false;
  bool fix_intensity = false;
  bool fix_sojourn = false;
  IntervalTerms terms = IntervalTerms::complete;
  // Supplies tbar, lifetime risk, the intensity mode and every held value.
  ModelParams base{SensitivityModel{1.4, 0.05, 52.0}, PreclinicalIntensity::log_normal(3.971, 0.268, 0.15),
                   SojournDistribution::exponential(0.4)};
};

enum class Transform { identity, log, unit_interval, mu_interval };

struct ParameterSlot {
  std::string name;
  Transform transform;
};

/// Natural parameter vector of a fit: b0, b1, then mu, s (log-normal intensity) or
/// rate (constant intensity), then the sojourn parameters (lambda | alpha, beta |
/// kappa, rho). The free subset is mapped to an unconstrained vector: mu by a scaled
/// logit onto (3.5, 4.5), s by a logit onto (0, 1), positive parameters by log.
class ParameterSpace {
 public:
  explicit ParameterSpace(FitSpec spec);

  const FitSpec& spec() const noexcept { return spec_; }
  const std::vector<ParameterSlot>& slots() const noexcept { return slots_; }
  const std::vector<std::size_t>& free_indices() const noexcept { return free_; }
  std::size_t dimension() const noexcept { return free_.size(); }
  std::vector<std::string> free_names() const;

  std::vector<double> natural(const ModelParams& params) const;
  ModelParams params(std::span<const double> natural) const;

  std::vector<double> free_natural(const ModelParams& params) const;
  ModelParams with_free(std::span<const double> free_natural) const;

  std::vector<double> transform(std::span<const double> free_natural) const;
  // Throws std::domain_error on non-finite input.
  std::vector<double> untransform(std::span<const double> unconstrained) const;

  // Random start: b0 ~ U[0,5], b1 ~ U[0,0.5], mu ~ U[3.5,4.5], s ~ U(0,1], 1/lambda ~ U(0,15],
  // alpha, beta, kappa, rho ~ U(0,10]. Held parameters come from the base.
  std::vector<double> random_start(RandomStream& rng) const;

  // True when a free parameter sits at (or numerically on) a bound.
  bool at_boundary(std::span<const double> free_natural) const;

 private:
  FitSpec spec_;
  std::vector<ParameterSlot> slots_;
  std::vector<std::size_t> free_;
};

struct InformationResult {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd eigenvalues;  // ascending
  bool positive_definite = false;
  int near_zero_eigenvalues = 0;
  int non_finite_entries = 0;
  std::optional<std::vector<double>> standard_errors;
  std::optional<Eigen::MatrixXd> covariance;
};

// Near-zero eigenvalue threshold relative to the largest eigenvalue.
inline constexpr double kEigenRelativeThreshold = 1e-8;

// Central-difference Hessian of f at x with steps max(1e-4 |x_i|, 1e-5), followed by an
// eigen-decomposition. Standard errors only when min eigenvalue > threshold * max.
InformationResult observed_information(const Objective& f, std::span<const double> x);

struct EstimateOptions {
  int restarts = 20;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
  int max_iterations = 500;
  bool compute_information = true;
};

struct RestartSummary {
  double neg_log_lik = 0.0;
  StopReason stop = StopReason::non_finite;
  int iterations = 0;
};

struct EstimationResult {
  FitSpec spec;
  ModelParams theta;
  std::vector<std::string> names;       // free parameters
  std::vector<double> estimates;        // free parameters, natural scale
  double neg_log_lik = 0.0;
  std::optional<std::vector<double>> standard_errors;
  std::vector<double> hessian_eigenvalues;
  bool positive_definite = false;
  int near_zero_eigenvalues = 0;
  std::optional<double> mean_sojourn;
  std::optional<double> mean_sojourn_se;
  int restarts_used = 0;
  int restarts_converged = 0;
  long long clamp_events = 0;
  bool converged = false;
  bool at_boundary = false;  // a free parameter on a bound, or almost no expected events
  StopReason stop = StopReason::non_finite;
  std::uint64_t seed = 0;
  std::vector<RestartSummary> restarts;
};

// Restarts run on up to options.threads workers; each restart owns the substream
// derived from (seed, restart index), so results do not depend on the thread count.
EstimationResult estimate(const CountsTable& counts, const ScreeningDesign& design, const FitSpec& spec,
                          const EstimateOptions& options = {});

// Single local fit from a given natural starting point (no random restarts).
EstimationResult estimate_from(const CountsTable& counts, const ScreeningDesign& design, const FitSpec& spec,
                               const ModelParams& start, const EstimateOptions& options = {});

nlohmann::json to_json(const EstimationResult& result);

enum class RidgeMode { held, reoptimized };

struct RidgePoint {
  int index = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double neg_log_lik = 0.0;
};

struct RidgeOptions {
  double alpha0 = 1.0;
  double beta0 = 0.4;
  double alpha_step = 1.0;
  double beta_step = 0.4;
  int count = 100;
  int first_index = 0;
  RidgeMode mode = RidgeMode::held;
};

// -log-likelihood along alpha_i = alpha0 + i * alpha_step, beta_i = beta0 + i * beta_step
// for a gamma sojourn. Non-sojourn parameters are held at `theta` or re-fitted at each
// point (warm-started from the previous point).
std::vector<RidgePoint> ridge_scan(const CountsTable& counts, const ScreeningDesign& design, const ModelParams& theta,
                                   const RidgeOptions& options, const FitSpec& refit_spec = {});

void write_ridge_csv(std::ostream& out, std::span<const RidgePoint> points);

}  // namespace screenlab
