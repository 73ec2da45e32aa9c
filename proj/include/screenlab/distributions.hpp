#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "json.hpp"
#include "screenlab/random.hpp"

namespace screenlab {

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
// Series expansion below x = a + 1, Lentz continued fraction above.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

enum class SojournFamily { exponential, gamma, log_logistic };

std::string_view to_string(SojournFamily family);
SojournFamily parse_family(std::string_view name);

struct Exponential {
  double rate;  // 1/years
  friend bool operator==(const Exponential&, const Exponential&) = default;
};

struct Gamma {
  double shape;  // dimensionless
  double rate;   // 1/years
  friend bool operator==(const Gamma&, const Gamma&) = default;
};

struct LogLogistic {
  double scale;  // years
  double shape;  // dimensionless
  friend bool operator==(const LogLogistic&, const LogLogistic&) = default;
};

/// Distribution of the time spent in the preclinical (screen-detectable) state.
///
/// Survivor Q(t) = P(J > t). All three families have support [0, inf).
class SojournDistribution {
 public:
  using Variant = std::variant<Exponential, Gamma, LogLogistic>;

  // Unit-rate exponential.
  SojournDistribution() : params_(Exponential{1.0}) {}

  static SojournDistribution exponential(double rate);
  static SojournDistribution gamma(double shape, double rate);
  static SojournDistribution log_logistic(double scale, double shape);

  SojournFamily family() const noexcept;
  const Variant& params() const noexcept { return params_; }

  double survivor(double t) const;
  double cdf(double t) const { return 1.0 - survivor(t); }
  double density(double t) const;
  // Smallest t with cdf(t) = p, for p in (0, 1).
  double quantile(double p) const;
  // Throws std::domain_error for a log-logistic with shape <= 1.
  double mean() const;
  double sample(RandomStream& rng) const;

  friend bool operator==(const SojournDistribution&, const SojournDistribution&) = default;

 private:
  explicit SojournDistribution(Variant v) : params_(v) {}
  Variant params_;
};

/// Age-specific rate of entering the preclinical state.
///
/// The log-normal mode is a sub-density: lifetimeRisk times a LN(mu, s^2) density, so
/// it integrates to the lifetime risk rather than one. The constant mode is a flat
/// hazard per person-year.
class PreclinicalIntensity {
 public:
  enum class Mode { log_normal, constant };

  static PreclinicalIntensity log_normal(double mu, double s, double lifetime_risk);
  static PreclinicalIntensity constant(double rate_per_year);

  Mode mode() const noexcept { return mode_; }
  double mu() const noexcept { return mu_; }
  double s() const noexcept { return s_; }
  double lifetime_risk() const noexcept { return risk_; }
  double rate() const noexcept { return rate_; }

  double operator()(double t) const;
  // Integral of the intensity over [t1, t2]; t2 may be +inf in log-normal mode.
  double integral(double t1, double t2) const;

  friend bool operator==(const PreclinicalIntensity&, const PreclinicalIntensity&) = default;

 private:
  Mode mode_ = Mode::log_normal;
  double mu_ = 0.0;
  double s_ = 1.0;
  double risk_ = 0.0;
  double rate_ = 0.0;
};

/// Logistic, age-dependent probability that a screen detects a preclinical case.
struct SensitivityModel {
  double b0 = 0.0;    // log-odds at the reference age
  double b1 = 0.0;    // log-odds slope per year
  double tbar = 52.0; // reference age, years

  static SensitivityModel constant(double probability, double tbar = 52.0);

  double operator()(double t) const;

  friend bool operator==(const SensitivityModel&, const SensitivityModel&) = default;
};

void to_json(nlohmann::json& j, const SojournDistribution& d);
void to_json(nlohmann::json& j, const PreclinicalIntensity& w);
void from_json(const nlohmann::json& j, PreclinicalIntensity& w);
void to_json(nlohmann::json& j, const SensitivityModel& m);
void from_json(const nlohmann::json& j, SensitivityModel& m);

}  // namespace screenlab

// nlohmann needs a default-constructible type for from_json; route through adl_serializer.
namespace nlohmann {
template <>
struct adl_serializer<screenlab::SojournDistribution> {
  static screenlab::SojournDistribution from_json(const json& j);
  static void to_json(json& j, const screenlab::SojournDistribution& d) { screenlab::to_json(j, d); }
};
}  // namespace nlohmann
