#include "screenlab/distributions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace screenlab {
namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 1'000'000;

double log_gamma_prefactor(double a, double x) { return a * std::log(x) - x - std::lgamma(a); }

double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) {
      return sum * std::exp(log_gamma_prefactor(a, x));
    }
  }
  throw std::runtime_error("regularized_gamma: series did not converge");
}

double gamma_q_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return std::exp(log_gamma_prefactor(a, x)) * h;
  }
  throw std::runtime_error("regularized_gamma: continued fraction did not converge");
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be positive and finite");
  }
}

double standard_normal_upper(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || std::isnan(x)) throw std::domain_error("regularized_gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || std::isnan(x)) throw std::domain_error("regularized_gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_fraction(a, x);
}

std::string_view to_string(SojournFamily family) {
  switch (family) {
    case SojournFamily::exponential:
      return "exponential";
    case SojournFamily::gamma:
      return "gamma";
    case SojournFamily::log_logistic:
      return "log-logistic";
  }
  return "unknown";
}

SojournFamily parse_family(std::string_view name) {
  if (name == "exponential" || name == "exp") return SojournFamily::exponential;
  if (name == "gamma") return SojournFamily::gamma;
  if (name == "log-logistic" || name == "loglogistic" || name == "log_logistic") {
    return SojournFamily::log_logistic;
  }
  throw std::invalid_argument("unknown sojourn family '" + std::string(name) + "'");
}

SojournDistribution SojournDistribution::exponential(double rate) {
  require_positive(rate, "exponential rate");
  return SojournDistribution(Exponential{rate});
}

SojournDistribution SojournDistribution::gamma(double shape, double rate) {
  require_positive(shape, "gamma shape");
  require_positive(rate, "gamma rate");
  return SojournDistribution(Gamma{shape, rate});
}

SojournDistribution SojournDistribution::log_logistic(double scale, double shape) {
  require_positive(scale, "log-logistic scale");
  require_positive(shape, "log-logistic shape");
  return SojournDistribution(LogLogistic{scale, shape});
}

SojournFamily SojournDistribution::family() const noexcept {
  switch (params_.index()) {
    case 0:
      return SojournFamily::exponential;
    case 1:
      return SojournFamily::gamma;
    default:
      return SojournFamily::log_logistic;
  }
}

double SojournDistribution::survivor(double t) const {
  if (t < 0.0 || std::isnan(t)) throw std::domain_error("survivor: negative time");
  if (const auto* e = std::get_if<Exponential>(&params_)) return std::exp(-e->rate * t);
  if (const auto* g = std::get_if<Gamma>(&params_)) return regularized_gamma_q(g->shape, g->rate * t);
  const auto& ll = std::get<LogLogistic>(params_);
  return 1.0 / (1.0 + std::pow(t / ll.scale, ll.shape));
}

double SojournDistribution::density(double t) const {
  if (t < 0.0 || std::isnan(t)) throw std::domain_error("density: negative time");
  if (const auto* e = std::get_if<Exponential>(&params_)) return e->rate * std::exp(-e->rate * t);
  if (const auto* g = std::get_if<Gamma>(&params_)) {
    if (t == 0.0) {
      if (g->shape < 1.0) return std::numeric_limits<double>::infinity();
      return g->shape == 1.0 ? g->rate : 0.0;
    }
    return std::exp(g->shape * std::log(g->rate) + (g->shape - 1.0) * std::log(t) - g->rate * t -
                    std::lgamma(g->shape));
  }
  const auto& ll = std::get<LogLogistic>(params_);
  const double u = t / ll.scale;
  const double up = std::pow(u, ll.shape);
  if (t == 0.0) {
    if (ll.shape < 1.0) return std::numeric_limits<double>::infinity();
    return ll.shape == 1.0 ? 1.0 / ll.scale : 0.0;
  }
  return ll.shape / ll.scale * up / u / ((1.0 + up) * (1.0 + up));
}

double SojournDistribution::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile: p must lie in (0, 1)");
  if (const auto* e = std::get_if<Exponential>(&params_)) return -std::log1p(-p) / e->rate;
  if (const auto* ll = std::get_if<LogLogistic>(&params_)) {
    return ll->scale * std::pow(p / (1.0 - p), 1.0 / ll->shape);
  }
  // Gamma: bisection on the survivor, bracket grown from the mean.
  const auto& g = std::get<Gamma>(params_);
  const double target = 1.0 - p;
  double lo = 0.0;
  double hi = g.shape / g.rate;
  while (regularized_gamma_q(g.shape, g.rate * hi) > target) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 400 && hi - lo > 1e-14 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (regularized_gamma_q(g.shape, g.rate * mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double SojournDistribution::mean() const {
  if (const auto* e = std::get_if<Exponential>(&params_)) return 1.0 / e->rate;
  if (const auto* g = std::get_if<Gamma>(&params_)) return g->shape / g->rate;
  const auto& ll = std::get<LogLogistic>(params_);
  if (ll.shape <= 1.0) throw std::domain_error("log-logistic mean undefined for shape <= 1");
  const double b = std::numbers::pi / ll.shape;
  return ll.scale * b / std::sin(b);
}

double SojournDistribution::sample(RandomStream& rng) const {
  if (const auto* g = std::get_if<Gamma>(&params_)) {
    std::gamma_distribution<double> draw(g->shape, 1.0 / g->rate);
    return draw(rng);
  }
  const double u = uniform_open(rng);
  if (const auto* e = std::get_if<Exponential>(&params_)) return -std::log(u) / e->rate;
  const auto& ll = std::get<LogLogistic>(params_);
  // Inverse of the cdf (t/k)^r / (1 + (t/k)^r).
  return ll.scale * std::pow(u / (1.0 - u), 1.0 / ll.shape);
}

PreclinicalIntensity PreclinicalIntensity::log_normal(double mu, double s, double lifetime_risk) {
  if (!std::isfinite(mu)) throw std::invalid_argument("intensity mu must be finite");
  require_positive(s, "intensity s");
  if (!(lifetime_risk >= 0.0 && lifetime_risk <= 1.0)) {
    throw std::invalid_argument("lifetime risk must lie in [0, 1]");
  }
  PreclinicalIntensity w;
  w.mode_ = Mode::log_normal;
  w.mu_ = mu;
  w.s_ = s;
  w.risk_ = lifetime_risk;
  return w;
}

PreclinicalIntensity PreclinicalIntensity::constant(double rate_per_year) {
  if (!(rate_per_year >= 0.0) || !std::isfinite(rate_per_year)) {
    throw std::invalid_argument("constant intensity rate must be non-negative");
  }
  PreclinicalIntensity w;
  w.mode_ = Mode::constant;
  w.rate_ = rate_per_year;
  return w;
}

double PreclinicalIntensity::operator()(double t) const {
  if (!(t > 0.0)) throw std::domain_error("intensity: age must be positive");
  if (mode_ == Mode::constant) return rate_;
  const double z = (std::log(t) - mu_) / s_;
  return risk_ / (t * s_ * std::sqrt(2.0 * std::numbers::pi)) * std::exp(-0.5 * z * z);
}

double PreclinicalIntensity::integral(double t1, double t2) const {
  if (t1 < 0.0 || !(t1 <= t2)) throw std::domain_error("intensity integral: need 0 <= t1 <= t2");
  if (t1 == t2) return 0.0;
  if (mode_ == Mode::constant) return rate_ * (t2 - t1);
  // Difference of tails taken on the side where it does not cancel.
  const auto z = [this](double t) {
    if (t == 0.0) return -std::numeric_limits<double>::infinity();
    if (std::isinf(t)) return std::numeric_limits<double>::infinity();
    return (std::log(t) - mu_) / s_;
  };
  const double z1 = z(t1);
  const double z2 = z(t2);
  if (z1 >= 0.0) return risk_ * (standard_normal_upper(z1) - standard_normal_upper(z2));
  return risk_ * (standard_normal_upper(-z2) - standard_normal_upper(-z1));
}

SensitivityModel SensitivityModel::constant(double probability, double tbar) {
  if (!(probability > 0.0 && probability < 1.0)) {
    throw std::invalid_argument("constant sensitivity must lie in (0, 1)");
  }
  return SensitivityModel{std::log(probability / (1.0 - probability)), 0.0, tbar};
}

double SensitivityModel::operator()(double t) const {
  return 1.0 / (1.0 + std::exp(-b0 - b1 * (t - tbar)));
}

void to_json(nlohmann::json& j, const SojournDistribution& d) {
  if (const auto* e = std::get_if<Exponential>(&d.params())) {
    j = {{"family", "exponential"}, {"lambda", e->rate}};
  } else if (const auto* g = std::get_if<Gamma>(&d.params())) {
    j = {{"family", "gamma"}, {"alpha", g->shape}, {"beta", g->rate}};
  } else {
    const auto& ll = std::get<LogLogistic>(d.params());
    j = {{"family", "log-logistic"}, {"kappa", ll.scale}, {"rho", ll.shape}};
  }
}

void to_json(nlohmann::json& j, const PreclinicalIntensity& w) {
  if (w.mode() == PreclinicalIntensity::Mode::constant) {
    j = {{"mode", "constant"}, {"rate", w.rate()}};
  } else {
    j = {{"mu", w.mu()}, {"s", w.s()}, {"risk", w.lifetime_risk()}};
  }
}

void from_json(const nlohmann::json& j, PreclinicalIntensity& w) {
  if (j.value("mode", std::string("log-normal")) == "constant") {
    w = PreclinicalIntensity::constant(j.at("rate").get<double>());
  } else {
    w = PreclinicalIntensity::log_normal(j.at("mu").get<double>(), j.at("s").get<double>(),
                                         j.value("risk", 0.15));
  }
}

void to_json(nlohmann::json& j, const SensitivityModel& m) {
  j = {{"b0", m.b0}, {"b1", m.b1}, {"tbar", m.tbar}};
}

void from_json(const nlohmann::json& j, SensitivityModel& m) {
  m.b0 = j.at("b0").get<double>();
  m.b1 = j.value("b1", 0.0);
  m.tbar = j.value("tbar", 52.0);
}

}  // namespace screenlab

namespace nlohmann {

screenlab::SojournDistribution adl_serializer<screenlab::SojournDistribution>::from_json(const json& j) {
  using screenlab::SojournDistribution;
  switch (screenlab::parse_family(j.at("family").get<std::string>())) {
    case screenlab::SojournFamily::exponential:
      return SojournDistribution::exponential(j.at("lambda").get<double>());
    case screenlab::SojournFamily::gamma:
      return SojournDistribution::gamma(j.at("alpha").get<double>(), j.at("beta").get<double>());
    case screenlab::SojournFamily::log_logistic:
      return SojournDistribution::log_logistic(j.at("kappa").get<double>(), j.at("rho").get<double>());
  }
  throw std::invalid_argument("unreachable sojourn family");
}

}  // namespace nlohmann
