#include "screenlab/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <tuple>

#include "screenlab/csv.hpp"
#include "screenlab/parallel.hpp"

namespace screenlab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogitEdge = 1e-15;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logit(double u) {
  u = std::clamp(u, kLogitEdge, 1.0 - kLogitEdge);
  return std::log(u / (1.0 - u));
}

void check_intensity_bounds(const PreclinicalIntensity& w) {
  if (w.mode() != PreclinicalIntensity::Mode::log_normal) return;
  if (w.mu() < kMuLower || w.mu() > kMuUpper) throw std::domain_error("mu outside [3.5, 4.5]");
  if (!(w.s() > 0.0) || w.s() > kSUpper) throw std::domain_error("s outside (0, 1]");
}

SojournDistribution default_sojourn(SojournFamily family) {
  switch (family) {
    case SojournFamily::exponential:
      return SojournDistribution::exponential(0.4);
    case SojournFamily::gamma:
      return SojournDistribution::gamma(6.25, 2.5);
    case SojournFamily::log_logistic:
      return SojournDistribution::log_logistic(2.2, 4.7);
  }
  throw std::invalid_argument("unknown family");
}

std::optional<double> safe_mean(const SojournDistribution& d) {
  try {
    return d.mean();
  } catch (const std::domain_error&) {
    return std::nullopt;
  }
}

struct FitProblem {
  const CountsTable& counts;
  const ScreeningDesign& design;
  const ParameterSpace& space;

  double natural_objective(std::span<const double> free_natural) const {
    try {
      return neg_log_likelihood(space.with_free(free_natural), counts, design, nullptr, space.spec().terms);
    } catch (const std::domain_error&) {
      return kInf;
    } catch (const std::invalid_argument&) {
      return kInf;
    }
  }

  double objective(std::span<const double> z) const {
    try {
      return natural_objective(space.untransform(z));
    } catch (const std::domain_error&) {
      return kInf;
    }
  }
};

double expected_events(const ModelParams& theta, const CountsTable& counts, const ScreeningDesign& design) {
  const auto probs = all_cohort_probabilities(theta, design);
  double total = 0.0;
  for (const auto& c : counts.cells()) {
    if (c.n == 0) continue;
    const auto& cohort = probs[static_cast<std::size_t>(c.t0 - design.t_min)];
    const auto k = static_cast<std::size_t>(c.k - 1);
    total += static_cast<double>(c.n) * (cohort.detect[k] + cohort.interval[k]);
  }
  return total;
}

EstimationResult finish(const CountsTable& counts, const ScreeningDesign& design, const ParameterSpace& space,
                        std::vector<MinimizeResult> runs, const EstimateOptions& options) {
  EstimationResult out;
  out.spec = space.spec();
  out.names = space.free_names();
  out.seed = options.seed;
  out.restarts_used = static_cast<int>(runs.size());

  std::size_t best = runs.size();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    out.restarts.push_back({runs[i].value, runs[i].stop, runs[i].iterations});
    if (runs[i].converged()) ++out.restarts_converged;
    if (!std::isfinite(runs[i].value)) continue;
    if (best == runs.size() || runs[i].value < runs[best].value) best = i;
  }
  out.converged = out.restarts_converged > 0 && best < runs.size();
  if (best == runs.size()) {
    out.stop = StopReason::non_finite;
    out.neg_log_lik = kInf;
    out.theta = space.spec().base;
    return out;
  }
  const MinimizeResult& run = runs[best];
  out.stop = run.stop;
  out.estimates = space.untransform(run.x);
  out.theta = space.with_free(out.estimates);
  LikelihoodStats stats;
  out.neg_log_lik = neg_log_likelihood(out.theta, counts, design, &stats, space.spec().terms);
  out.clamp_events = stats.clamp_events;
  // A fit that expects essentially no events sits on the edge of the cell-probability
  // simplex even when every parameter is interior (e.g. all intensity mass pushed past
  // the screening ages on data without cases).
  out.at_boundary = space.at_boundary(out.estimates) || expected_events(out.theta, counts, design) < 1e-3;
  out.mean_sojourn = safe_mean(out.theta.sojourn);

  if (options.compute_information && space.dimension() > 0) {
    const FitProblem problem{counts, design, space};
    const Objective f = [&](std::span<const double> x) { return problem.natural_objective(x); };
    InformationResult info = observed_information(f, out.estimates);
    out.hessian_eigenvalues.assign(info.eigenvalues.data(), info.eigenvalues.data() + info.eigenvalues.size());
    out.positive_definite = info.positive_definite;
    out.near_zero_eigenvalues = info.near_zero_eigenvalues;
    out.standard_errors = info.standard_errors;
    if (info.covariance && out.mean_sojourn) {
      // Delta method for the mean sojourn time.
      const std::size_t n = out.estimates.size();
      Eigen::VectorXd grad(static_cast<Eigen::Index>(n));
      std::vector<double> probe = out.estimates;
      bool ok = true;
      for (std::size_t i = 0; i < n; ++i) {
        const double h = std::max(1e-4 * std::abs(probe[i]), 1e-5);
        const double x = probe[i];
        probe[i] = x + h;
        const auto up = safe_mean(space.with_free(probe).sojourn);
        probe[i] = x - h;
        const auto down = safe_mean(space.with_free(probe).sojourn);
        probe[i] = x;
        if (!up || !down) {
          ok = false;
          break;
        }
        grad[static_cast<Eigen::Index>(i)] = (*up - *down) / (2.0 * h);
      }
      if (ok) {
        const double var = grad.dot(*info.covariance * grad);
        if (var >= 0.0) out.mean_sojourn_se = std::sqrt(var);
      }
    }
  }
  return out;
}

}  // namespace

double cell_neg_log_likelihood(long long n, long long s, long long r, double d, double i, long long* clamps) {
  if (!std::isfinite(d) || !std::isfinite(i)) throw std::domain_error("non-finite cell probability");
  const long long rest = n - s - r;
  long long events = 0;
  const auto clamp = [&](double p, long long weight) {
    const double c = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
    if (c != p && weight > 0) ++events;
    return c;
  };
  d = clamp(d, s);
  i = clamp(i, r);
  double log_rest;
  if (1.0 - d - i < kProbFloor) {
    if (rest > 0) ++events;
    log_rest = std::log(kProbFloor);
  } else {
    log_rest = std::log1p(-(d + i));
  }
  double term = 0.0;
  if (r > 0) term += static_cast<double>(r) * std::log(i);
  if (s > 0) term += static_cast<double>(s) * std::log(d);
  if (rest > 0) term += static_cast<double>(rest) * log_rest;
  if (clamps) *clamps += events;
  return -term;
}

double neg_log_likelihood(const ModelParams& params, const CountsTable& counts, const ScreeningDesign& design,
                          LikelihoodStats* stats, IntervalTerms terms) {
  check_intensity_bounds(params.intensity);
  std::vector<std::tuple<int, int, long long, long long, long long>> cells;
  cells.reserve(counts.cells().size());
  for (const auto& c : counts.cells()) {
    if (c.n == 0) continue;
    if (c.t0 < design.t_min || c.t0 > design.t_max || c.k < 1 || c.k > design.screens) {
      throw std::domain_error("counts cell (t0=" + std::to_string(c.t0) + ", k=" + std::to_string(c.k) +
                              ") outside the design");
    }
    cells.emplace_back(c.t0, c.k, c.n, c.s, c.r);
  }
  if (cells.empty()) return 0.0;
  std::sort(cells.begin(), cells.end());

  const auto probs = all_cohort_probabilities(params, design, terms);
  long long clamps = 0;
  double total = 0.0;
  for (const auto& [t0, k, n, s, r] : cells) {
    const auto& cohort = probs[static_cast<std::size_t>(t0 - design.t_min)];
    total += cell_neg_log_likelihood(n, s, r, cohort.detect[static_cast<std::size_t>(k - 1)],
                                     cohort.interval[static_cast<std::size_t>(k - 1)], &clamps);
  }
  if (stats) stats->clamp_events += clamps;
  return total;
}

ParameterSpace::ParameterSpace(FitSpec spec) : spec_(std::move(spec)) {
  if (spec_.base.sojourn.family() != spec_.family) spec_.base.sojourn = default_sojourn(spec_.family);
  if (spec_.fix_b1) spec_.base.sensitivity.b1 = 0.0;
  const bool log_normal = spec_.base.intensity.mode() == PreclinicalIntensity::Mode::log_normal;

  slots_.push_back({"b0", Transform::identity});
  if (!spec_.fix_sensitivity) free_.push_back(slots_.size() - 1);
  slots_.push_back({"b1", Transform::identity});
  if (!spec_.fix_sensitivity && !spec_.fix_b1) free_.push_back(slots_.size() - 1);
  if (log_normal) {
    slots_.push_back({"mu", Transform::mu_interval});
    if (!spec_.fix_intensity) free_.push_back(slots_.size() - 1);
    slots_.push_back({"s", Transform::unit_interval});
    if (!spec_.fix_intensity) free_.push_back(slots_.size() - 1);
  } else {
    // The constant-rate intensity is always held.
    slots_.push_back({"rate", Transform::log});
  }
  const auto add_sojourn = [&](const char* name) {
    slots_.push_back({name, Transform::log});
    if (!spec_.fix_sojourn) free_.push_back(slots_.size() - 1);
  };
  switch (spec_.family) {
    case SojournFamily::exponential:
      add_sojourn("lambda");
      break;
    case SojournFamily::gamma:
      add_sojourn("alpha");
      add_sojourn("beta");
      break;
    case SojournFamily::log_logistic:
      add_sojourn("kappa");
      add_sojourn("rho");
      break;
  }
}

std::vector<std::string> ParameterSpace::free_names() const {
  std::vector<std::string> names;
  for (std::size_t i : free_) names.push_back(slots_[i].name);
  return names;
}

std::vector<double> ParameterSpace::natural(const ModelParams& p) const {
  std::vector<double> v{p.sensitivity.b0, spec_.fix_b1 ? 0.0 : p.sensitivity.b1};
  if (p.intensity.mode() == PreclinicalIntensity::Mode::log_normal) {
    v.push_back(p.intensity.mu());
    v.push_back(p.intensity.s());
  } else {
    v.push_back(p.intensity.rate());
  }
  if (p.sojourn.family() != spec_.family) throw std::invalid_argument("sojourn family does not match the fit");
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Exponential>) {
          v.push_back(d.rate);
        } else if constexpr (std::is_same_v<T, Gamma>) {
          v.push_back(d.shape);
          v.push_back(d.rate);
        } else {
          v.push_back(d.scale);
          v.push_back(d.shape);
        }
      },
      p.sojourn.params());
  return v;
}

ModelParams ParameterSpace::params(std::span<const double> v) const {
  if (v.size() != slots_.size()) throw std::invalid_argument("parameter vector has the wrong length");
  ModelParams p = spec_.base;
  p.sensitivity.b0 = v[0];
  p.sensitivity.b1 = spec_.fix_b1 ? 0.0 : v[1];
  std::size_t at = 2;
  if (p.intensity.mode() == PreclinicalIntensity::Mode::log_normal) {
    p.intensity = PreclinicalIntensity::log_normal(v[2], v[3], spec_.base.intensity.lifetime_risk());
    at = 4;
  } else {
    p.intensity = PreclinicalIntensity::constant(v[2]);
    at = 3;
  }
  switch (spec_.family) {
    case SojournFamily::exponential:
      p.sojourn = SojournDistribution::exponential(v[at]);
      break;
    case SojournFamily::gamma:
      p.sojourn = SojournDistribution::gamma(v[at], v[at + 1]);
      break;
    case SojournFamily::log_logistic:
      p.sojourn = SojournDistribution::log_logistic(v[at], v[at + 1]);
      break;
  }
  return p;
}

std::vector<double> ParameterSpace::free_natural(const ModelParams& p) const {
  const auto all = natural(p);
  std::vector<double> out;
  for (std::size_t i : free_) out.push_back(all[i]);
  return out;
}

ModelParams ParameterSpace::with_free(std::span<const double> free_natural) const {
  if (free_natural.size() != free_.size()) throw std::invalid_argument("free vector has the wrong length");
  auto all = natural(spec_.base);
  for (std::size_t i = 0; i < free_.size(); ++i) all[free_[i]] = free_natural[i];
  return params(all);
}

std::vector<double> ParameterSpace::transform(std::span<const double> x) const {
  if (x.size() != free_.size()) throw std::invalid_argument("free vector has the wrong length");
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    switch (slots_[free_[i]].transform) {
      case Transform::identity:
        z[i] = x[i];
        break;
      case Transform::log:
        if (!(x[i] > 0.0)) throw std::domain_error(slots_[free_[i]].name + " must be positive");
        z[i] = std::log(x[i]);
        break;
      case Transform::unit_interval:
        if (!(x[i] > 0.0 && x[i] <= 1.0)) throw std::domain_error("s outside (0, 1]");
        z[i] = logit(x[i]);
        break;
      case Transform::mu_interval:
        if (!(x[i] >= kMuLower && x[i] <= kMuUpper)) throw std::domain_error("mu outside [3.5, 4.5]");
        z[i] = logit((x[i] - kMuLower) / (kMuUpper - kMuLower));
        break;
    }
  }
  return z;
}

std::vector<double> ParameterSpace::untransform(std::span<const double> z) const {
  if (z.size() != free_.size()) throw std::invalid_argument("unconstrained vector has the wrong length");
  std::vector<double> x(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i])) throw std::domain_error("untransform: non-finite input");
    switch (slots_[free_[i]].transform) {
      case Transform::identity:
        x[i] = z[i];
        break;
      case Transform::log:
        x[i] = std::exp(z[i]);
        break;
      case Transform::unit_interval:
        x[i] = sigmoid(z[i]);
        break;
      case Transform::mu_interval:
        x[i] = kMuLower + (kMuUpper - kMuLower) * sigmoid(z[i]);
        break;
    }
  }
  return x;
}

std::vector<double> ParameterSpace::random_start(RandomStream& rng) const {
  auto all = natural(spec_.base);
  // Every slot consumes one draw, held or not, so streams line up across fit variants.
  std::vector<double> draw(slots_.size());
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const double u = uniform_open(rng);
    const std::string& name = slots_[i].name;
    if (name == "b0") draw[i] = 5.0 * u;
    else if (name == "b1") draw[i] = 0.5 * u;
    else if (name == "mu") draw[i] = kMuLower + (kMuUpper - kMuLower) * u;
    else if (name == "s") draw[i] = u;
    else if (name == "lambda") draw[i] = 1.0 / (15.0 * u);
    else if (name == "rate") draw[i] = all[i];
    else draw[i] = 10.0 * u;
  }
  std::vector<double> out;
  for (std::size_t i : free_) out.push_back(draw[i]);
  return out;
}

bool ParameterSpace::at_boundary(std::span<const double> x) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    switch (slots_[free_[i]].transform) {
      case Transform::identity:
        if (std::abs(x[i]) > 50.0) return true;
        break;
      case Transform::log:
        if (std::abs(std::log(x[i])) > 25.0) return true;
        break;
      case Transform::unit_interval:
        if (x[i] < 1e-6 || x[i] > 1.0 - 1e-6) return true;
        break;
      case Transform::mu_interval:
        if (x[i] < kMuLower + 1e-6 || x[i] > kMuUpper - 1e-6) return true;
        break;
    }
  }
  return false;
}

InformationResult observed_information(const Objective& f, std::span<const double> x) {
  const std::size_t n = x.size();
  InformationResult out;
  out.hessian = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = std::max(1e-4 * std::abs(x[i]), 1e-5);
  std::vector<double> p(x.begin(), x.end());
  const auto eval = [&](std::size_t i, double di, std::size_t j, double dj) {
    p[i] += di;
    p[j] += dj;
    const double v = f(p);
    p[i] = x[i];
    p[j] = x[j];
    return v;
  };
  const double f0 = f(p);
  for (std::size_t i = 0; i < n; ++i) {
    const double up = eval(i, h[i], i, 0.0);
    const double down = eval(i, -h[i], i, 0.0);
    out.hessian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = (up - 2.0 * f0 + down) / (h[i] * h[i]);
    for (std::size_t j = 0; j < i; ++j) {
      const double pp = eval(i, h[i], j, h[j]);
      const double pm = eval(i, h[i], j, -h[j]);
      const double mp = eval(i, -h[i], j, h[j]);
      const double mm = eval(i, -h[i], j, -h[j]);
      const double v = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
      out.hessian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      out.hessian(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  for (Eigen::Index i = 0; i < out.hessian.size(); ++i) {
    if (!std::isfinite(out.hessian.data()[i])) ++out.non_finite_entries;
  }
  if (out.non_finite_entries > 0 || n == 0) return out;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(out.hessian);
  out.eigenvalues = solver.eigenvalues();
  const double largest = out.eigenvalues.cwiseAbs().maxCoeff();
  const double threshold = kEigenRelativeThreshold * largest;
  for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i) {
    if (std::abs(out.eigenvalues[i]) <= threshold) ++out.near_zero_eigenvalues;
  }
  out.positive_definite = largest > 0.0 && out.eigenvalues.minCoeff() > threshold;
  if (out.positive_definite) {
    const Eigen::MatrixXd& V = solver.eigenvectors();
    Eigen::MatrixXd cov = V * out.eigenvalues.cwiseInverse().asDiagonal() * V.transpose();
    std::vector<double> se(n);
    for (std::size_t i = 0; i < n; ++i) se[i] = std::sqrt(cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
    out.standard_errors = std::move(se);
    out.covariance = std::move(cov);
  }
  return out;
}

EstimationResult estimate(const CountsTable& counts, const ScreeningDesign& design, const FitSpec& spec,
                          const EstimateOptions& options) {
  if (counts.empty()) throw std::invalid_argument("estimate: empty counts table");
  const ParameterSpace space(spec);
  const FitProblem problem{counts, design, space};
  const Objective f = [&](std::span<const double> z) { return problem.objective(z); };
  MinimizeOptions mopts;
  mopts.max_iterations = options.max_iterations;

  const int restarts = std::max(1, options.restarts);
  std::vector<MinimizeResult> runs(static_cast<std::size_t>(restarts));
  parallel_for(restarts, worker_count(options.threads, restarts), [&](int r) {
    RandomStream rng = make_stream(options.seed, {static_cast<std::uint64_t>(r)});
    try {
      runs[static_cast<std::size_t>(r)] = minimize_bfgs(f, space.transform(space.random_start(rng)), mopts);
    } catch (const std::exception&) {
      runs[static_cast<std::size_t>(r)] = MinimizeResult{{}, kInf, {}, 0, 0, StopReason::non_finite};
    }
  });
  return finish(counts, design, space, std::move(runs), options);
}

EstimationResult estimate_from(const CountsTable& counts, const ScreeningDesign& design, const FitSpec& spec,
                               const ModelParams& start, const EstimateOptions& options) {
  const ParameterSpace space(spec);
  const FitProblem problem{counts, design, space};
  const Objective f = [&](std::span<const double> z) { return problem.objective(z); };
  MinimizeOptions mopts;
  mopts.max_iterations = options.max_iterations;
  std::vector<MinimizeResult> runs;
  runs.push_back(minimize_bfgs(f, space.transform(space.free_natural(start)), mopts));
  return finish(counts, design, space, std::move(runs), options);
}

nlohmann::json to_json(const EstimationResult& r) {
  using nlohmann::json;
  const auto number = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json params = json::object();
  json ses = json::object();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    params[r.names[i]] = number(r.estimates.size() > i ? r.estimates[i] : NAN);
    ses[r.names[i]] = r.standard_errors ? number((*r.standard_errors)[i]) : json(nullptr);
  }
  json eig = json::array();
  for (double v : r.hessian_eigenvalues) eig.push_back(number(v));
  json restarts = json::array();
  for (const auto& s : r.restarts) {
    restarts.push_back({{"neg_log_lik", number(s.neg_log_lik)}, {"stop", to_string(s.stop)}, {"iterations", s.iterations}});
  }
  json theta;
  theta["sensitivity"] = r.theta.sensitivity;
  theta["intensity"] = r.theta.intensity;
  theta["sojourn"] = r.theta.sojourn;
  return {
      {"family", to_string(r.spec.family)},
      {"fix_b1", r.spec.fix_b1},
      {"estimates", params},
      {"standard_errors", ses},
      {"theta", theta},
      {"neg_log_lik", number(r.neg_log_lik)},
      {"hessian_eigenvalues", eig},
      {"positive_definite", r.positive_definite},
      {"near_zero_eigenvalues", r.near_zero_eigenvalues},
      {"mean_sojourn", r.mean_sojourn ? number(*r.mean_sojourn) : json(nullptr)},
      {"mean_sojourn_se", r.mean_sojourn_se ? number(*r.mean_sojourn_se) : json(nullptr)},
      {"restarts", r.restarts_used},
      {"restarts_converged", r.restarts_converged},
      {"restart_runs", restarts},
      {"clamp_events", r.clamp_events},
      {"converged", r.converged},
      {"at_boundary", r.at_boundary},
      {"stop", to_string(r.stop)},
      {"seed", r.seed},
  };
}

std::vector<RidgePoint> ridge_scan(const CountsTable& counts, const ScreeningDesign& design, const ModelParams& theta,
                                   const RidgeOptions& options, const FitSpec& refit_spec) {
  std::vector<RidgePoint> out;
  out.reserve(static_cast<std::size_t>(std::max(0, options.count)));
  ModelParams current = theta;
  for (int n = 0; n < options.count; ++n) {
    const int i = options.first_index + n;
    RidgePoint pt{i, options.alpha0 + i * options.alpha_step, options.beta0 + i * options.beta_step, kInf};
    current.sojourn = SojournDistribution::gamma(pt.alpha, pt.beta);
    if (options.mode == RidgeMode::held) {
      try {
        pt.neg_log_lik = neg_log_likelihood(current, counts, design);
      } catch (const std::domain_error&) {
      }
    } else {
      FitSpec spec = refit_spec;
      spec.family = SojournFamily::gamma;
      spec.fix_sojourn = true;
      spec.base = current;
      EstimateOptions eo;
      eo.compute_information = false;
      const EstimationResult fit = estimate_from(counts, design, spec, current, eo);
      pt.neg_log_lik = fit.neg_log_lik;
      if (std::isfinite(fit.neg_log_lik)) current = fit.theta;
    }
    out.push_back(pt);
  }
  return out;
}

void write_ridge_csv(std::ostream& out, std::span<const RidgePoint> points) {
  out << "index,alpha,beta,negloglik\n";
  for (const auto& p : points) {
    out << p.index << ',' << csv::format(p.alpha) << ',' << csv::format(p.beta) << ',' << csv::format(p.neg_log_lik)
        << '\n';
  }
}

}  // namespace screenlab
