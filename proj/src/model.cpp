#include "screenlab/model.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "screenlab/csv.hpp"
#include "screenlab/quadrature.hpp"

namespace screenlab {
namespace {

std::size_t panel_count(double a, double b, int panels_per_year) {
  const double span = (b - a) * panels_per_year;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span - 1e-9)));
}

bool is_whole(double x) { return std::abs(x - std::round(x)) < 1e-12; }

// Shared assembly of D_k and I_k. Kernel supplies wq(a, b, T) and w(a, b).
template <class Kernel>
CohortProbabilities assemble(double t0, const SensitivityModel& sensitivity, const ScreeningDesign& design,
                             IntervalTerms terms, const Kernel& kernel) {
  const int K = design.screens;
  // age[i + 1] holds t_i for i = -1..K, with t_{-1} = 0.
  std::vector<double> age(static_cast<std::size_t>(K) + 2);
  age[0] = 0.0;
  for (int i = 0; i <= K; ++i) age[static_cast<std::size_t>(i) + 1] = design.screen_age(t0, i);
  const auto t = [&](int i) { return age[static_cast<std::size_t>(i + 1)]; };

  std::vector<double> miss(static_cast<std::size_t>(K));
  for (int i = 0; i < K; ++i) miss[static_cast<std::size_t>(i)] = 1.0 - sensitivity(t(i));

  CohortProbabilities out;
  out.t0 = t0;
  out.detect.resize(static_cast<std::size_t>(K));
  out.interval.resize(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) {
    const double screen = t(k - 1);
    const double next = t(k);
    // Onset intervals i = k-1, k-2, ..., 0, accumulating the false-negative product
    // over screens i..k-2 as i decreases.
    double detect_sum = 0.0;
    double interval_sum = 0.0;
    double missed_before = 1.0;  // prod_{j=i}^{k-2} (1 - Phi(t_j))
    const int last_history = terms == IntervalTerms::complete ? k - 1 : k - 2;
    for (int i = k - 1; i >= 0; --i) {
      if (i < k - 1) missed_before *= miss[static_cast<std::size_t>(i)];
      const double at_screen = kernel.wq(t(i - 1), t(i), screen);
      detect_sum += missed_before * at_screen;
      if (i <= last_history) {
        const double at_next = kernel.wq(t(i - 1), t(i), next);
        interval_sum += missed_before * miss[static_cast<std::size_t>(k - 1)] * (at_screen - at_next);
      }
    }
    const double fresh = kernel.w(screen, next) - kernel.wq(screen, next, next);
    out.detect[static_cast<std::size_t>(k - 1)] = (1.0 - miss[static_cast<std::size_t>(k - 1)]) * detect_sum;
    out.interval[static_cast<std::size_t>(k - 1)] = interval_sum + fresh;
  }
  return out;
}

struct DirectKernel {
  const PreclinicalIntensity& intensity;
  const SojournDistribution& sojourn;
  double wq(double a, double b, double T) const { return integrate_wq(a, b, T, intensity, sojourn); }
  double w(double a, double b) const { return integrate_w(a, b, intensity); }
};

struct LatticeKernel {
  const KernelLattice& lattice;
  static int whole(double x) { return static_cast<int>(std::lround(x)); }
  double wq(double a, double b, double T) const { return lattice.wq(whole(a), whole(b), whole(T)); }
  double w(double a, double b) const { return lattice.w(whole(a), whole(b)); }
};

void check_screen(int k, const ScreeningDesign& design) {
  if (k < 1 || k > design.screens) {
    throw std::out_of_range("screen index " + std::to_string(k) + " outside 1.." + std::to_string(design.screens));
  }
}

}  // namespace

double integrate_wq(double a, double b, double T, const PreclinicalIntensity& w, const SojournDistribution& sojourn,
                    int panels_per_year) {
  if (a < 0.0 || !(a <= b) || !(b <= T)) throw std::domain_error("integrate_wq: need 0 <= a <= b <= T");
  if (a == b) return 0.0;
  const auto f = [&](double x) { return w(x) * sojourn.survivor(std::max(0.0, T - x)); };
  return gauss_legendre(f, a, b, panel_count(a, b, panels_per_year));
}

double integrate_w(double a, double b, const PreclinicalIntensity& w, int panels_per_year) {
  if (a < 0.0 || !(a <= b)) throw std::domain_error("integrate_w: need 0 <= a <= b");
  if (a == b) return 0.0;
  return gauss_legendre([&](double x) { return w(x); }, a, b, panel_count(a, b, panels_per_year));
}

CohortProbabilities cohort_probabilities(double t0, const ModelParams& params, const ScreeningDesign& design,
                                         IntervalTerms terms) {
  if (!(t0 > 0.0)) throw std::domain_error("cohort_probabilities: t0 must be positive");
  const DirectKernel kernel{params.intensity, params.sojourn};
  return assemble(t0, params.sensitivity, design, terms, kernel);
}

std::vector<CohortProbabilities> all_cohort_probabilities(const ModelParams& params, const ScreeningDesign& design,
                                                          IntervalTerms terms) {
  std::vector<CohortProbabilities> out;
  out.reserve(design.cohort_count());
  if (is_whole(design.interval)) {
    const int max_age = design.t_max + static_cast<int>(std::lround(design.program_years()));
    const KernelLattice lattice(params.intensity, params.sojourn, max_age);
    const LatticeKernel kernel{lattice};
    for (int t0 = design.t_min; t0 <= design.t_max; ++t0) {
      out.push_back(assemble(t0, params.sensitivity, design, terms, kernel));
    }
    return out;
  }
  for (int t0 = design.t_min; t0 <= design.t_max; ++t0) out.push_back(cohort_probabilities(t0, params, design, terms));
  return out;
}

double prob_screen_detect(int k, double t0, const ModelParams& params, const ScreeningDesign& design) {
  check_screen(k, design);
  return cohort_probabilities(t0, params, design).detect[static_cast<std::size_t>(k - 1)];
}

double prob_interval(int k, double t0, const ModelParams& params, const ScreeningDesign& design, IntervalTerms terms) {
  check_screen(k, design);
  return cohort_probabilities(t0, params, design, terms).interval[static_cast<std::size_t>(k - 1)];
}

double prob_pre_entry_clinical(double t0, const ModelParams& params) {
  if (!(t0 > 0.0)) throw std::domain_error("prob_pre_entry_clinical: t0 must be positive");
  return integrate_w(0.0, t0, params.intensity) - integrate_wq(0.0, t0, t0, params.intensity, params.sojourn);
}

KernelLattice::KernelLattice(const PreclinicalIntensity& w, const SojournDistribution& sojourn, int max_age)
    : max_age_(max_age) {
  if (max_age < 1) throw std::invalid_argument("KernelLattice: max_age must be positive");
  const auto& rule = gauss_legendre_unit();
  constexpr std::size_t G = kGaussOrder;
  const auto M = static_cast<std::size_t>(max_age);

  // weighted[j][g] = weight_g * w(j + node_g); lag[m][g] = Q(m + node_g).
  std::vector<double> weighted(M * G);
  std::vector<double> lag(M * G);
  for (std::size_t j = 0; j < M; ++j) {
    for (std::size_t g = 0; g < G; ++g) {
      weighted[j * G + g] = rule.weights[g] * w(static_cast<double>(j) + rule.nodes[g]);
      lag[j * G + g] = sojourn.survivor(static_cast<double>(j) + rule.nodes[g]);
    }
  }

  const std::size_t stride = M + 1;
  prefix_w_.assign(stride, 0.0);
  for (std::size_t j = 0; j < M; ++j) {
    double sum = 0.0;
    for (std::size_t g = 0; g < G; ++g) sum += weighted[j * G + g];
    prefix_w_[j + 1] = prefix_w_[j] + sum;
  }

  // Panel j at horizon T: T - (j + node_g) = (T - j - 1) + node_{G-1-g}.
  prefix_wq_.assign(stride * stride, 0.0);
  for (std::size_t T = 1; T <= M; ++T) {
    double* row = &prefix_wq_[T * stride];
    for (std::size_t j = 0; j < T; ++j) {
      const double* wj = &weighted[j * G];
      const double* q = &lag[(T - j - 1) * G];
      double sum = 0.0;
      for (std::size_t g = 0; g < G; ++g) sum += wj[g] * q[G - 1 - g];
      row[j + 1] = row[j] + sum;
    }
  }
}

double KernelLattice::wq(int a, int b, int T) const {
  if (a < 0 || a > b || b > T || T > max_age_) throw std::out_of_range("KernelLattice::wq bounds");
  const auto stride = static_cast<std::size_t>(max_age_) + 1;
  const double* row = &prefix_wq_[static_cast<std::size_t>(T) * stride];
  return row[b] - row[a];
}

double KernelLattice::w(int a, int b) const {
  if (a < 0 || a > b || b > max_age_) throw std::out_of_range("KernelLattice::w bounds");
  return prefix_w_[static_cast<std::size_t>(b)] - prefix_w_[static_cast<std::size_t>(a)];
}

void write_model_dump(std::ostream& out, const ModelParams& params, const ScreeningDesign& design) {
  out << "t0,k,D,I\n";
  for (const auto& cohort : all_cohort_probabilities(params, design)) {
    for (std::size_t k = 0; k < cohort.detect.size(); ++k) {
      out << csv::format(cohort.t0) << ',' << (k + 1) << ',' << csv::format(cohort.detect[k]) << ','
          << csv::format(cohort.interval[k]) << '\n';
    }
  }
}

}  // namespace screenlab
