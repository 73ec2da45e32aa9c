#pragma once

#include <iosfwd>
#include <vector>

#include "screenlab/distributions.hpp"
#include "screenlab/screening.hpp"

namespace screenlab {

struct ModelParams {
  SensitivityModel sensitivity;
  PreclinicalIntensity intensity;
  SojournDistribution sojourn;
};

// Which onset intervals contribute a false-negative history term to the interval-case
// probability I_k. `complete` covers every onset interval before screen k; `as_printed`
// drops the interval immediately preceding screen k (and so leaves I_1 with no history
// term at all). Only `complete` matches the simulator.
enum class IntervalTerms { complete, as_printed };

// int_a^b w(x) Q(T - x) dx with the 64-point rule on ceil(b - a) equal panels (at least
// one), times panels_per_year. Requires 0 <= a <= b <= T.
double integrate_wq(double a, double b, double T, const PreclinicalIntensity& w, const SojournDistribution& sojourn,
                    int panels_per_year = 1);

// int_a^b w(x) dx on the same panels as integrate_wq.
double integrate_w(double a, double b, const PreclinicalIntensity& w, int panels_per_year = 1);

// Detection (D) and interval-case (I) probabilities for screens k = 1..K of one cohort;
// element k-1 belongs to screen k.
struct CohortProbabilities {
  double t0 = 0.0;
  std::vector<double> detect;
  std::vector<double> interval;
};

CohortProbabilities cohort_probabilities(double t0, const ModelParams& params, const ScreeningDesign& design,
                                         IntervalTerms terms = IntervalTerms::complete);

// One entry per cohort t_min..t_max. Uses the cached unit-panel lattice when every age
// involved is a whole number of years, and falls back to cohort_probabilities otherwise.
std::vector<CohortProbabilities> all_cohort_probabilities(const ModelParams& params, const ScreeningDesign& design,
                                                          IntervalTerms terms = IntervalTerms::complete);

double prob_screen_detect(int k, double t0, const ModelParams& params, const ScreeningDesign& design);
double prob_interval(int k, double t0, const ModelParams& params, const ScreeningDesign& design,
                     IntervalTerms terms = IntervalTerms::complete);

// Probability of onset before t0 followed by clinical surfacing before t0.
double prob_pre_entry_clinical(double t0, const ModelParams& params);

/// Panel integrals of w(x) Q(T - x) over unit panels [j, j + 1] for all integer T up to
/// max_age, evaluated with the same 64-point rule as integrate_wq. Q is tabulated once
/// per (whole-year lag, node), so a full likelihood costs max_age * 64 survivor calls.
class KernelLattice {
 public:
  KernelLattice(const PreclinicalIntensity& w, const SojournDistribution& sojourn, int max_age);

  int max_age() const noexcept { return max_age_; }
  // int_a^b w(x) Q(T - x) dx for integers 0 <= a <= b <= T <= max_age.
  double wq(int a, int b, int T) const;
  // int_a^b w(x) dx for integers 0 <= a <= b <= max_age.
  double w(int a, int b) const;

 private:
  int max_age_;
  std::vector<double> prefix_wq_;  // (T, j) -> sum over panels < j, row stride max_age + 1
  std::vector<double> prefix_w_;
};

// CSV t0,k,D,I for every cohort and screen of the design.
void write_model_dump(std::ostream& out, const ModelParams& params, const ScreeningDesign& design);

}  // namespace screenlab
