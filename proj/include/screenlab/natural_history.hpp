#pragma once

#include <cstddef>
#include <vector>

#include "screenlab/distributions.hpp"
#include "screenlab/random.hpp"

namespace screenlab {

enum class CasePhase { preclinical_at_entry, onset_during_program };

struct CaseRecord {
  double t0 = 0.0;       // entry age
  double onset = 0.0;    // age at entry into the preclinical state
  double sojourn = 0.0;  // years spent preclinical
  CasePhase phase = CasePhase::preclinical_at_entry;

  double clinical_age() const noexcept { return onset + sojourn; }
};

// Bernoulli probability of the onset grid's step i. `interval_mass` uses the intensity
// integral over the step. `conditional_hazard` divides it by the probability of no onset
// since age 0, which makes the first-success distribution equal w exactly.
enum class OnsetStepProbability { interval_mass, conditional_hazard };

struct CohortConfig {
  int t0 = 40;
  std::size_t size = 10000;
  int lookback_years = 24;    // onset grid starts at t0 - lookback
  int steps_per_year = 100;
  double program_years = 10.0;
  OnsetStepProbability step_probability = OnsetStepProbability::interval_mass;

  // Lookback set to the ceiling of the sojourn 99.99% quantile.
  static CohortConfig make(int t0, std::size_t size, const SojournDistribution& sojourn,
                           double program_years, int steps_per_year = 100);
  void validate() const;
};

// How the first onset step on a grid of independent Bernoulli(p_i) trials is drawn.
// `bernoulli_chain` flips every coin in turn; `inverse_cdf` draws the same first-success
// index from its exact distribution with a single uniform.
enum class OnsetSampler { inverse_cdf, bernoulli_chain };

// Per-step onset probabilities on [start, start + steps / steps_per_year).
class OnsetGrid {
 public:
  OnsetGrid(const PreclinicalIntensity& w, double start, std::size_t steps, int steps_per_year,
            OnsetStepProbability rule = OnsetStepProbability::interval_mass);

  std::size_t steps() const noexcept { return prob_.size(); }
  double step_width() const noexcept { return width_; }
  double left_edge(std::size_t i) const noexcept { return start_ + width_ * static_cast<double>(i); }
  double step_probability(std::size_t i) const { return prob_.at(i); }
  // P(at least one success on the grid).
  double any_onset_probability() const noexcept { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

  // Index of the first successful step, or steps() when there is none.
  std::size_t draw_first_success(RandomStream& rng, OnsetSampler sampler) const;

 private:
  double start_;
  double width_;
  std::vector<double> prob_;
  std::vector<double> cumulative_;  // P(first success <= i)
};

struct InitialStates {
  std::size_t healthy = 0;
  std::vector<CaseRecord> preclinical;
  std::size_t discarded = 0;  // pre-entry clinical draws that were replaced
};

// Classifies exactly cfg.size individuals at entry age t0. Draws whose case surfaced
// clinically before t0 are discarded and replaced.
InitialStates simulate_initial_states(const CohortConfig& cfg, const PreclinicalIntensity& w,
                                      const SojournDistribution& sojourn, RandomStream& rng,
                                      OnsetSampler sampler = OnsetSampler::inverse_cdf);

// Onsets among the healthy during [t0, t0 + program_years); no discard rule.
std::vector<CaseRecord> simulate_onset_during_program(const CohortConfig& cfg, std::size_t healthy,
                                                      const PreclinicalIntensity& w,
                                                      const SojournDistribution& sojourn, RandomStream& rng,
                                                      OnsetSampler sampler = OnsetSampler::inverse_cdf);

struct CohortHistory {
  int t0 = 0;
  std::size_t size = 0;
  std::size_t healthy_at_entry = 0;
  std::size_t discarded = 0;
  std::vector<CaseRecord> cases;  // entry cases first, then program onsets
};

CohortHistory simulate_cohort(const CohortConfig& cfg, const PreclinicalIntensity& w,
                              const SojournDistribution& sojourn, RandomStream& rng,
                              OnsetSampler sampler = OnsetSampler::inverse_cdf);

}  // namespace screenlab
