#include "screenlab/natural_history.hpp"

#include <algorithm>
#include <cmath>

#include "screenlab/errors.hpp"

namespace screenlab {

CohortConfig CohortConfig::make(int t0, std::size_t size, const SojournDistribution& sojourn,
                                double program_years, int steps_per_year) {
  CohortConfig cfg;
  cfg.t0 = t0;
  cfg.size = size;
  cfg.lookback_years = static_cast<int>(std::ceil(sojourn.quantile(0.9999)));
  cfg.steps_per_year = steps_per_year;
  cfg.program_years = program_years;
  return cfg;
}

void CohortConfig::validate() const {
  if (size < 1) throw ConfigError("cohort size must be at least 1");
  if (steps_per_year < 1) throw ConfigError("steps per year must be at least 1");
  if (lookback_years < 1) throw ConfigError("lookback must be at least one year");
  if (t0 - lookback_years < 0) throw ConfigError("lookback reaches before age 0");
  if (!(program_years >= 0.0)) throw ConfigError("program length must be non-negative");
}

OnsetGrid::OnsetGrid(const PreclinicalIntensity& w, double start, std::size_t steps, int steps_per_year,
                     OnsetStepProbability rule)
    : start_(start), width_(1.0 / steps_per_year) {
  prob_.reserve(steps);
  cumulative_.reserve(steps);
  double none_yet = 1.0;
  double any = 0.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double left = left_edge(i);
    const double mass = w.integral(left, left_edge(i + 1));
    double p = std::min(mass, 1.0);
    if (rule == OnsetStepProbability::conditional_hazard) {
      const double onset_free = 1.0 - (left > 0.0 ? w.integral(0.0, left) : 0.0);
      p = onset_free > mass ? mass / onset_free : 1.0;
    }
    prob_.push_back(p);
    any += none_yet * p;
    none_yet *= 1.0 - p;
    cumulative_.push_back(any);
  }
}

std::size_t OnsetGrid::draw_first_success(RandomStream& rng, OnsetSampler sampler) const {
  if (sampler == OnsetSampler::bernoulli_chain) {
    for (std::size_t i = 0; i < prob_.size(); ++i) {
      if (uniform_open(rng) < prob_[i]) return i;
    }
    return prob_.size();
  }
  const double u = uniform_open(rng);
  return static_cast<std::size_t>(std::lower_bound(cumulative_.begin(), cumulative_.end(), u) -
                                  cumulative_.begin());
}

InitialStates simulate_initial_states(const CohortConfig& cfg, const PreclinicalIntensity& w,
                                      const SojournDistribution& sojourn, RandomStream& rng,
                                      OnsetSampler sampler) {
  cfg.validate();
  const double start = cfg.t0 - cfg.lookback_years;
  const OnsetGrid grid(w, start, static_cast<std::size_t>(cfg.lookback_years) * cfg.steps_per_year,
                       cfg.steps_per_year, cfg.step_probability);
  InitialStates out;
  while (out.healthy + out.preclinical.size() < cfg.size) {
    const std::size_t step = grid.draw_first_success(rng, sampler);
    if (step == grid.steps()) {
      ++out.healthy;
      continue;
    }
    CaseRecord c;
    c.t0 = cfg.t0;
    c.onset = grid.left_edge(step);
    c.sojourn = sojourn.sample(rng);
    c.phase = CasePhase::preclinical_at_entry;
    if (c.clinical_age() <= cfg.t0) {
      ++out.discarded;
      continue;
    }
    out.preclinical.push_back(c);
  }
  return out;
}

std::vector<CaseRecord> simulate_onset_during_program(const CohortConfig& cfg, std::size_t healthy,
                                                      const PreclinicalIntensity& w,
                                                      const SojournDistribution& sojourn, RandomStream& rng,
                                                      OnsetSampler sampler) {
  cfg.validate();
  const auto steps = static_cast<std::size_t>(std::llround(cfg.program_years * cfg.steps_per_year));
  std::vector<CaseRecord> cases;
  if (steps == 0) return cases;
  const OnsetGrid grid(w, cfg.t0, steps, cfg.steps_per_year, cfg.step_probability);
  for (std::size_t person = 0; person < healthy; ++person) {
    const std::size_t step = grid.draw_first_success(rng, sampler);
    if (step == grid.steps()) continue;
    CaseRecord c;
    c.t0 = cfg.t0;
    c.onset = grid.left_edge(step);
    c.sojourn = sojourn.sample(rng);
    c.phase = CasePhase::onset_during_program;
    cases.push_back(c);
  }
  return cases;
}

CohortHistory simulate_cohort(const CohortConfig& cfg, const PreclinicalIntensity& w,
                              const SojournDistribution& sojourn, RandomStream& rng, OnsetSampler sampler) {
  InitialStates initial = simulate_initial_states(cfg, w, sojourn, rng, sampler);
  CohortHistory h;
  h.t0 = cfg.t0;
  h.size = cfg.size;
  h.healthy_at_entry = initial.healthy;
  h.discarded = initial.discarded;
  h.cases = std::move(initial.preclinical);
  auto onsets = simulate_onset_during_program(cfg, initial.healthy, w, sojourn, rng, sampler);
  h.cases.insert(h.cases.end(), onsets.begin(), onsets.end());
  return h;
}

}  // namespace screenlab
