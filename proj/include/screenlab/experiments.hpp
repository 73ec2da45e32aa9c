#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "screenlab/estimation.hpp"
#include "screenlab/model.hpp"
#include "screenlab/natural_history.hpp"
#include "screenlab/screening.hpp"

namespace screenlab {

enum class Scale { desk, paper };

Scale parse_scale(std::string_view name);
std::string_view to_string(Scale scale);

// Generating parameters of the simulation studies: b0 = 1.4, b1 = 0.05, tbar = 52,
// LN(3.971, 0.268^2) intensity with lifetime risk 0.15, and the family's sojourn truth
// (exponential MST 2.5, gamma(6.25, 2.5), log-logistic scale 2.2 / shape 4.7).
ModelParams study_truth(SojournFamily family);

// Program A: 5 screens, 2 years apart. Program B: 10 screens, 1 year apart. Entry ages 40..64.
ScreeningDesign program_a(std::size_t cohort_size);
ScreeningDesign program_b(std::size_t cohort_size);

struct ProgressionData {
  std::vector<CohortHistory> cohorts;
  std::uint64_t seed = 0;
};

struct ProgressionConfig {
  int t_min = 40;
  int t_max = 64;
  std::size_t cohort_size = 2000;
  double program_years = 10.0;
  int steps_per_year = 100;
  OnsetSampler sampler = OnsetSampler::inverse_cdf;
  OnsetStepProbability step_probability = OnsetStepProbability::interval_mass;
  int threads = 0;
};

// One cohort per entry age, each on the substream derived from (seed, t0).
ProgressionData simulate_progression(const PreclinicalIntensity& w, const SojournDistribution& sojourn,
                                     const ProgressionConfig& cfg, std::uint64_t seed);

// Screens every cohort and tabulates. Detection draws use the substream derived from
// (seed, t0, screens, interval), so two programs over the same progression data are
// screened independently and reproducibly.
CountsTable screen_population(const ProgressionData& data, const ScreeningDesign& design,
                              const SensitivityModel& sensitivity, Denominator denominator = Denominator::at_risk,
                              int threads = 0);

// Mean stored sojourn among cases already preclinical at entry.
double mean_entry_sojourn(const ProgressionData& data);

// Case-level CSV: t0,tp,J,phase.
void write_case_dump(std::ostream& out, const ProgressionData& data);

struct ExperimentConfig {
  std::uint64_t seed = 20240101;
  Scale scale = Scale::desk;
  std::size_t cohort_size = 2000;  // per entry age
  EstimateOptions fit;
  int threads = 0;

  static ExperimentConfig for_scale(Scale scale, std::uint64_t seed);
};

struct ScenarioRow {
  int id = 0;  // 1..4
  int screens = 0;
  double interval = 0.0;
  bool fix_b1 = false;
  EstimationResult fit;
};

struct ScenarioReport {
  SojournFamily generator = SojournFamily::exponential;
  ModelParams truth;
  CountsTable counts_a;  // K = 5, interval 2
  CountsTable counts_b;  // K = 10, interval 1
  double entry_mean_sojourn = 0.0;
  std::vector<ScenarioRow> rows;
};

// Scenario 1: program A, b1 free. 2: program B, b1 free. 3: program A, b1 = 0.
// 4: program B, b1 = 0. Both programs screen the same progression realization and
// the fitted family equals the generator.
ScenarioReport run_scenarios(SojournFamily generator, const ExperimentConfig& cfg);

struct MisspecCell {
  SojournFamily generator = SojournFamily::exponential;
  SojournFamily fitted = SojournFamily::exponential;
  EstimationResult fit;
};

struct MisspecReport {
  std::vector<CountsTable> counts;  // one per generator, program B
  std::vector<MisspecCell> cells;   // generator-major, 9 entries
};

MisspecReport run_misspecification(const ExperimentConfig& cfg);

struct ReplicationConfig {
  std::size_t participants = 20000;
  int t0 = 55;
  double intensity_rate = 0.002;  // per person-year
  SojournDistribution generator = SojournDistribution::gamma(6.25, 2.55);
  double sensitivity = 0.58;
  int screens = 5;
  double interval = 2.0;
  SojournFamily fit_family = SojournFamily::exponential;
  double fit_sensitivity = 0.58;  // held during the fit
  int restarts = 5;
  std::uint64_t seed = 20240101;

  static ReplicationConfig for_scale(Scale scale, std::uint64_t seed);
};

struct ReplicationResult {
  double mean_sojourn = 0.0;
  CountsTable counts;
  EstimationResult fit;
};

// Simulates a single-age cohort with a constant onset rate, then fits only the sojourn
// parameters with sensitivity and intensity held.
ReplicationResult replicate_interval_cancer_study(const ReplicationConfig& cfg);

// Fits the sojourn parameters of an existing replication counts table under another
// held sensitivity or family.
ReplicationResult refit_replication(const CountsTable& counts, const ReplicationConfig& cfg);

// Report CSVs. Scenario rows start with an "Actual" row carrying the truth.
void write_scenario_report(std::ostream& out, const ScenarioReport& report);
void write_misspec_report(std::ostream& out, const MisspecReport& report);

// Writes counts CSVs, one JSON per fit and the combined report into `dir`.
void save_scenario_outputs(const ScenarioReport& report, const std::filesystem::path& dir);
void save_misspec_outputs(const MisspecReport& report, const std::filesystem::path& dir);
void save_replication_outputs(const ReplicationResult& result, const std::filesystem::path& dir);

}  // namespace screenlab
