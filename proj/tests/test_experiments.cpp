#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "screenlab/errors.hpp"
#include "screenlab/experiments.hpp"

using namespace screenlab;

namespace {

ExperimentConfig small_config(std::uint64_t seed) {
  ExperimentConfig cfg = ExperimentConfig::for_scale(Scale::desk, seed);
  cfg.cohort_size = 400;
  cfg.fit.restarts = 2;
  cfg.fit.max_iterations = 200;
  return cfg;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Presets, TruthAndPrograms) {
  const ModelParams g = study_truth(SojournFamily::gamma);
  EXPECT_NEAR(g.sojourn.mean(), 2.5, 1e-14);
  EXPECT_NEAR(study_truth(SojournFamily::exponential).sojourn.mean(), 2.5, 1e-14);
  EXPECT_EQ(g.sensitivity, (SensitivityModel{1.4, 0.05, 52.0}));
  EXPECT_EQ(program_a(10).screens, 5);
  EXPECT_EQ(program_a(10).interval, 2.0);
  EXPECT_EQ(program_b(10).screens, 10);
  EXPECT_EQ(program_b(10).cohort_count(), 25u);
  EXPECT_EQ(parse_scale("paper"), Scale::paper);
  EXPECT_THROW(parse_scale("huge"), ConfigError);
  EXPECT_EQ(ExperimentConfig::for_scale(Scale::paper, 1).cohort_size, 10000u);
}

TEST(Progression, IndependentOfThreadCount) {
  const ModelParams truth = study_truth(SojournFamily::log_logistic);
  ProgressionConfig pc;
  pc.cohort_size = 500;
  pc.threads = 1;
  const auto one = simulate_progression(truth.intensity, truth.sojourn, pc, 77);
  pc.threads = 6;
  const auto six = simulate_progression(truth.intensity, truth.sojourn, pc, 77);
  const CountsTable a = screen_population(one, program_b(500), truth.sensitivity, Denominator::at_risk, 1);
  const CountsTable b = screen_population(six, program_b(500), truth.sensitivity, Denominator::at_risk, 5);
  EXPECT_EQ(a, b);
  std::ostringstream x;
  std::ostringstream y;
  write_case_dump(x, one);
  write_case_dump(y, six);
  EXPECT_EQ(x.str(), y.str());
  EXPECT_EQ(lines(x.str()).front(), "t0,tp,J,phase");
}

TEST(Scenarios, ProgramsShareOneProgressionRealization) {
  const ExperimentConfig cfg = small_config(2024);
  const ScenarioReport report = run_scenarios(SojournFamily::exponential, cfg);
  ASSERT_EQ(report.rows.size(), 4u);

  ProgressionConfig pc;
  pc.cohort_size = cfg.cohort_size;
  const auto data = simulate_progression(report.truth.intensity, report.truth.sojourn, pc, cfg.seed);
  EXPECT_EQ(report.counts_a, screen_population(data, program_a(cfg.cohort_size), report.truth.sensitivity));
  EXPECT_EQ(report.counts_b, screen_population(data, program_b(cfg.cohort_size), report.truth.sensitivity));
  EXPECT_DOUBLE_EQ(report.entry_mean_sojourn, mean_entry_sojourn(data));

  for (const ScenarioRow& row : report.rows) {
    const bool program_a_row = row.id == 1 || row.id == 3;
    EXPECT_EQ(row.screens, program_a_row ? 5 : 10);
    EXPECT_EQ(row.fix_b1, row.id >= 3);
    if (row.fix_b1) EXPECT_EQ(row.fit.theta.sensitivity.b1, 0.0);
  }

  std::ostringstream out;
  write_scenario_report(out, report);
  const auto rows = lines(out.str());
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[1].substr(0, 7), "Actual,");
  for (int i = 0; i < 4; ++i) EXPECT_EQ(rows[i + 2].substr(0, 2), "S" + std::to_string(i + 1));
}

TEST(Scenarios, ReportBytesAreReproducible) {
  const ExperimentConfig cfg = small_config(88);
  std::ostringstream a;
  std::ostringstream b;
  write_scenario_report(a, run_scenarios(SojournFamily::gamma, cfg));
  ExperimentConfig threaded = cfg;
  threaded.threads = 3;
  write_scenario_report(b, run_scenarios(SojournFamily::gamma, threaded));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Misspecification, NineCellsGeneratorMajor) {
  ExperimentConfig cfg = small_config(5);
  cfg.cohort_size = 300;
  cfg.fit.restarts = 1;
  cfg.fit.compute_information = false;
  const MisspecReport report = run_misspecification(cfg);
  ASSERT_EQ(report.counts.size(), 3u);
  ASSERT_EQ(report.cells.size(), 9u);
  const SojournFamily order[] = {SojournFamily::exponential, SojournFamily::gamma, SojournFamily::log_logistic};
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(report.cells[i].generator, order[i / 3]);
    EXPECT_EQ(report.cells[i].fitted, order[i % 3]);
    EXPECT_EQ(report.cells[i].fit.spec.family, order[i % 3]);
  }
  std::ostringstream out;
  write_misspec_report(out, report);
  EXPECT_EQ(lines(out.str()).size(), 10u);
}

TEST(Replication, CorrectFamilyRecoversMeanSojourn) {
  ReplicationConfig cfg = ReplicationConfig::for_scale(Scale::paper, 31);
  cfg.fit_family = SojournFamily::gamma;
  const ReplicationResult r = replicate_interval_cancer_study(cfg);
  ASSERT_TRUE(r.fit.converged);
  const double truth = cfg.generator.mean();
  const double tolerance = std::max(0.25, 3.0 * r.fit.mean_sojourn_se.value_or(0.0));
  EXPECT_NEAR(r.mean_sojourn, truth, tolerance);
  // Only the sojourn block is free.
  EXPECT_EQ(r.fit.names, (std::vector<std::string>{"alpha", "beta"}));
  EXPECT_EQ(r.counts.cells().size(), 5u);
}

TEST(Replication, PerfectHeldSensitivityShortensMeanSojourn) {
  const ReplicationConfig cfg = ReplicationConfig::for_scale(Scale::paper, 37);
  const ReplicationResult base = replicate_interval_cancer_study(cfg);
  ReplicationConfig perfect = cfg;
  perfect.fit_sensitivity = 1.0;
  const ReplicationResult refit = refit_replication(base.counts, perfect);
  ASSERT_TRUE(base.fit.converged);
  ASSERT_TRUE(refit.fit.converged);
  EXPECT_LT(refit.mean_sojourn, base.mean_sojourn);
}
