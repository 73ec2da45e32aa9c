#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "screenlab/errors.hpp"
#include "screenlab/natural_history.hpp"
#include "screenlab/screening.hpp"

using namespace screenlab;
using Kind = ScreeningOutcome::Kind;

namespace {

const SensitivityModel kAlways{40.0, 0.0, 52.0};
const SensitivityModel kNever{-40.0, 0.0, 52.0};

ScreeningDesign design(int screens, double interval, std::size_t size = 10) {
  ScreeningDesign d;
  d.t_min = 50;
  d.t_max = 50;
  d.screens = screens;
  d.interval = interval;
  d.cohort_size = size;
  return d;
}

CaseRecord entry_case(double onset, double sojourn) { return {50.0, onset, sojourn, CasePhase::preclinical_at_entry}; }
CaseRecord program_case(double onset, double sojourn) {
  return {50.0, onset, sojourn, CasePhase::onset_during_program};
}

void expect_outcome(const ScreeningOutcome& o, Kind kind, int index) {
  EXPECT_EQ(o.kind, kind);
  EXPECT_EQ(o.index, index);
}

}  // namespace

TEST(Design, Validation) {
  EXPECT_NO_THROW(design(3, 1.0).validate());
  ScreeningDesign d = design(0, 1.0);
  EXPECT_THROW(d.validate(), ConfigError);
  d = design(3, 0.0);
  EXPECT_THROW(d.validate(), ConfigError);
  d = design(3, 1.0);
  d.attendance = 0.0;
  EXPECT_THROW(d.validate(), ConfigError);
  d = design(3, 1.0);
  d.t_max = 49;
  EXPECT_THROW(d.validate(), ConfigError);
}

TEST(RunScreening, PerfectSensitivity) {
  const std::vector<CaseRecord> cases{
      entry_case(45.0, 10.0),     // detected at the first screen
      program_case(50.5, 0.3),    // surfaces before screen 2
      program_case(50.5, 1.5),    // first screen after onset is screen 2
      program_case(53.2, 1.0),    // onset after the last interval
  };
  RandomStream rng(1);
  const auto out = run_screening(cases, design(3, 1.0), kAlways, rng);
  ASSERT_EQ(out.size(), cases.size());
  expect_outcome(out[0], Kind::screen_detected, 1);
  expect_outcome(out[1], Kind::interval_case, 1);
  expect_outcome(out[2], Kind::screen_detected, 2);
  expect_outcome(out[3], Kind::outside_program, 0);
}

TEST(RunScreening, ZeroSensitivity) {
  const std::vector<CaseRecord> cases{
      entry_case(45.0, 6.5),   // clinical at 51.5, between screens 2 and 3
      entry_case(45.0, 15.0),  // clinical after the program
      program_case(50.5, 2.0), // clinical at 52.5
      program_case(51.0, 0.5), // onset exactly at screen 2
  };
  RandomStream rng(1);
  const auto out = run_screening(cases, design(3, 1.0), kNever, rng);
  expect_outcome(out[0], Kind::interval_case, 2);
  expect_outcome(out[1], Kind::censored, 0);
  expect_outcome(out[2], Kind::interval_case, 3);
  expect_outcome(out[3], Kind::interval_case, 2);
}

TEST(RunScreening, SingleLongIntervalEnumeration) {
  // One screen at 50 with a ten year interval: every entry case is caught, a program
  // onset is an interval case exactly when it surfaces before 60.
  const ScreeningDesign d = design(1, 10.0);
  std::vector<CaseRecord> cases;
  for (int i = 0; i < 10; ++i) cases.push_back(entry_case(40.0 + i, 10.5 + 0.3 * i));
  for (int i = 0; i < 10; ++i) cases.push_back(program_case(50.0 + 1.2 * i, 0.7 * i + 0.2));
  RandomStream rng(4);
  const auto out = run_screening(cases, d, kAlways, rng);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const CaseRecord& c = cases[i];
    if (c.onset >= 60.0) {
      expect_outcome(out[i], Kind::outside_program, 0);
    } else if (c.onset < 50.0) {
      expect_outcome(out[i], Kind::screen_detected, 1);
    } else if (c.clinical_age() < 60.0) {
      expect_outcome(out[i], Kind::interval_case, 1);
    } else {
      expect_outcome(out[i], Kind::censored, 0);
    }
  }
}

TEST(Tabulate, HandFixture) {
  const std::vector<ScreeningOutcome> out{{Kind::screen_detected, 2}};
  const auto cells = tabulate(50, 10, out, design(3, 1.0));
  ASSERT_EQ(cells.size(), 3u);
  EXPECT_EQ(cells[0], (CountsCell{50, 1, 10, 0, 0}));
  EXPECT_EQ(cells[1], (CountsCell{50, 2, 10, 1, 0}));
  EXPECT_EQ(cells[2], (CountsCell{50, 3, 9, 0, 0}));

  const auto full = tabulate(50, 10, out, design(3, 1.0), Denominator::full_cohort);
  for (const auto& c : full) EXPECT_EQ(c.n, 10);
  EXPECT_THROW(tabulate(50, 10, std::vector<ScreeningOutcome>{{Kind::interval_case, 4}}, design(3, 1.0)),
               std::invalid_argument);
}

TEST(Tabulate, CountsPartitionOutcomes) {
  const CohortConfig cfg = CohortConfig::make(52, 20000, SojournDistribution::exponential(0.4), 10.0);
  RandomStream rng(8);
  const CohortHistory h = simulate_cohort(cfg, PreclinicalIntensity::log_normal(3.971, 0.268, 0.15),
                                          SojournDistribution::exponential(0.4), rng);
  ScreeningDesign d = design(10, 1.0, cfg.size);
  d.attendance = 0.7;
  const auto out = run_screening(h.cases, d, SensitivityModel{1.4, 0.05, 52.0}, rng);
  const auto cells = tabulate(52, cfg.size, out, d);
  long long events = 0;
  for (const auto& o : out) events += (o.kind == Kind::screen_detected || o.kind == Kind::interval_case);
  long long counted = 0;
  long long n = static_cast<long long>(cfg.size);
  for (const auto& c : cells) {
    EXPECT_EQ(c.n, n);
    EXPECT_LE(c.s + c.r, c.n);
    n -= c.s + c.r;
    counted += c.s + c.r;
  }
  EXPECT_EQ(counted, events);
  EXPECT_GT(events, 0);
}

TEST(RunScreening, DetectionsRiseWithSensitivityOnCommonRandomNumbers) {
  const CohortConfig cfg = CohortConfig::make(48, 20000, SojournDistribution::gamma(6.25, 2.5), 10.0);
  RandomStream hist_rng(12);
  const CohortHistory h = simulate_cohort(cfg, PreclinicalIntensity::log_normal(3.971, 0.268, 0.15),
                                          SojournDistribution::gamma(6.25, 2.5), hist_rng);
  ScreeningDesign d = design(10, 1.0, cfg.size);
  d.attendance = 0.8;
  long long prev_s = -1;
  long long prev_r = 1LL << 60;
  for (double b0 = -3.0; b0 <= 4.0; b0 += 0.5) {
    RandomStream rng(77);
    const auto out = run_screening(h.cases, d, SensitivityModel{b0, 0.05, 52.0}, rng);
    const CountsTable t(tabulate(48, cfg.size, out, d));
    EXPECT_GE(t.total_screen_detected(), prev_s) << b0;
    EXPECT_LE(t.total_interval(), prev_r) << b0;
    prev_s = t.total_screen_detected();
    prev_r = t.total_interval();
  }
}

TEST(CountsTable, CsvRoundTrip) {
  const CountsTable t({{40, 1, 100, 3, 1}, {40, 2, 96, 0, 2}, {41, 1, 100, 0, 0}});
  std::stringstream ss;
  t.write_csv(ss);
  EXPECT_EQ(ss.str().substr(0, 11), "t0,k,n,s,r\n");
  EXPECT_EQ(CountsTable::read_csv(ss), t);
  EXPECT_EQ(t.total_screen_detected(), 3);
  EXPECT_EQ(t.total_interval(), 3);
}

TEST(CountsTable, ParseErrorsCarryLocation) {
  const auto error_at = [](const std::string& text, std::size_t row, std::size_t column) {
    std::istringstream in(text);
    try {
      CountsTable::read_csv(in);
      ADD_FAILURE() << "no error for: " << text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.row(), row) << text;
      EXPECT_EQ(e.column(), column) << text;
    }
  };
  error_at("t0,k,n,s,r\n40,1,10,x,0\n", 2, 4);
  error_at("t0,k,n,s,r\n40,1,10,0,0\n40,2,10,6,5\n", 3, 4);
  error_at("t0,k,n,s\n", 1, 5);
  error_at("t0,k,N,s,r\n", 1, 3);
  error_at("t0,k,n,s,r\n40,1,10,0\n", 2, 4);
  error_at("", 1, 1);
  EXPECT_THROW(CountsTable::load("/nonexistent/counts.csv"), IoError);
  EXPECT_THROW(CountsTable({{40, 1, 5, 4, 2}}), std::invalid_argument);
}
