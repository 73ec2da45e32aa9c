#include "screenlab/screening.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "screenlab/csv.hpp"
#include "screenlab/errors.hpp"

namespace screenlab {

void ScreeningDesign::validate() const {
  if (screens < 1) throw ConfigError("design: at least one screen required");
  if (!(interval > 0.0) || !std::isfinite(interval)) throw ConfigError("design: interval must be positive");
  if (t_min > t_max) throw ConfigError("design: t_min exceeds t_max");
  if (t_min < 1) throw ConfigError("design: entry ages must be positive");
  if (cohort_size < 1) throw ConfigError("design: cohort size must be at least 1");
  if (!(attendance > 0.0 && attendance <= 1.0)) throw ConfigError("design: attendance must lie in (0, 1]");
}

std::vector<ScreeningOutcome> run_screening(std::span<const CaseRecord> cases, const ScreeningDesign& design,
                                            const SensitivityModel& sensitivity, RandomStream& rng) {
  using Kind = ScreeningOutcome::Kind;
  std::vector<ScreeningOutcome> outcomes;
  outcomes.reserve(cases.size());
  std::vector<double> attend_draw;
  std::vector<double> detect_draw;
  for (const CaseRecord& c : cases) {
    const double end = design.screen_age(c.t0, design.screens);
    if (c.onset >= end) {
      outcomes.push_back({Kind::outside_program, 0});
      continue;
    }
    int first_screen = 1;
    if (c.onset >= c.t0) {
      // Onset in interval i, i.e. [t0 + (i-1) delta, t0 + i delta); grid ages can sit a
      // rounding error below a screen age.
      const int i = static_cast<int>(std::floor((c.onset - c.t0) / design.interval + 1e-9)) + 1;
      if (c.clinical_age() < design.screen_age(c.t0, i)) {
        outcomes.push_back({Kind::interval_case, i});
        continue;
      }
      first_screen = i + 1;
    }
    // Every case consumes the same number of draws whatever the outcome, so runs that
    // differ only in sensitivity stay on common random numbers.
    const int remaining = design.screens - first_screen + 1;
    attend_draw.resize(static_cast<std::size_t>(std::max(remaining, 0)));
    detect_draw.resize(attend_draw.size());
    for (int j = 0; j < remaining; ++j) {
      attend_draw[static_cast<std::size_t>(j)] = design.attendance >= 1.0 ? 0.0 : uniform_open(rng);
      detect_draw[static_cast<std::size_t>(j)] = uniform_open(rng);
    }
    ScreeningOutcome out{Kind::censored, 0};
    for (int u = first_screen; u <= design.screens; ++u) {
      const double age = design.screen_age(c.t0, u - 1);
      const auto j = static_cast<std::size_t>(u - first_screen);
      const bool attends = attend_draw[j] < design.attendance;
      if (attends && detect_draw[j] < sensitivity(age)) {
        out = {Kind::screen_detected, u};
        break;
      }
      if (c.clinical_age() < age + design.interval) {
        out = {Kind::interval_case, u};
        break;
      }
    }
    outcomes.push_back(out);
  }
  return outcomes;
}

std::vector<CountsCell> tabulate(int t0, std::size_t cohort_size, std::span<const ScreeningOutcome> outcomes,
                                 const ScreeningDesign& design, Denominator denominator) {
  using Kind = ScreeningOutcome::Kind;
  const auto k_max = static_cast<std::size_t>(design.screens);
  std::vector<long long> s(k_max, 0);
  std::vector<long long> r(k_max, 0);
  for (const ScreeningOutcome& o : outcomes) {
    if (o.kind == Kind::censored || o.kind == Kind::outside_program) continue;
    if (o.index < 1 || o.index > design.screens) {
      throw std::invalid_argument("tabulate: outcome index " + std::to_string(o.index) + " outside 1.." +
                                  std::to_string(design.screens));
    }
    (o.kind == Kind::screen_detected ? s : r)[o.index - 1] += 1;
  }
  std::vector<CountsCell> cells;
  cells.reserve(k_max);
  auto n = static_cast<long long>(cohort_size);
  for (std::size_t k = 0; k < k_max; ++k) {
    if (s[k] + r[k] > n) throw std::invalid_argument("tabulate: more events than persons at risk");
    cells.push_back({t0, static_cast<int>(k + 1), n, s[k], r[k]});
    if (denominator == Denominator::at_risk) n -= s[k] + r[k];
  }
  return cells;
}

CountsTable::CountsTable(std::vector<CountsCell> cells) : cells_(std::move(cells)) { validate(); }

void CountsTable::append(std::span<const CountsCell> cells) { cells_.insert(cells_.end(), cells.begin(), cells.end()); }

void CountsTable::validate() const {
  for (const auto& c : cells_) {
    if (c.n < 0 || c.s < 0 || c.r < 0 || c.s + c.r > c.n) {
      throw std::invalid_argument("counts cell (t0=" + std::to_string(c.t0) + ", k=" + std::to_string(c.k) +
                                  ") violates 0 <= s + r <= n");
    }
    if (c.k < 1) throw std::invalid_argument("counts cell has screen index below 1");
  }
}

long long CountsTable::total_screen_detected() const {
  long long total = 0;
  for (const auto& c : cells_) total += c.s;
  return total;
}

long long CountsTable::total_interval() const {
  long long total = 0;
  for (const auto& c : cells_) total += c.r;
  return total;
}

void CountsTable::write_csv(std::ostream& out) const {
  out << "t0,k,n,s,r\n";
  for (const auto& c : cells_) out << c.t0 << ',' << c.k << ',' << c.n << ',' << c.s << ',' << c.r << '\n';
}

CountsTable CountsTable::read_csv(std::istream& in) {
  csv::expect_header(in, {"t0", "k", "n", "s", "r"});
  std::vector<CountsCell> cells;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split(line);
    if (f.size() != 5) throw ParseError("expected 5 columns, found " + std::to_string(f.size()), row, f.size());
    CountsCell c;
    c.t0 = static_cast<int>(csv::parse_integer(f[0], row, 1));
    c.k = static_cast<int>(csv::parse_integer(f[1], row, 2));
    c.n = csv::parse_integer(f[2], row, 3);
    c.s = csv::parse_integer(f[3], row, 4);
    c.r = csv::parse_integer(f[4], row, 5);
    if (c.k < 1) throw ParseError("screen index must be at least 1", row, 2);
    if (c.n < 0 || c.s < 0 || c.r < 0) throw ParseError("counts must be non-negative", row, 3);
    if (c.s + c.r > c.n) throw ParseError("s + r exceeds n", row, 4);
    cells.push_back(c);
  }
  return CountsTable(std::move(cells));
}

void CountsTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_csv(out);
  if (!out) throw IoError("failed writing '" + path + "'");
}

CountsTable CountsTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_csv(in);
}

}  // namespace screenlab
