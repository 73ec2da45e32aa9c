#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "screenlab/distributions.hpp"
#include "screenlab/natural_history.hpp"
#include "screenlab/random.hpp"

namespace screenlab {

// A periodic screening program: screens k = 1..K at ages t0 + (k-1) * interval, for
// integer entry ages t0 in [t_min, t_max].
struct ScreeningDesign {
  int t_min = 40;
  int t_max = 64;
  int screens = 10;
  double interval = 1.0;
  std::size_t cohort_size = 10000;
  double attendance = 1.0;  // probability of attending each screen

  double screen_age(double t0, int index) const noexcept { return t0 + interval * index; }
  double program_years() const noexcept { return interval * screens; }
  std::size_t cohort_count() const noexcept { return static_cast<std::size_t>(t_max - t_min + 1); }
  void validate() const;
};

struct ScreeningOutcome {
  enum class Kind { screen_detected, interval_case, censored, outside_program };
  Kind kind = Kind::censored;
  int index = 0;  // screen (detected) or interval (interval case), 1-based; 0 otherwise
};

// Runs the screens over one cohort's cases. Outcome i belongs to cases[i]. Cases whose
// onset falls after the end of this program are marked outside_program.
std::vector<ScreeningOutcome> run_screening(std::span<const CaseRecord> cases, const ScreeningDesign& design,
                                            const SensitivityModel& sensitivity, RandomStream& rng);

// Whether n[k] is the at-risk count (screen-detected and interval cases leave) or the
// whole cohort at every screen.
enum class Denominator { at_risk, full_cohort };

struct CountsCell {
  int t0 = 0;
  int k = 0;
  long long n = 0;
  long long s = 0;
  long long r = 0;

  friend bool operator==(const CountsCell&, const CountsCell&) = default;
};

/// Screen-detected (s) and interval (r) counts out of n screened, per entry age and
/// screen. These are the sufficient statistics of the likelihood.
class CountsTable {
 public:
  CountsTable() = default;
  explicit CountsTable(std::vector<CountsCell> cells);

  const std::vector<CountsCell>& cells() const noexcept { return cells_; }
  bool empty() const noexcept { return cells_.empty(); }
  void append(std::span<const CountsCell> cells);
  // Throws std::invalid_argument on a cell with negative counts or s + r > n.
  void validate() const;

  long long total_screen_detected() const;
  long long total_interval() const;

  void write_csv(std::ostream& out) const;
  static CountsTable read_csv(std::istream& in);
  void save(const std::string& path) const;
  static CountsTable load(const std::string& path);

  friend bool operator==(const CountsTable&, const CountsTable&) = default;

 private:
  std::vector<CountsCell> cells_;
};

// Folds one cohort's outcomes into K cells.
std::vector<CountsCell> tabulate(int t0, std::size_t cohort_size, std::span<const ScreeningOutcome> outcomes,
                                 const ScreeningDesign& design, Denominator denominator = Denominator::at_risk);

}  // namespace screenlab
