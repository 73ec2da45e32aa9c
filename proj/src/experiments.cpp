#include "screenlab/experiments.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "screenlab/csv.hpp"
#include "screenlab/errors.hpp"
#include "screenlab/parallel.hpp"

namespace screenlab {
namespace {

// Substream tags.
constexpr std::uint64_t kHistoryTag = 0x68697374;  // "hist"
constexpr std::uint64_t kScreenTag = 0x7363726e;   // "scrn"
constexpr std::uint64_t kFitTag = 0x66697400;      // "fit"

std::string fmt_opt(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? csv::format(*v) : std::string();
}

// Value and standard error of a named parameter; held parameters have no SE.
struct Named {
  std::optional<double> value;
  std::optional<double> se;
};

Named lookup(const EstimationResult& fit, const std::string& name) {
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    if (fit.names[i] == name && i < fit.estimates.size()) {
      Named n{fit.estimates[i], std::nullopt};
      if (fit.standard_errors) n.se = (*fit.standard_errors)[i];
      return n;
    }
  }
  const ParameterSpace space(fit.spec);
  const auto all = space.natural(fit.theta);
  for (std::size_t i = 0; i < space.slots().size(); ++i) {
    if (space.slots()[i].name == name) return {all[i], std::nullopt};
  }
  return {};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  writer(out);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

const std::vector<std::string> kSojournNames{"lambda", "alpha", "beta", "kappa", "rho"};

void write_param_columns(std::ostream& out, const EstimationResult& fit) {
  for (const char* name : {"b0", "b1", "mu", "s"}) {
    const Named n = lookup(fit, name);
    out << ',' << fmt_opt(n.value) << ',' << fmt_opt(n.se);
  }
}

}  // namespace

Scale parse_scale(std::string_view name) {
  if (name == "desk") return Scale::desk;
  if (name == "paper") return Scale::paper;
  throw ConfigError("unknown scale '" + std::string(name) + "' (expected desk or paper)");
}

std::string_view to_string(Scale scale) { return scale == Scale::desk ? "desk" : "paper"; }

ModelParams study_truth(SojournFamily family) {
  ModelParams p;
  p.sensitivity = SensitivityModel{1.4, 0.05, 52.0};
  p.intensity = PreclinicalIntensity::log_normal(3.971, 0.268, 0.15);
  switch (family) {
    case SojournFamily::exponential:
      p.sojourn = SojournDistribution::exponential(1.0 / 2.5);
      break;
    case SojournFamily::gamma:
      p.sojourn = SojournDistribution::gamma(6.25, 2.5);
      break;
    case SojournFamily::log_logistic:
      p.sojourn = SojournDistribution::log_logistic(2.2, 4.7);
      break;
  }
  return p;
}

ScreeningDesign program_a(std::size_t cohort_size) {
  ScreeningDesign d;
  d.screens = 5;
  d.interval = 2.0;
  d.cohort_size = cohort_size;
  return d;
}

ScreeningDesign program_b(std::size_t cohort_size) {
  ScreeningDesign d;
  d.screens = 10;
  d.interval = 1.0;
  d.cohort_size = cohort_size;
  return d;
}

ProgressionData simulate_progression(const PreclinicalIntensity& w, const SojournDistribution& sojourn,
                                     const ProgressionConfig& cfg, std::uint64_t seed) {
  if (cfg.t_min > cfg.t_max) throw ConfigError("progression: t_min exceeds t_max");
  ProgressionData data;
  data.seed = seed;
  const int cohorts = cfg.t_max - cfg.t_min + 1;
  data.cohorts.resize(static_cast<std::size_t>(cohorts));
  parallel_for(cohorts, worker_count(cfg.threads, cohorts), [&](int i) {
    const int t0 = cfg.t_min + i;
    RandomStream rng = make_stream(seed, {kHistoryTag, static_cast<std::uint64_t>(t0)});
    CohortConfig cc = CohortConfig::make(t0, cfg.cohort_size, sojourn, cfg.program_years, cfg.steps_per_year);
    cc.step_probability = cfg.step_probability;
    data.cohorts[static_cast<std::size_t>(i)] = simulate_cohort(cc, w, sojourn, rng, cfg.sampler);
  });
  return data;
}

CountsTable screen_population(const ProgressionData& data, const ScreeningDesign& design,
                              const SensitivityModel& sensitivity, Denominator denominator, int threads) {
  design.validate();
  const int cohorts = static_cast<int>(data.cohorts.size());
  std::vector<std::vector<CountsCell>> cells(data.cohorts.size());
  parallel_for(cohorts, worker_count(threads, cohorts), [&](int i) {
    const CohortHistory& h = data.cohorts[static_cast<std::size_t>(i)];
    RandomStream rng = make_stream(data.seed, {kScreenTag, static_cast<std::uint64_t>(h.t0),
                                               static_cast<std::uint64_t>(design.screens),
                                               std::bit_cast<std::uint64_t>(design.interval)});
    const auto outcomes = run_screening(h.cases, design, sensitivity, rng);
    cells[static_cast<std::size_t>(i)] = tabulate(h.t0, h.size, outcomes, design, denominator);
  });
  CountsTable table;
  for (const auto& c : cells) table.append(c);
  table.validate();
  return table;
}

double mean_entry_sojourn(const ProgressionData& data) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& h : data.cohorts) {
    for (const auto& c : h.cases) {
      if (c.phase != CasePhase::preclinical_at_entry) continue;
      sum += c.sojourn;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

void write_case_dump(std::ostream& out, const ProgressionData& data) {
  out << "t0,tp,J,phase\n";
  for (const auto& h : data.cohorts) {
    for (const auto& c : h.cases) {
      out << h.t0 << ',' << csv::format(c.onset) << ',' << csv::format(c.sojourn) << ','
          << (c.phase == CasePhase::preclinical_at_entry ? "entry" : "program") << '\n';
    }
  }
}

ExperimentConfig ExperimentConfig::for_scale(Scale scale, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.scale = scale;
  cfg.cohort_size = scale == Scale::desk ? 2000 : 10000;
  cfg.fit.seed = seed;
  return cfg;
}

ScenarioReport run_scenarios(SojournFamily generator, const ExperimentConfig& cfg) {
  ScenarioReport report;
  report.generator = generator;
  report.truth = study_truth(generator);

  ProgressionConfig pc;
  pc.cohort_size = cfg.cohort_size;
  pc.program_years = 10.0;
  pc.threads = cfg.threads;
  const ProgressionData data = simulate_progression(report.truth.intensity, report.truth.sojourn, pc, cfg.seed);
  report.entry_mean_sojourn = mean_entry_sojourn(data);

  const ScreeningDesign a = program_a(cfg.cohort_size);
  const ScreeningDesign b = program_b(cfg.cohort_size);
  report.counts_a = screen_population(data, a, report.truth.sensitivity, Denominator::at_risk, cfg.threads);
  report.counts_b = screen_population(data, b, report.truth.sensitivity, Denominator::at_risk, cfg.threads);

  for (int id = 1; id <= 4; ++id) {
    const bool uses_a = id == 1 || id == 3;
    const bool fix_b1 = id >= 3;
    FitSpec spec;
    spec.family = generator;
    spec.fix_b1 = fix_b1;
    spec.base = report.truth;
    EstimateOptions eo = cfg.fit;
    eo.threads = cfg.threads;
    eo.seed = derive_seed(cfg.seed, {kFitTag, static_cast<std::uint64_t>(id)});
    ScenarioRow row;
    row.id = id;
    row.screens = uses_a ? a.screens : b.screens;
    row.interval = uses_a ? a.interval : b.interval;
    row.fix_b1 = fix_b1;
    row.fit = estimate(uses_a ? report.counts_a : report.counts_b, uses_a ? a : b, spec, eo);
    report.rows.push_back(std::move(row));
  }
  return report;
}

MisspecReport run_misspecification(const ExperimentConfig& cfg) {
  MisspecReport report;
  const SojournFamily families[] = {SojournFamily::exponential, SojournFamily::gamma, SojournFamily::log_logistic};
  const ScreeningDesign b = program_b(cfg.cohort_size);
  for (SojournFamily generator : families) {
    const ModelParams truth = study_truth(generator);
    ProgressionConfig pc;
    pc.cohort_size = cfg.cohort_size;
    pc.program_years = b.program_years();
    pc.threads = cfg.threads;
    const ProgressionData data = simulate_progression(truth.intensity, truth.sojourn, pc, cfg.seed);
    report.counts.push_back(screen_population(data, b, truth.sensitivity, Denominator::at_risk, cfg.threads));
    for (SojournFamily fitted : families) {
      FitSpec spec;
      spec.family = fitted;
      spec.base = truth;
      EstimateOptions eo = cfg.fit;
      eo.threads = cfg.threads;
      eo.seed = derive_seed(cfg.seed, {kFitTag, static_cast<std::uint64_t>(generator) * 3 +
                                                     static_cast<std::uint64_t>(fitted) + 16});
      report.cells.push_back({generator, fitted, estimate(report.counts.back(), b, spec, eo)});
    }
  }
  return report;
}

ReplicationConfig ReplicationConfig::for_scale(Scale scale, std::uint64_t seed) {
  ReplicationConfig cfg;
  cfg.participants = scale == Scale::desk ? 20000 : 200000;
  cfg.seed = seed;
  return cfg;
}

namespace {

ScreeningDesign replication_design(const ReplicationConfig& cfg) {
  ScreeningDesign d;
  d.t_min = d.t_max = cfg.t0;
  d.screens = cfg.screens;
  d.interval = cfg.interval;
  d.cohort_size = cfg.participants;
  return d;
}

SensitivityModel held_sensitivity(double p) {
  // A probability of one is represented by a log-odds far beyond double resolution.
  return p >= 1.0 ? SensitivityModel{40.0, 0.0, 52.0} : SensitivityModel::constant(p);
}

}  // namespace

ReplicationResult refit_replication(const CountsTable& counts, const ReplicationConfig& cfg) {
  FitSpec spec;
  spec.family = cfg.fit_family;
  spec.fix_sensitivity = true;
  spec.fix_intensity = true;
  spec.base.sensitivity = held_sensitivity(cfg.fit_sensitivity);
  spec.base.intensity = PreclinicalIntensity::constant(cfg.intensity_rate);
  EstimateOptions eo;
  eo.restarts = cfg.restarts;
  eo.seed = derive_seed(cfg.seed, {kFitTag, 5});
  ReplicationResult out;
  out.counts = counts;
  out.fit = estimate(counts, replication_design(cfg), spec, eo);
  out.mean_sojourn = out.fit.mean_sojourn.value_or(std::numeric_limits<double>::quiet_NaN());
  return out;
}

ReplicationResult replicate_interval_cancer_study(const ReplicationConfig& cfg) {
  const ScreeningDesign design = replication_design(cfg);
  design.validate();
  ProgressionConfig pc;
  pc.t_min = pc.t_max = cfg.t0;
  pc.cohort_size = cfg.participants;
  pc.program_years = design.program_years();
  const PreclinicalIntensity w = PreclinicalIntensity::constant(cfg.intensity_rate);
  const ProgressionData data = simulate_progression(w, cfg.generator, pc, cfg.seed);
  const CountsTable counts = screen_population(data, design, held_sensitivity(cfg.sensitivity));
  return refit_replication(counts, cfg);
}

void write_scenario_report(std::ostream& out, const ScenarioReport& report) {
  out << "scenario,family,screens,interval,fix_b1,b0,b0_sd,b1,b1_sd,mu,mu_sd,s,s_sd";
  for (const auto& n : kSojournNames) out << ',' << n << ',' << n << "_sd";
  out << ",mst,mst_sd,negloglik,converged,positive_definite,near_zero_eigenvalues,tbar\n";

  const auto sojourn_columns = [&](const auto& lookup_fn) {
    for (const auto& n : kSojournNames) {
      const Named v = lookup_fn(n);
      out << ',' << fmt_opt(v.value) << ',' << fmt_opt(v.se);
    }
  };

  // Actual row from the truth.
  const ModelParams& t = report.truth;
  out << "Actual," << to_string(report.generator) << ",,,," << csv::format(t.sensitivity.b0) << ",,"
      << csv::format(t.sensitivity.b1) << ",," << csv::format(t.intensity.mu()) << ",," << csv::format(t.intensity.s())
      << ',';
  FitSpec truth_spec;
  truth_spec.family = report.generator;
  truth_spec.base = t;
  const ParameterSpace truth_space(truth_spec);
  const auto truth_values = truth_space.natural(t);
  sojourn_columns([&](const std::string& n) {
    for (std::size_t i = 0; i < truth_space.slots().size(); ++i) {
      if (truth_space.slots()[i].name == n) return Named{truth_values[i], std::nullopt};
    }
    return Named{};
  });
  out << ',' << csv::format(t.sojourn.mean()) << ",,,,,," << csv::format(t.sensitivity.tbar) << '\n';

  for (const auto& row : report.rows) {
    const auto& f = row.fit;
    out << 'S' << row.id << ',' << to_string(f.spec.family) << ',' << row.screens << ',' << csv::format(row.interval)
        << ',' << (row.fix_b1 ? 1 : 0);
    write_param_columns(out, f);
    sojourn_columns([&](const std::string& n) { return lookup(f, n); });
    out << ',' << fmt_opt(f.mean_sojourn) << ',' << fmt_opt(f.mean_sojourn_se) << ',' << csv::format(f.neg_log_lik)
        << ',' << (f.converged ? 1 : 0) << ',' << (f.positive_definite ? 1 : 0) << ',' << f.near_zero_eigenvalues
        << ',' << csv::format(f.theta.sensitivity.tbar) << '\n';
  }
}

void write_misspec_report(std::ostream& out, const MisspecReport& report) {
  out << "generator,fitted,loglik,b0,b0_sd,b1,b1_sd,mu,mu_sd,s,s_sd,mst,mst_sd,converged,positive_definite,"
         "near_zero_eigenvalues\n";
  for (const auto& cell : report.cells) {
    const auto& f = cell.fit;
    out << to_string(cell.generator) << ',' << to_string(cell.fitted) << ',' << csv::format(-f.neg_log_lik);
    write_param_columns(out, f);
    out << ',' << fmt_opt(f.mean_sojourn) << ',' << fmt_opt(f.mean_sojourn_se) << ',' << (f.converged ? 1 : 0) << ','
        << (f.positive_definite ? 1 : 0) << ',' << f.near_zero_eigenvalues << '\n';
  }
}

void save_scenario_outputs(const ScenarioReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  report.counts_a.save((dir / "counts_program_a.csv").string());
  report.counts_b.save((dir / "counts_program_b.csv").string());
  for (const auto& row : report.rows) {
    write_json(dir / ("fit_s" + std::to_string(row.id) + ".json"), to_json(row.fit));
  }
  write_file(dir / "report.csv", [&](std::ostream& out) { write_scenario_report(out, report); });
}

void save_misspec_outputs(const MisspecReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const SojournFamily families[] = {SojournFamily::exponential, SojournFamily::gamma, SojournFamily::log_logistic};
  for (std::size_t g = 0; g < report.counts.size(); ++g) {
    report.counts[g].save((dir / ("counts_" + std::string(to_string(families[g])) + ".csv")).string());
  }
  for (const auto& cell : report.cells) {
    write_json(dir / ("fit_" + std::string(to_string(cell.generator)) + "_as_" + std::string(to_string(cell.fitted)) +
                      ".json"),
               to_json(cell.fit));
  }
  write_file(dir / "report.csv", [&](std::ostream& out) { write_misspec_report(out, report); });
}

void save_replication_outputs(const ReplicationResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  result.counts.save((dir / "counts.csv").string());
  write_json(dir / "fit.json", to_json(result.fit));
  write_file(dir / "report.csv", [&](std::ostream& out) {
    out << "fitted,mst,mst_sd,negloglik,converged\n";
    out << to_string(result.fit.spec.family) << ',' << csv::format(result.mean_sojourn) << ','
        << fmt_opt(result.fit.mean_sojourn_se) << ',' << csv::format(result.fit.neg_log_lik) << ','
        << (result.fit.converged ? 1 : 0) << '\n';
  });
}

}  // namespace screenlab
