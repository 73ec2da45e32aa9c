// screenlab: simulation, estimation and preset experiments for periodic screening programs.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "screenlab/csv.hpp"
#include "screenlab/errors.hpp"
#include "screenlab/experiments.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace screenlab;

namespace {

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kConfigError = 2,
  kIoError = 3,
  kNotConverged = 4,
};

constexpr std::uint64_t kDefaultSeed = 20240101;

json defaults() {
  return {
      {"seed", nullptr},
      {"threads", 0},
      {"out", "results"},
      {"scale", "desk"},
      {"generator", "exponential"},
      {"design", {{"t_min", 40}, {"t_max", 64}, {"screens", 10}, {"interval", 1.0}, {"cohort_size", 2000},
                  {"attendance", 1.0}}},
      {"denominator", "at_risk"},
      {"case_dump", false},
      {"fit", {{"family", "exponential"}, {"fix_b1", false}, {"restarts", 20}, {"max_iterations", 500}}},
      {"counts", nullptr},
      {"theta", nullptr},
      {"ridge", {{"alpha0", 1.0}, {"beta0", 0.4}, {"alpha_step", 1.0}, {"beta_step", 0.4}, {"count", 100},
                 {"mode", "held"}}},
      {"replication", {{"participants", nullptr}, {"t0", 55}, {"intensity_rate", 0.002},
                       {"generator", {{"family", "gamma"}, {"alpha", 6.25}, {"beta", 2.55}}},
                       {"sensitivity", 0.58}, {"screens", 5}, {"interval", 2.0}, {"fit_family", "exponential"},
                       {"fit_sensitivity", 0.58}, {"restarts", 5}}},
  };
}

// Collects every problem before reporting, so one run shows all of them.
class Validator {
 public:
  explicit Validator(const json& cfg) : cfg_(cfg) {}

  template <class T>
  std::optional<T> get(const json::json_pointer& ptr) {
    try {
      return cfg_.at(ptr).get<T>();
    } catch (const std::exception& e) {
      errors_.push_back(ptr.to_string() + ": " + e.what());
      return std::nullopt;
    }
  }

  template <class T>
  T get_or(const json::json_pointer& ptr, T fallback) {
    return get<T>(ptr).value_or(fallback);
  }

  void require(bool ok, const std::string& message) {
    if (!ok) errors_.push_back(message);
  }

  template <class F>
  void attempt(const std::string& what, F&& f) {
    try {
      f();
    } catch (const std::exception& e) {
      errors_.push_back(what + ": " + e.what());
    }
  }

  void finish() const {
    if (errors_.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& e : errors_) msg += "\n  - " + e;
    throw ConfigError(msg);
  }

 private:
  const json& cfg_;
  std::vector<std::string> errors_;
};

json::json_pointer ptr(const std::string& s) { return json::json_pointer(s); }

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

std::uint64_t parse_seed_text(const std::string& text, const std::string& source) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(source + ": '" + text + "' is not an unsigned integer seed");
  }
}

// Flag values land here; only flags the user actually passed are merged.
struct Flags {
  std::string config;
  std::string out, scale, generator, family, denominator, counts, theta, ridge_mode;
  std::string seed;
  int threads = 0, restarts = 0, screens = 0, t_min = 0, t_max = 0, count = 0, first_index = 0;
  std::size_t cohort_size = 0, participants = 0;
  double interval = 0, risk = 0, alpha0 = 0, beta0 = 0, alpha_step = 0, beta_step = 0, fit_sensitivity = 0;
  bool fix_b1 = false, case_dump = false;
};

struct Options {
  CLI::Option* out = nullptr;
  CLI::Option* scale = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* threads = nullptr;
  CLI::Option* generator = nullptr;
  CLI::Option* family = nullptr;
  CLI::Option* fix_b1 = nullptr;
  CLI::Option* restarts = nullptr;
  CLI::Option* cohort_size = nullptr;
  CLI::Option* screens = nullptr;
  CLI::Option* interval = nullptr;
  CLI::Option* t_min = nullptr;
  CLI::Option* t_max = nullptr;
  CLI::Option* risk = nullptr;
  CLI::Option* denominator = nullptr;
  CLI::Option* case_dump = nullptr;
  CLI::Option* counts = nullptr;
  CLI::Option* theta = nullptr;
  CLI::Option* ridge_mode = nullptr;
  CLI::Option* alpha0 = nullptr;
  CLI::Option* beta0 = nullptr;
  CLI::Option* alpha_step = nullptr;
  CLI::Option* beta_step = nullptr;
  CLI::Option* count = nullptr;
  CLI::Option* first_index = nullptr;
  CLI::Option* participants = nullptr;
  CLI::Option* fit_sensitivity = nullptr;
};

bool given(const CLI::Option* o) { return o != nullptr && o->count() > 0; }

json merged_config(const Flags& f, const Options& o) {
  json cfg = defaults();
  if (!f.config.empty()) cfg.merge_patch(load_config_file(f.config));
  if (given(o.out)) cfg["out"] = f.out;
  if (given(o.scale)) cfg["scale"] = f.scale;
  if (given(o.seed)) cfg["seed"] = parse_seed_text(f.seed, "--seed");
  if (given(o.threads)) cfg["threads"] = f.threads;
  if (given(o.generator)) cfg["generator"] = f.generator;
  if (given(o.family)) cfg["fit"]["family"] = f.family;
  if (given(o.fix_b1)) cfg["fit"]["fix_b1"] = f.fix_b1;
  if (given(o.restarts)) cfg["fit"]["restarts"] = f.restarts;
  if (given(o.cohort_size)) cfg["design"]["cohort_size"] = f.cohort_size;
  if (given(o.screens)) cfg["design"]["screens"] = f.screens;
  if (given(o.interval)) cfg["design"]["interval"] = f.interval;
  if (given(o.t_min)) cfg["design"]["t_min"] = f.t_min;
  if (given(o.t_max)) cfg["design"]["t_max"] = f.t_max;
  if (given(o.risk)) cfg["risk"] = f.risk;
  if (given(o.denominator)) cfg["denominator"] = f.denominator;
  if (given(o.case_dump)) cfg["case_dump"] = f.case_dump;
  if (given(o.counts)) cfg["counts"] = f.counts;
  if (given(o.theta)) cfg["theta"] = f.theta;
  if (given(o.ridge_mode)) cfg["ridge"]["mode"] = f.ridge_mode;
  if (given(o.alpha0)) cfg["ridge"]["alpha0"] = f.alpha0;
  if (given(o.beta0)) cfg["ridge"]["beta0"] = f.beta0;
  if (given(o.alpha_step)) cfg["ridge"]["alpha_step"] = f.alpha_step;
  if (given(o.beta_step)) cfg["ridge"]["beta_step"] = f.beta_step;
  if (given(o.count)) cfg["ridge"]["count"] = f.count;
  if (given(o.first_index)) cfg["ridge"]["first_index"] = f.first_index;
  if (given(o.participants)) cfg["replication"]["participants"] = f.participants;
  if (given(o.fit_sensitivity)) cfg["replication"]["fit_sensitivity"] = f.fit_sensitivity;

  if (cfg["seed"].is_null()) {
    if (const char* env = std::getenv("SCREENLAB_SEED"); env != nullptr && *env != '\0') {
      cfg["seed"] = parse_seed_text(env, "SCREENLAB_SEED");
    } else {
      cfg["seed"] = kDefaultSeed;
    }
  }
  return cfg;
}

struct Common {
  std::uint64_t seed = kDefaultSeed;
  int threads = 0;
  fs::path out;
  Scale scale = Scale::desk;
};

Common read_common(Validator& v) {
  Common c;
  c.seed = v.get_or<std::uint64_t>(ptr("/seed"), kDefaultSeed);
  c.threads = v.get_or<int>(ptr("/threads"), 0);
  v.require(c.threads >= 0, "/threads: must be non-negative");
  c.out = v.get_or<std::string>(ptr("/out"), "results");
  v.attempt("/scale", [&] { c.scale = parse_scale(v.get_or<std::string>(ptr("/scale"), "desk")); });
  return c;
}

SojournFamily read_family(Validator& v, const std::string& where) {
  SojournFamily f = SojournFamily::exponential;
  v.attempt(where, [&] { f = parse_family(v.get_or<std::string>(ptr(where), "exponential")); });
  return f;
}

ScreeningDesign read_design(Validator& v, const json& cfg) {
  ScreeningDesign d;
  d.t_min = v.get_or<int>(ptr("/design/t_min"), d.t_min);
  d.t_max = v.get_or<int>(ptr("/design/t_max"), d.t_max);
  d.screens = v.get_or<int>(ptr("/design/screens"), d.screens);
  d.interval = v.get_or<double>(ptr("/design/interval"), d.interval);
  d.cohort_size = v.get_or<std::size_t>(ptr("/design/cohort_size"), d.cohort_size);
  d.attendance = v.get_or<double>(ptr("/design/attendance"), d.attendance);
  (void)cfg;
  v.attempt("/design", [&] { d.validate(); });
  return d;
}

Denominator read_denominator(Validator& v) {
  const std::string s = v.get_or<std::string>(ptr("/denominator"), "at_risk");
  if (s == "full_cohort") return Denominator::full_cohort;
  v.require(s == "at_risk", "/denominator: expected at_risk or full_cohort, got '" + s + "'");
  return Denominator::at_risk;
}

// Generating parameters: the study truth for the generator family, with optional
// "sensitivity", "intensity", "sojourn" objects and a "risk" override.
ModelParams read_truth(Validator& v, const json& cfg) {
  ModelParams p = study_truth(read_family(v, "/generator"));
  if (cfg.contains("sensitivity")) v.attempt("/sensitivity", [&] { p.sensitivity = cfg.at("sensitivity").get<SensitivityModel>(); });
  if (cfg.contains("intensity")) v.attempt("/intensity", [&] { p.intensity = cfg.at("intensity").get<PreclinicalIntensity>(); });
  if (cfg.contains("sojourn")) v.attempt("/sojourn", [&] { p.sojourn = cfg.at("sojourn").get<SojournDistribution>(); });
  if (cfg.contains("risk")) {
    v.attempt("/risk", [&] {
      const double risk = cfg.at("risk").get<double>();
      p.intensity = PreclinicalIntensity::log_normal(p.intensity.mu(), p.intensity.s(), risk);
    });
  }
  return p;
}

EstimateOptions read_fit_options(Validator& v, const Common& c) {
  EstimateOptions eo;
  eo.seed = c.seed;
  eo.threads = c.threads;
  eo.restarts = v.get_or<int>(ptr("/fit/restarts"), eo.restarts);
  eo.max_iterations = v.get_or<int>(ptr("/fit/max_iterations"), eo.max_iterations);
  v.require(eo.restarts >= 1, "/fit/restarts: must be at least 1");
  v.require(eo.max_iterations >= 1, "/fit/max_iterations: must be at least 1");
  return eo;
}

fs::path prepare_output(const Common& c, const std::string& command, const json& cfg) {
  const fs::path dir = c.out / (command + "-seed-" + std::to_string(c.seed));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::ofstream echo(dir / "config.json");
  if (!echo) throw IoError("cannot write '" + (dir / "config.json").string() + "'");
  echo << cfg.dump(2) << '\n';
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// t_min, t_max and the screen count come from the table; the interval from the config.
ScreeningDesign design_from_counts(const CountsTable& counts, double interval) {
  if (counts.empty()) throw ConfigError("counts table has no rows");
  ScreeningDesign d;
  d.t_min = counts.cells().front().t0;
  d.t_max = d.t_min;
  d.screens = 1;
  for (const auto& c : counts.cells()) {
    d.t_min = std::min(d.t_min, c.t0);
    d.t_max = std::max(d.t_max, c.t0);
    d.screens = std::max(d.screens, c.k);
  }
  d.interval = interval;
  d.cohort_size = 1;
  d.validate();
  return d;
}

CountsTable read_counts(Validator& v) {
  const auto path = v.get<std::string>(ptr("/counts"));
  v.finish();
  return CountsTable::load(*path);
}

int cmd_simulate(const json& cfg) {
  Validator v(cfg);
  const Common c = read_common(v);
  const ScreeningDesign design = read_design(v, cfg);
  const ModelParams truth = read_truth(v, cfg);
  const Denominator den = read_denominator(v);
  const bool dump = v.get_or<bool>(ptr("/case_dump"), false);
  v.finish();

  const fs::path dir = prepare_output(c, "simulate", cfg);
  ProgressionConfig pc;
  pc.t_min = design.t_min;
  pc.t_max = design.t_max;
  pc.cohort_size = design.cohort_size;
  pc.program_years = design.program_years();
  pc.threads = c.threads;
  const ProgressionData data = simulate_progression(truth.intensity, truth.sojourn, pc, c.seed);
  const CountsTable counts = screen_population(data, design, truth.sensitivity, den, c.threads);
  counts.save((dir / "counts.csv").string());
  if (dump) {
    std::ostringstream os;
    write_case_dump(os, data);
    write_text(dir / "cases.csv", os.str());
  }
  std::size_t cases = 0;
  for (const auto& h : data.cohorts) cases += h.cases.size();
  std::cout << "cohorts=" << data.cohorts.size() << " cases=" << cases
            << " screen_detected=" << counts.total_screen_detected() << " interval_cases=" << counts.total_interval()
            << " out=" << dir.string() << '\n';
  return kOk;
}

int cmd_estimate(const json& cfg) {
  Validator v(cfg);
  const Common c = read_common(v);
  const ModelParams truth = read_truth(v, cfg);
  FitSpec spec;
  spec.family = read_family(v, "/fit/family");
  spec.fix_b1 = v.get_or<bool>(ptr("/fit/fix_b1"), false);
  spec.base = truth;
  const EstimateOptions eo = read_fit_options(v, c);
  const double interval = v.get_or<double>(ptr("/design/interval"), 1.0);
  const CountsTable counts = read_counts(v);
  const ScreeningDesign design = design_from_counts(counts, interval);

  const fs::path dir = prepare_output(c, "estimate", cfg);
  const EstimationResult fit = estimate(counts, design, spec, eo);
  write_text(dir / "fit.json", to_json(fit).dump(2) + "\n");
  std::cout << "family=" << to_string(fit.spec.family) << " negloglik=" << csv::format(fit.neg_log_lik)
            << " mst=" << (fit.mean_sojourn ? csv::format(*fit.mean_sojourn) : "NA")
            << " converged=" << (fit.converged ? "yes" : "no") << " out=" << dir.string() << '\n';
  return fit.converged ? kOk : kNotConverged;
}

ExperimentConfig read_experiment(Validator& v, const Common& c) {
  ExperimentConfig ec = ExperimentConfig::for_scale(c.scale, c.seed);
  ec.threads = c.threads;
  ec.fit = read_fit_options(v, c);
  return ec;
}

int cmd_scenario(const json& cfg) {
  Validator v(cfg);
  const Common c = read_common(v);
  const SojournFamily generator = read_family(v, "/generator");
  const ExperimentConfig ec = read_experiment(v, c);
  v.finish();
  const fs::path dir = prepare_output(c, "scenario-" + std::string(to_string(generator)), cfg);
  const ScenarioReport report = run_scenarios(generator, ec);
  save_scenario_outputs(report, dir);
  bool all = true;
  for (const auto& row : report.rows) {
    all = all && row.fit.converged;
    std::cout << 'S' << row.id << " mst=" << (row.fit.mean_sojourn ? csv::format(*row.fit.mean_sojourn) : "NA")
              << " negloglik=" << csv::format(row.fit.neg_log_lik) << '\n';
  }
  std::cout << "out=" << dir.string() << '\n';
  return all ? kOk : kNotConverged;
}

int cmd_misspec(const json& cfg) {
  Validator v(cfg);
  const Common c = read_common(v);
  const ExperimentConfig ec = read_experiment(v, c);
  v.finish();
  const fs::path dir = prepare_output(c, "misspec", cfg);
  const MisspecReport report = run_misspecification(ec);
  save_misspec_outputs(report, dir);
  bool all = true;
  for (const auto& cell : report.cells) {
    all = all && cell.fit.converged;
    std::cout << to_string(cell.generator) << " as " << to_string(cell.fitted)
              << " mst=" << (cell.fit.mean_sojourn ? csv::format(*cell.fit.mean_sojourn) : "NA") << '\n';
  }
  std::cout << "out=" << dir.string() << '\n';
  return all ? kOk : kNotConverged;
}

int cmd_replicate(const json& cfg) {
  Validator v(cfg);
  const Common c = read_common(v);
  ReplicationConfig rc = ReplicationConfig::for_scale(c.scale, c.seed);
  if (!cfg.at(ptr("/replication/participants")).is_null()) {
    rc.participants = v.get_or<std::size_t>(ptr("/replication/participants"), rc.participants);
  }
  rc.t0 = v.get_or<int>(ptr("/replication/t0"), rc.t0);
  rc.intensity_rate = v.get_or<double>(ptr("/replication/intensity_rate"), rc.intensity_rate);
  v.attempt("/replication/generator",
            [&] { rc.generator = cfg.at(ptr("/replication/generator")).get<SojournDistribution>(); });
  rc.sensitivity = v.get_or<double>(ptr("/replication/sensitivity"), rc.sensitivity);
  rc.screens = v.get_or<int>(ptr("/replication/screens"), rc.screens);
  rc.interval = v.get_or<double>(ptr("/replication/interval"), rc.interval);
  rc.fit_family = read_family(v, "/replication/fit_family");
  rc.fit_sensitivity = v.get_or<double>(ptr("/replication/fit_sensitivity"), rc.fit_sensitivity);
  rc.restarts = v.get_or<int>(ptr("/replication/restarts"), rc.restarts);
  v.require(rc.participants >= 1, "/replication/participants: must be at least 1");
  v.require(rc.intensity_rate > 0.0, "/replication/intensity_rate: must be positive");
  v.require(rc.sensitivity > 0.0 && rc.sensitivity <= 1.0, "/replication/sensitivity: must lie in (0, 1]");
  v.require(rc.fit_sensitivity > 0.0 && rc.fit_sensitivity <= 1.0,
            "/replication/fit_sensitivity: must lie in (0, 1]");
  v.require(rc.restarts >= 1, "/replication/restarts: must be at least 1");
  v.finish();
  const fs::path dir = prepare_output(c, "replicate", cfg);
  const ReplicationResult result = replicate_interval_cancer_study(rc);
  save_replication_outputs(result, dir);
  std::cout << "fitted=" << to_string(result.fit.spec.family) << " mst=" << csv::format(result.mean_sojourn)
            << " out=" << dir.string() << '\n';
  return result.fit.converged ? kOk : kNotConverged;
}

int cmd_ridge(const json& cfg) {
  Validator v(cfg);
  const Common c = read_common(v);
  const ModelParams truth = read_truth(v, cfg);
  RidgeOptions ro;
  ro.alpha0 = v.get_or<double>(ptr("/ridge/alpha0"), ro.alpha0);
  ro.beta0 = v.get_or<double>(ptr("/ridge/beta0"), ro.beta0);
  ro.alpha_step = v.get_or<double>(ptr("/ridge/alpha_step"), ro.alpha_step);
  ro.beta_step = v.get_or<double>(ptr("/ridge/beta_step"), ro.beta_step);
  ro.count = v.get_or<int>(ptr("/ridge/count"), ro.count);
  ro.first_index = cfg.at("ridge").value("first_index", 0);
  const std::string mode = v.get_or<std::string>(ptr("/ridge/mode"), "held");
  v.require(mode == "held" || mode == "reoptimized", "/ridge/mode: expected held or reoptimized");
  ro.mode = mode == "reoptimized" ? RidgeMode::reoptimized : RidgeMode::held;
  v.require(ro.count >= 1, "/ridge/count: must be at least 1");
  v.require(ro.alpha0 > 0 && ro.beta0 > 0, "/ridge: alpha0 and beta0 must be positive");
  FitSpec spec;
  spec.family = SojournFamily::gamma;
  spec.fix_b1 = v.get_or<bool>(ptr("/fit/fix_b1"), false);
  spec.base = truth;
  const EstimateOptions eo = read_fit_options(v, c);
  const double interval = v.get_or<double>(ptr("/design/interval"), 1.0);
  std::optional<std::string> theta_path;
  if (!cfg.at("theta").is_null()) theta_path = v.get<std::string>(ptr("/theta"));
  const CountsTable counts = read_counts(v);
  const ScreeningDesign design = design_from_counts(counts, interval);

  // The held parameters come from a fit JSON when given, otherwise from a gamma fit.
  ModelParams theta;
  if (theta_path) {
    std::ifstream in(*theta_path);
    if (!in) throw IoError("cannot open fit '" + *theta_path + "'");
    try {
      const json fit = json::parse(in);
      theta.sensitivity = fit.at("theta").at("sensitivity").get<SensitivityModel>();
      theta.intensity = fit.at("theta").at("intensity").get<PreclinicalIntensity>();
      theta.sojourn = fit.at("theta").at("sojourn").get<SojournDistribution>();
    } catch (const std::exception& e) {
      throw ConfigError("fit '" + *theta_path + "' has no usable theta: " + e.what());
    }
  } else {
    theta = estimate(counts, design, spec, eo).theta;
  }
  const fs::path dir = prepare_output(c, "ridge", cfg);
  const auto points = ridge_scan(counts, design, theta, ro, spec);
  std::ostringstream os;
  write_ridge_csv(os, points);
  write_text(dir / "ridge.csv", os.str());
  std::cout << "points=" << points.size() << " out=" << dir.string() << '\n';
  return kOk;
}

int cmd_model_dump(const json& cfg) {
  Validator v(cfg);
  const Common c = read_common(v);
  const ScreeningDesign design = read_design(v, cfg);
  const ModelParams truth = read_truth(v, cfg);
  v.finish();
  const fs::path dir = prepare_output(c, "model-dump", cfg);
  std::ostringstream os;
  write_model_dump(os, truth, design);
  write_text(dir / "model_dump.csv", os.str());
  std::cout << "out=" << dir.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and likelihood estimation for periodic screening programs"};
  app.require_subcommand(1);
  Flags f;

  struct Command {
    CLI::App* app;
    Options opts;
    int (*run)(const json&);
  };
  std::vector<Command> commands;

  const auto add = [&](const std::string& name, const std::string& description, int (*run)(const json&)) {
    Command cmd{app.add_subcommand(name, description), {}, run};
    CLI::App* s = cmd.app;
    Options& o = cmd.opts;
    s->add_option("-c,--config", f.config, "JSON config file; flags override its keys");
    o.out = s->add_option("-o,--out", f.out, "Output root; results go to <out>/<command>-seed-<seed>");
    o.seed = s->add_option("--seed", f.seed, "Master seed (falls back to SCREENLAB_SEED)");
    o.threads = s->add_option("--threads", f.threads, "Worker cap, 0 = all cores");
    commands.push_back(cmd);
    return &commands.back();
  };
  commands.reserve(7);

  const auto design_flags = [&](Command* c) {
    c->opts.cohort_size = c->app->add_option("-N,--cohort-size", f.cohort_size, "Persons per entry age");
    c->opts.screens = c->app->add_option("-K,--screens", f.screens, "Number of screens");
    c->opts.interval = c->app->add_option("--interval", f.interval, "Years between screens");
    c->opts.t_min = c->app->add_option("--t-min", f.t_min, "Youngest entry age");
    c->opts.t_max = c->app->add_option("--t-max", f.t_max, "Oldest entry age");
  };
  const auto generator_flags = [&](Command* c) {
    c->opts.generator = c->app->add_option("-g,--generator", f.generator, "Sojourn family of the generating truth");
    c->opts.risk = c->app->add_option("--risk", f.risk, "Lifetime risk of the preclinical intensity");
  };
  const auto fit_flags = [&](Command* c, bool with_family) {
    if (with_family) c->opts.family = c->app->add_option("-f,--family", f.family, "Fitted sojourn family");
    c->opts.fix_b1 = c->app->add_flag("--fix-b1", f.fix_b1, "Hold b1 = 0 (age-constant sensitivity)");
    c->opts.restarts = c->app->add_option("--restarts", f.restarts, "Random restarts");
  };

  Command* sim = add("simulate", "Simulate histories and screening counts", cmd_simulate);
  design_flags(sim);
  generator_flags(sim);
  sim->opts.denominator = sim->app->add_option("--denominator", f.denominator, "at_risk or full_cohort");
  sim->opts.case_dump = sim->app->add_flag("--case-dump", f.case_dump, "Also write the case-level CSV");

  Command* est = add("estimate", "Fit a sojourn family to a counts CSV", cmd_estimate);
  est->opts.counts = est->app->add_option("counts", f.counts, "Counts CSV (t0,k,n,s,r)");
  est->opts.interval = est->app->add_option("--interval", f.interval, "Years between screens");
  generator_flags(est);
  fit_flags(est, true);

  Command* scen = add("scenario", "Run scenarios 1-4 for one generator", cmd_scenario);
  scen->opts.generator = scen->app->add_option("-g,--generator", f.generator, "Sojourn family");
  scen->opts.scale = scen->app->add_option("--scale", f.scale, "desk or paper");
  scen->opts.restarts = scen->app->add_option("--restarts", f.restarts, "Random restarts");

  Command* mis = add("misspec", "Fit every family to every generator", cmd_misspec);
  mis->opts.scale = mis->app->add_option("--scale", f.scale, "desk or paper");
  mis->opts.restarts = mis->app->add_option("--restarts", f.restarts, "Random restarts");

  Command* rep = add("replicate", "Single-age interval-cancer replication", cmd_replicate);
  rep->opts.scale = rep->app->add_option("--scale", f.scale, "desk or paper");
  rep->opts.participants = rep->app->add_option("--participants", f.participants, "Cohort size");
  rep->opts.fit_sensitivity = rep->app->add_option("--fit-sensitivity", f.fit_sensitivity, "Sensitivity held in the fit");

  Command* ridge = add("ridge", "Gamma likelihood along alpha_i = alpha0 + i*da, beta_i = beta0 + i*db", cmd_ridge);
  ridge->opts.counts = ridge->app->add_option("counts", f.counts, "Counts CSV (t0,k,n,s,r)");
  ridge->opts.theta = ridge->app->add_option("--theta", f.theta, "Fit JSON supplying the held parameters");
  ridge->opts.interval = ridge->app->add_option("--interval", f.interval, "Years between screens");
  ridge->opts.ridge_mode = ridge->app->add_option("--mode", f.ridge_mode, "held or reoptimized");
  ridge->opts.alpha0 = ridge->app->add_option("--alpha0", f.alpha0, "First alpha");
  ridge->opts.beta0 = ridge->app->add_option("--beta0", f.beta0, "First beta");
  ridge->opts.alpha_step = ridge->app->add_option("--alpha-step", f.alpha_step, "Alpha increment");
  ridge->opts.beta_step = ridge->app->add_option("--beta-step", f.beta_step, "Beta increment");
  ridge->opts.count = ridge->app->add_option("--count", f.count, "Number of points");
  ridge->opts.first_index = ridge->app->add_option("--first-index", f.first_index, "Index of the first point");
  generator_flags(ridge);
  fit_flags(ridge, false);

  Command* dump = add("model-dump", "Write the analytic D and I per cohort and screen", cmd_model_dump);
  design_flags(dump);
  generator_flags(dump);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    for (const auto& cmd : commands) {
      if (cmd.app->parsed()) return cmd.run(merged_config(f, cmd.opts));
    }
    return kUnexpected;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnexpected;
  }
}
