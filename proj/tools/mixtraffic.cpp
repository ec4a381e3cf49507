// Command-line front end: dataset, eval, simulate, risk, synthesize.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixtraffic/driver/merging_model.hpp"
#include "mixtraffic/error.hpp"
#include "mixtraffic/eval/metrics.hpp"
#include "mixtraffic/game/risk_game.hpp"
#include "mixtraffic/sim/traffic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mixtraffic;

namespace {

constexpr const char* kToolVersion = "1.0.0";
constexpr int kSchemaVersion = 1;

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> sections{"schema_version", "seed", "dataset", "eval",
                                                 "simulate", "risk", "synthesize"};
  for (const auto& [k, v] : doc.items())
    if (std::find(sections.begin(), sections.end(), k) == sections.end())
      throw ConfigError("unknown top-level config key '" + k + "'");
  if (doc.contains("schema_version") && doc["schema_version"] != kSchemaVersion)
    throw ConfigError("unsupported schema_version");
  return doc;
}

std::uint64_t resolve_seed(const Common& c, const json& doc) {
  if (c.seed) return *c.seed;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
    return doc["seed"].get<std::uint64_t>();
  }
  return 0;
}

json section(const json& doc, const char* name) {
  if (!doc.contains(name)) return json::object();
  if (!doc[name].is_object()) throw ConfigError(std::string("section '") + name + "' must be an object");
  return doc[name];
}

std::string base_dir(const std::string& config_path) {
  if (config_path.empty()) return ".";
  const auto p = fs::path(config_path).parent_path();
  return p.empty() ? "." : p.string();
}

class Outputs {
 public:
  explicit Outputs(std::string dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    const auto path = (fs::path(dir_) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << content;
    if (!out) throw IoError("failed writing '" + path + "'");
    paths_.push_back(path);
  }

  const std::vector<std::string>& paths() const { return paths_; }
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::vector<std::string> paths_;
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

template <typename F>
std::string render(F&& f) {
  std::ostringstream s;
  f(s);
  return s.str();
}

void write_manifest(Outputs& out, const std::string& subcommand, const Common& c, std::uint64_t seed,
                    std::chrono::steady_clock::time_point started) {
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream ts;
  ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  json m{{"subcommand", subcommand},
         {"config", c.config_path},
         {"seed", seed},
         {"tool_version", kToolVersion},
         {"schema_version", kSchemaVersion},
         {"outputs", out.paths()},
         {"finished_at", ts.str()},
         {"duration_s", elapsed}};
  out.write("manifest.json", dump(m));
}

// dataset -------------------------------------------------------------------

struct DatasetSpec {
  std::size_t n = 2000;
  driver::MergingParams params = driver::MergingParams::defaults();
};

DatasetSpec parse_dataset(const json& sec) {
  DatasetSpec d;
  for (const auto& [k, v] : sec.items()) {
    if (k == "n") {
      if (!v.is_number_unsigned()) throw ConfigError("dataset.n must be a non-negative integer");
      d.n = v.get<std::size_t>();
    } else if (k == "driver") d.params = driver::params_from_json(v);
    else throw ConfigError("unknown dataset key '" + k + "'");
  }
  return d;
}

int cmd_dataset(const Common& c, std::optional<std::size_t> n_flag) {
  const auto started = std::chrono::steady_clock::now();
  const auto doc = load_config(c.config_path);
  const auto seed = resolve_seed(c, doc);
  auto spec = parse_dataset(section(doc, "dataset"));
  if (n_flag) spec.n = *n_flag;

  Rng rng(seed);
  const auto records = driver::generate_dataset(driver::build_model(spec.params), spec.n, rng);
  Outputs out(c.out_dir);
  out.write("dataset.csv", render([&](std::ostream& s) { driver::write_records_csv(s, records); }));
  write_manifest(out, "dataset", c, seed, started);
  return kExitOk;
}

// eval ----------------------------------------------------------------------

struct EvalSpec {
  std::string data;
  DatasetSpec dataset;
  eval::CvOptions cv;
  std::vector<driver::EvidenceMask> masks{driver::EvidenceMask::full(), {false, true, true}, {true, false, true},
                                          {true, true, false}};
};

EvalSpec parse_eval(const json& sec, const std::string& dir) {
  EvalSpec e;
  try {
    for (const auto& [k, v] : sec.items()) {
      if (k == "data") {
        e.data = v.get<std::string>();
        if (!e.data.empty() && e.data.front() != '/') e.data = dir + "/" + e.data;
      } else if (k == "n") e.dataset.n = v.get<std::size_t>();
      else if (k == "driver") e.dataset.params = driver::params_from_json(v);
      else if (k == "folds") e.cv.folds = v.get<std::size_t>();
      else if (k == "repetitions") e.cv.repetitions = v.get<std::size_t>();
      else if (k == "alpha") e.cv.alpha = v.get<double>();
      else if (k == "threshold") e.cv.threshold = v.get<double>();
      else if (k == "stratified") e.cv.stratified = v.get<bool>();
      else if (k == "masks") {
        e.masks.clear();
        for (const auto& m : v) e.masks.push_back(driver::EvidenceMask::parse(m.get<std::string>()));
      } else throw ConfigError("unknown eval key '" + k + "'");
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("eval config: ") + ex.what());
  }
  if (e.cv.folds < 2) throw ConfigError("eval.folds must be at least 2");
  if (e.cv.repetitions < 1) throw ConfigError("eval.repetitions must be at least 1");
  if (!(e.cv.alpha >= 0.0)) throw ConfigError("eval.alpha must be non-negative");
  if (e.masks.empty()) throw ConfigError("eval needs at least one mask");
  return e;
}

std::string mask_slug(const driver::EvidenceMask& m) {
  std::string s;
  if (m.time_limit()) s += "TL_";
  if (m.partner()) s += "IP_";
  if (m.gender()) s += "G_";
  return s.empty() ? "none" : s.substr(0, s.size() - 1);
}

int cmd_eval(const Common& c, const std::vector<std::string>& mask_flags) {
  const auto started = std::chrono::steady_clock::now();
  const auto doc = load_config(c.config_path);
  const auto seed = resolve_seed(c, doc);
  auto spec = parse_eval(section(doc, "eval"), base_dir(c.config_path));
  if (!mask_flags.empty()) {
    spec.masks.clear();
    for (const auto& m : mask_flags) spec.masks.push_back(driver::EvidenceMask::parse(m));
  }

  std::vector<driver::MergingRecord> records;
  if (!spec.data.empty()) {
    std::ifstream in(spec.data);
    if (!in) throw ConfigError("cannot open data file '" + spec.data + "'");
    records = driver::read_records_csv(in);
  } else {
    Rng rng(derive_seed(seed, 0));
    records = driver::generate_dataset(driver::build_model(spec.dataset.params), spec.dataset.n, rng);
  }
  if (records.size() < spec.cv.folds) throw ConfigError("too few records for the requested folds");
  spec.cv.seed = derive_seed(seed, 1);
  const auto report = eval::cross_validate(records, spec.masks, spec.cv);

  Outputs out(c.out_dir);
  out.write("eval.json", dump(eval::report_to_json(report)));
  out.write("table.csv", render([&](std::ostream& s) { eval::write_report_csv(s, report); }));
  for (const auto& m : report.masks)
    out.write("roc_" + mask_slug(m.mask) + ".csv", render([&](std::ostream& s) { eval::write_roc_csv(s, m.first_roc); }));
  write_manifest(out, "eval", c, seed, started);
  return kExitOk;
}

// simulate ------------------------------------------------------------------

int cmd_simulate(const Common& c, std::size_t episodes) {
  const auto started = std::chrono::steady_clock::now();
  const auto doc = load_config(c.config_path);
  const auto seed = resolve_seed(c, doc);
  auto sec = section(doc, "simulate");
  const auto cfg = sim::sim_config_from_json(sec, base_dir(c.config_path));
  if (episodes == 0) throw ConfigError("--episodes must be at least 1");

  Outputs out(c.out_dir);
  const auto log = sim::run_episode(cfg, derive_seed(seed, 0));
  out.write("episode.jsonl", render([&](std::ostream& s) { sim::write_log_jsonl(s, log); }));
  const auto est = sim::monte_carlo_risk(cfg, episodes, seed);
  json summary = sim::estimate_to_json(est);
  summary["first_episode_outcome"] = sim::to_string(log.outcome);
  out.write("summary.json", dump(summary));
  write_manifest(out, "simulate", c, seed, started);
  return kExitOk;
}

// risk ----------------------------------------------------------------------

game::Strategy parse_strategy_name(const std::string& s) {
  if (s == "uncontrolled") return game::Strategy::uncontrolled();
  if (s == "latch") return game::Strategy::latch();
  throw ConfigError("unknown strategy '" + s + "'");
}

struct Sweep {
  bool calibration = false;
  game::CurveParameter parameter = game::CurveParameter::Sensitivity;
  std::vector<double> grid;
};

Sweep parse_sweep(const std::string& text) {
  Sweep s;
  if (text == "calibration") {
    s.calibration = true;
    return s;
  }
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("--param-sweep expects 'calibration' or NAME=v1,v2,...");
  s.parameter = game::parse_curve_parameter(text.substr(0, eq));
  std::istringstream in(text.substr(eq + 1));
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      std::size_t used = 0;
      s.grid.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("bad sweep value '" + tok + "'");
    }
  }
  if (s.grid.empty()) throw ConfigError("sweep grid must not be empty");
  return s;
}

constexpr double kCalibrationTarget = 0.29585;

int cmd_risk(const Common& c, const std::string& strategy_flag, const std::string& sweep_flag) {
  const auto started = std::chrono::steady_clock::now();
  const auto doc = load_config(c.config_path);
  const auto seed = resolve_seed(c, doc);
  auto sec = section(doc, "risk");
  std::optional<game::Strategy> strategy;
  if (sec.contains("strategy")) {
    strategy = game::strategy_from_json(sec["strategy"]);
    sec.erase("strategy");
  }
  const auto params = game::game_params_from_json(sec);
  const bool optimal = strategy_flag == "optimal";
  if (!strategy_flag.empty() && !optimal) strategy = parse_strategy_name(strategy_flag);
  if (!strategy) strategy = game::Strategy::latch();
  std::optional<Sweep> sweep;
  if (!sweep_flag.empty()) sweep = parse_sweep(sweep_flag);

  Outputs out(c.out_dir);
  if (sweep && optimal) throw ConfigError("--param-sweep evaluates a fixed strategy, not 'optimal'");
  if (sweep && sweep->calibration) {
    const auto rows = game::calibration_sweep(params);
    std::ostringstream js, cs;
    game::write_calibration(js, cs, rows, kCalibrationTarget);
    out.write("calibration.json", js.str());
    out.write("calibration.csv", cs.str());
  } else if (sweep) {
    const auto curve = game::risk_curve(params, sweep->parameter, sweep->grid, *strategy);
    json rows = json::array();
    std::ostringstream cs;
    cs << "x,value\n" << std::setprecision(12);
    for (const auto& p : curve) {
      rows.push_back({{"x", p.x}, {"value", p.value}});
      cs << p.x << ',' << p.value << '\n';
    }
    out.write("curve.json", dump({{"strategy", game::strategy_to_json(*strategy)}, {"points", rows}}));
    out.write("curve.csv", cs.str());
  } else {
    const auto game = game::build_game(params);
    if (optimal) strategy = game::synthesize(game, 1.0).strategy;
    const auto result = game::worst_case_risk(game, *strategy);
    json j = game::result_to_json(result);
    j["strategy"] = game::strategy_to_json(*strategy);
    j["delay_stages"] = game.delay;
    j["params"] = game::game_params_to_json(params);
    out.write("risk.json", dump(j));
    std::ostringstream cs;
    cs << "strategy,value,witness,nodes,edges\n" << std::setprecision(12);
    cs << game::strategy_to_json(*strategy).dump() << ',' << result.value << ",\"" << result.witness.label()
       << "\"," << result.nodes << ',' << result.edges << '\n';
    out.write("risk.csv", cs.str());
    const bool controlled = strategy->kind() == game::Strategy::Kind::Latch;
    if (!optimal && strategy->kind() != game::Strategy::Kind::Table)
      out.write("witness_simulate.json",
                dump({{"simulate", sim::sim_config_to_json(game::witness_config(params, result.witness, controlled))}}));
  }
  write_manifest(out, "risk", c, seed, started);
  return kExitOk;
}

// synthesize ----------------------------------------------------------------

int cmd_synthesize(const Common& c, std::optional<double> threshold_flag) {
  const auto started = std::chrono::steady_clock::now();
  const auto doc = load_config(c.config_path);
  const auto seed = resolve_seed(c, doc);
  auto sec = section(doc, "synthesize");
  double threshold = 1.0;
  if (sec.contains("threshold")) {
    if (!sec["threshold"].is_number()) throw ConfigError("synthesize.threshold must be a number");
    threshold = sec["threshold"].get<double>();
    sec.erase("threshold");
  }
  if (threshold_flag) threshold = *threshold_flag;
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0,1]");
  const auto params = game::game_params_from_json(sec);

  const auto game = game::build_game(params);
  const auto result = game::synthesize(game, threshold);
  Outputs out(c.out_dir);
  json j = game::synthesis_to_json(result);
  j["threshold"] = threshold;
  j["latch_value"] = game::worst_case_risk(game, game::Strategy::latch()).value;
  j["uncontrolled_value"] = game::worst_case_risk(game, game::Strategy::uncontrolled()).value;
  out.write("synthesis.json", dump(j));
  write_manifest(out, "synthesize", c, seed, started);
  if (!result.feasible) {
    std::cerr << "infeasible: optimal worst-case risk " << result.value << " exceeds threshold " << threshold << '\n';
    return kExitInfeasible;
  }
  return kExitOk;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_path, "JSON configuration file");
  sub->add_option("--out", c.out_dir, "Output directory");
  sub->add_option("--seed", c.seed, "Master seed (overrides the config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-traffic merging risk toolkit"};
  app.set_version_flag("--version", std::string("mixtraffic ") + kToolVersion + " (config schema " +
                                        std::to_string(kSchemaVersion) + ")");
  app.require_subcommand(1);

  Common common;
  std::optional<std::size_t> n;
  std::vector<std::string> masks;
  std::size_t episodes = 1000;
  std::string strategy, sweep;
  std::optional<double> threshold;

  auto* dataset = app.add_subcommand("dataset", "Sample merging records from the driver network");
  add_common(dataset, common);
  dataset->add_option("-n,--n", n, "Number of records");

  auto* evalc = app.add_subcommand("eval", "Cross-validate the merging network under evidence masks");
  add_common(evalc, common);
  evalc->add_option("--masks", masks, "Evidence masks, e.g. 'TL,IP,G;IP,G'")->delimiter(';');

  auto* simulate = app.add_subcommand("simulate", "Run the intersection simulator");
  add_common(simulate, common);
  simulate->add_option("--episodes", episodes, "Monte Carlo episodes");

  auto* risk = app.add_subcommand("risk", "Exact worst-case close-encounter risk");
  add_common(risk, common);
  risk->add_option("--strategy", strategy, "uncontrolled | latch | optimal");
  risk->add_option("--param-sweep", sweep, "'calibration' or sensitivity|delay|onset-mean=v1,v2,...");

  auto* synth = app.add_subcommand("synthesize", "Synthesize a controller strategy");
  add_common(synth, common);
  synth->add_option("--threshold", threshold, "Admissible worst-case risk");
  synth->add_option("--strategy", strategy, "Only 'optimal' is accepted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*dataset) return cmd_dataset(common, n);
    if (*evalc) return cmd_eval(common, masks);
    if (*simulate) return cmd_simulate(common, episodes);
    if (*risk) return cmd_risk(common, strategy, sweep);
    if (*synth) {
      if (!strategy.empty() && strategy != "optimal") throw ConfigError("synthesize only produces the optimal strategy");
      return cmd_synthesize(common, threshold);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::length_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}
