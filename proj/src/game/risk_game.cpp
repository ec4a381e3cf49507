#include "mixtraffic/game/risk_game.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "mixtraffic/error.hpp"

namespace mixtraffic::game {

int GameParams::delay_stages() const {
  if (!delay_segments.empty()) return std::accumulate(delay_segments.begin(), delay_segments.end(), 0);
  if (obs_delay_stages) return *obs_delay_stages;
  const auto sensor = std::lround(sensor_delay_s / stage_s);
  const auto start = std::lround(start_delay_s / stage_s);
  return static_cast<int>(std::max<long>(0, sensor - start));
}

void GameParams::check() const {
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (horizon > 60) throw ConfigError("horizon too large");
  if (obs_delay_stages && *obs_delay_stages < 0) throw ConfigError("observation delay must be non-negative");
  for (int s : delay_segments)
    if (s < 0) throw ConfigError("delay segments must be non-negative");
  if (delay_stages() > 30) throw ConfigError("observation delay above 30 stages");
  if (!(stage_s > 0.0)) throw ConfigError("stage_s must be positive");
  if (!(sensor_delay_s >= 0.0 && start_delay_s >= 0.0)) throw ConfigError("delays must be non-negative");
  if (check_ahead < 1) throw ConfigError("check_ahead must be at least 1");
  for (double p : {sensitivity, specificity, p_frustrated_av, p_frustrated_manual, p_calm, onset.p})
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("probabilities must lie in [0,1]");
  if (onset.trials < 0 || onset.offset < 0) throw ConfigError("onset offset and trials must be non-negative");
  if (node_cap == 0) throw ConfigError("node_cap must be positive");
}

GameParams game_params_from_json(const nlohmann::json& doc) {
  GameParams p;
  if (!doc.is_object()) throw ConfigError("risk section must be an object");
  try {
    for (const auto& [k, v] : doc.items()) {
      if (k == "horizon") p.horizon = v.get<int>();
      else if (k == "obs_delay_stages") p.obs_delay_stages = v.get<int>();
      else if (k == "delay_segments") p.delay_segments = v.get<std::vector<int>>();
      else if (k == "stage_s") p.stage_s = v.get<double>();
      else if (k == "sensor_delay_s") p.sensor_delay_s = v.get<double>();
      else if (k == "start_delay_s") p.start_delay_s = v.get<double>();
      else if (k == "check_ahead") p.check_ahead = v.get<int>();
      else if (k == "sensitivity") p.sensitivity = v.get<double>();
      else if (k == "specificity") p.specificity = v.get<double>();
      else if (k == "noise") {
        const auto s = v.get<std::string>();
        if (s == "independent") p.noise = sensor::NoiseModel::Independent;
        else if (s == "per_interval") p.noise = sensor::NoiseModel::PerInterval;
        else throw ConfigError("noise must be 'independent' or 'per_interval'");
      } else if (k == "onset") {
        if (!v.is_object()) throw ConfigError("onset must be an object");
        for (const auto& [ok, ov] : v.items()) {
          if (ok == "offset") p.onset.offset = ov.get<int>();
          else if (ok == "trials") p.onset.trials = ov.get<int>();
          else if (ok == "p") p.onset.p = ov.get<double>();
          else throw ConfigError("unknown onset key '" + ok + "'");
        }
      } else if (k == "p_frustrated_av") p.p_frustrated_av = v.get<double>();
      else if (k == "p_frustrated_manual") p.p_frustrated_manual = v.get<double>();
      else if (k == "p_calm") p.p_calm = v.get<double>();
      else if (k == "count_manual_encounters") p.count_manual_encounters = v.get<bool>();
      else if (k == "actions") {
        bool maintain = false, open = false;
        for (const auto& a : v) {
          const auto s = a.get<std::string>();
          if (s == "maintain") maintain = true;
          else if (s == "open_gap") open = true;
          else throw ConfigError("unknown action '" + s + "'");
        }
        if (!maintain) throw ConfigError("the action set must contain 'maintain'");
        p.allow_open_gap = open;
      } else if (k == "node_cap") p.node_cap = v.get<std::size_t>();
      else throw ConfigError("unknown risk key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("risk config: ") + e.what());
  }
  p.check();
  return p;
}

nlohmann::json game_params_to_json(const GameParams& p) {
  nlohmann::json j{{"horizon", p.horizon},
                   {"stage_s", p.stage_s},
                   {"sensor_delay_s", p.sensor_delay_s},
                   {"start_delay_s", p.start_delay_s},
                   {"check_ahead", p.check_ahead},
                   {"sensitivity", p.sensitivity},
                   {"specificity", p.specificity},
                   {"noise", p.noise == sensor::NoiseModel::Independent ? "independent" : "per_interval"},
                   {"onset", {{"offset", p.onset.offset}, {"trials", p.onset.trials}, {"p", p.onset.p}}},
                   {"p_frustrated_av", p.p_frustrated_av},
                   {"p_frustrated_manual", p.p_frustrated_manual},
                   {"p_calm", p.p_calm},
                   {"count_manual_encounters", p.count_manual_encounters},
                   {"node_cap", p.node_cap}};
  if (p.obs_delay_stages) j["obs_delay_stages"] = *p.obs_delay_stages;
  if (!p.delay_segments.empty()) j["delay_segments"] = p.delay_segments;
  j["actions"] = p.allow_open_gap ? nlohmann::json{"maintain", "open_gap"} : nlohmann::json{"maintain"};
  return j;
}

std::vector<GapClass> ScenarioChoice::gap_classes(int horizon) const {
  std::vector<GapClass> out(static_cast<std::size_t>(horizon), GapClass::Closed);
  if (arrival && arrival_stage < horizon)
    out[arrival_stage] = gap == EgoGap::Short ? GapClass::Short : GapClass::Safe;
  return out;
}

std::string ScenarioChoice::label() const {
  if (!arrival) return "no arrival";
  return std::string(gap == EgoGap::Short ? "short" : "safe") + " gap at stage " +
         std::to_string(arrival_stage) + " led by " + (leader == Leader::Hav ? "hav" : "manual");
}

nlohmann::json choice_to_json(const ScenarioChoice& c) {
  nlohmann::json j{{"arrival", c.arrival}, {"label", c.label()}};
  if (c.arrival) {
    j["arrival_stage"] = c.arrival_stage;
    j["leader"] = c.leader == Leader::Hav ? "hav" : "manual";
    j["gap"] = c.gap == EgoGap::Short ? "short" : "safe";
  }
  return j;
}

namespace {

enum class Phase : std::uint8_t { Hazard, Report, Control };
enum Verdict : std::uint8_t { Unknown = 0, Negative = 1, Positive = 2 };

struct State {
  int plan = 0;
  int g = 0;
  Phase phase = Phase::Hazard;
  bool frustrated = false;
  bool latch = false;
  bool opened = false;
  bool observed = false;  // delayed state seen at this stage
  std::uint8_t calm_verdict = Unknown;
  std::uint8_t frust_verdict = Unknown;
  std::uint32_t pipe = 0;

  std::uint64_t key() const {
    std::uint64_t k = static_cast<std::uint64_t>(plan);
    k = (k << 6) | static_cast<std::uint64_t>(g);
    k = (k << 2) | static_cast<std::uint64_t>(phase);
    k = (k << 1) | frustrated;
    k = (k << 1) | latch;
    k = (k << 1) | opened;
    k = (k << 1) | observed;
    k = (k << 2) | calm_verdict;
    k = (k << 2) | frust_verdict;
    return (k << 32) ^ pipe;
  }
};

class Builder {
 public:
  explicit Builder(Game& game) : game_(game), p_(game.params) {
    const auto pmf = p_.onset.pmf();
    hazard_.assign(static_cast<std::size_t>(p_.horizon) + 1, 0.0);
    for (int g = 0; g <= p_.horizon; ++g) {
      const int k = g - p_.onset.offset;
      if (k < 0) continue;
      if (k >= static_cast<int>(pmf.size())) break;
      double tail = 0.0;
      for (std::size_t j = static_cast<std::size_t>(k); j < pmf.size(); ++j) tail += pmf[j];
      hazard_[g] = tail > 0.0 ? std::min(1.0, pmf[k] / tail) : 0.0;
      if (k + 1 == static_cast<int>(pmf.size())) hazard_[g] = 1.0;
    }
    segments_ = p_.delay_segments;
    if (segments_.empty() && game.delay > 0) segments_.push_back(game.delay);
  }

  void build() {
    zero_ = add({Mover::Terminal, p_.horizon, 0.0, {}, {}, {}, {}});
    one_ = add({Mover::Terminal, p_.horizon, 1.0, {}, {}, {}, {}});
    GameNode root{Mover::Adversary, -1, 0.0, {}, {}, {}, {}};
    for (int e = 0; e < p_.horizon; ++e)
      for (Leader leader : {Leader::Hav, Leader::Manual})
        for (EgoGap gap : {EgoGap::Short, EgoGap::Safe})
          plans_.push_back({true, e, leader, gap});
    plans_.push_back({});
    for (std::size_t i = 0; i < plans_.size(); ++i) {
      State s;
      s.plan = static_cast<int>(i);
      root.children.push_back(plans_[i].arrival ? hazard(s) : zero_);
    }
    game_.choices = plans_;
    game_.root = add(std::move(root));
  }

 private:
  int add(GameNode n) {
    if (game_.nodes.size() >= p_.node_cap) throw std::length_error("horizon too large");
    game_.edge_count += n.children.size();
    game_.nodes.push_back(std::move(n));
    return static_cast<int>(game_.nodes.size()) - 1;
  }

  int memo(const State& s, GameNode n) {
    const int id = add(std::move(n));
    memo_.emplace(s.key(), id);
    return id;
  }

  const int* lookup(const State& s) const {
    const auto it = memo_.find(s.key());
    return it == memo_.end() ? nullptr : &it->second;
  }

  int chance(const State& s, std::vector<int> children, std::vector<double> probs) {
    GameNode n{Mover::Chance, s.g, 0.0, {}, std::move(children), std::move(probs), {}};
    return memo(s, std::move(n));
  }

  // Frustration may set in as the stage begins.
  int hazard(State s) {
    s.phase = Phase::Hazard;
    if (const int* id = lookup(s)) return *id;
    const double h = s.frustrated ? 0.0 : hazard_[s.g];
    if (h <= 0.0 || h >= 1.0) {
      State t = s;
      t.frustrated = s.frustrated || h >= 1.0;
      const int next = after_hazard(t);
      memo_.emplace(s.key(), next);
      return next;
    }
    State on = s, off = s;
    on.frustrated = true;
    return chance(s, {after_hazard(on), after_hazard(off)}, {h, 1.0 - h});
  }

  bool controllable(const ScenarioChoice& c) const {
    return c.leader == Leader::Hav && c.gap == EgoGap::Short && p_.allow_open_gap;
  }

  // Shift the true state through the delay registers; returns the delayed state.
  bool push(State& s) const {
    if (segments_.empty()) return s.frustrated;
    bool carry = s.frustrated;
    int shift = 0;
    std::uint32_t out = 0;
    for (int len : segments_) {
      if (len == 0) continue;
      const std::uint32_t mask = (len >= 32 ? ~0u : ((1u << len) - 1u)) << shift;
      std::uint32_t reg = (s.pipe & mask) >> shift;
      const bool leaving = (reg >> (len - 1)) & 1u;
      reg = ((reg << 1) | (carry ? 1u : 0u)) & ((len >= 32 ? ~0u : (1u << len) - 1u));
      out |= reg << shift;
      carry = leaving;
      shift += len;
    }
    s.pipe = out;
    return carry;
  }

  int after_hazard(State s) {
    const auto& plan = plans_[s.plan];
    const bool obs = push(s);
    const int lo = std::max(0, plan.arrival_stage - p_.check_ahead + 1);
    if (!controllable(plan) || s.opened || s.g < lo) return finish(s);
    s.observed = obs;
    return report(s);
  }

  int report(State s) {
    s.phase = Phase::Report;
    if (const int* id = lookup(s)) return *id;
    const bool obs = s.observed;
    const double q = obs ? p_.sensitivity : 1.0 - p_.specificity;  // P(report +)
    State pos = s, neg = s;
    pos.latch = true;
    if (p_.noise == sensor::NoiseModel::PerInterval) {
      auto& v = obs ? s.frust_verdict : s.calm_verdict;
      if (v != Unknown) {
        State t = s;
        t.latch = s.latch || v == Positive;
        const int next = control(t);
        memo_.emplace(s.key(), next);
        return next;
      }
      (obs ? pos.frust_verdict : pos.calm_verdict) = Positive;
      (obs ? neg.frust_verdict : neg.calm_verdict) = Negative;
    }
    if (q <= 0.0 || q >= 1.0) {
      const int next = control(q >= 1.0 ? pos : neg);
      memo_.emplace(s.key(), next);
      return next;
    }
    return chance(s, {control(pos), control(neg)}, {q, 1.0 - q});
  }

  int control(State s) {
    s.phase = Phase::Control;
    s.observed = false;
    if (const int* id = lookup(s)) return *id;
    const auto& plan = plans_[s.plan];
    State open = s;
    open.opened = true;
    GameNode n{Mover::Controller, s.g, 0.0, {s.latch, GapClass::Short, plan.arrival_stage - s.g},
               {finish(s), finish(open)}, {}, {Action::Maintain, Action::OpenGap}};
    return memo(s, std::move(n));
  }

  int finish(const State& s) {
    const auto& plan = plans_[s.plan];
    if (s.g < plan.arrival_stage) {
      State t = s;
      t.g = s.g + 1;
      t.observed = false;
      return hazard(t);
    }
    if (s.opened || plan.gap == EgoGap::Safe) return zero_;
    if (plan.leader == Leader::Manual && !p_.count_manual_encounters) return zero_;
    const double p = !s.frustrated ? p_.p_calm
                     : plan.leader == Leader::Hav ? p_.p_frustrated_av
                                                  : p_.p_frustrated_manual;
    if (p <= 0.0) return zero_;
    if (p >= 1.0) return one_;
    const auto key = std::pair{p, s.g};
    if (const auto it = merge_.find(key); it != merge_.end()) return it->second;
    GameNode n{Mover::Chance, s.g, 0.0, {}, {one_, zero_}, {p, 1.0 - p}, {}};
    const int id = add(std::move(n));
    merge_.emplace(key, id);
    return id;
  }

  Game& game_;
  const GameParams& p_;
  std::vector<double> hazard_;
  std::vector<int> segments_;
  std::vector<ScenarioChoice> plans_;
  std::unordered_map<std::uint64_t, int> memo_;
  std::map<std::pair<double, int>, int> merge_;
  int zero_ = -1, one_ = -1;
};

}  // namespace

Game build_game(const GameParams& params) {
  params.check();
  Game game;
  game.params = params;
  game.delay = params.delay_stages();
  Builder(game).build();
  return game;
}

Game build_game(GameParams params, int horizon, int obs_delay_stages) {
  params.horizon = horizon;
  params.obs_delay_stages = obs_delay_stages;
  params.delay_segments.clear();
  return build_game(params);
}

Strategy Strategy::table(std::map<std::pair<bool, int>, Action> entries) {
  Strategy s(Kind::Table);
  s.entries_ = std::move(entries);
  return s;
}

Action Strategy::decide(const Observation& obs) const {
  if (obs.gap_class == GapClass::Safe) return Action::Maintain;
  switch (kind_) {
    case Kind::Uncontrolled: return Action::Maintain;
    case Kind::Latch: return obs.latch ? Action::OpenGap : Action::Maintain;
    case Kind::Table: break;
  }
  const auto it = entries_.find({obs.latch, obs.gaps_to_arrival});
  if (it == entries_.end())
    throw std::invalid_argument("undefined strategy node (latch=" + std::to_string(obs.latch) +
                                ", gaps_to_arrival=" + std::to_string(obs.gaps_to_arrival) + ")");
  return it->second;
}

Strategy strategy_from_json(const nlohmann::json& doc) {
  if (doc.is_string()) {
    const auto s = doc.get<std::string>();
    if (s == "uncontrolled") return Strategy::uncontrolled();
    if (s == "latch") return Strategy::latch();
    throw ConfigError("unknown strategy '" + s + "'");
  }
  if (!doc.is_object() || !doc.contains("entries")) throw ConfigError("strategy must be a name or {entries: [...]}");
  std::map<std::pair<bool, int>, Action> entries;
  try {
    for (const auto& e : doc.at("entries")) {
      for (const auto& [k, v] : e.items())
        if (k != "latch" && k != "gaps_to_arrival" && k != "action")
          throw ConfigError("unknown strategy entry key '" + k + "'");
      const auto a = e.at("action").get<std::string>();
      if (a != "maintain" && a != "open_gap") throw ConfigError("unknown action '" + a + "'");
      entries[{e.at("latch").get<bool>(), e.at("gaps_to_arrival").get<int>()}] =
          a == "open_gap" ? Action::OpenGap : Action::Maintain;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("strategy: ") + e.what());
  }
  return Strategy::table(std::move(entries));
}

nlohmann::json strategy_to_json(const Strategy& s) {
  switch (s.kind()) {
    case Strategy::Kind::Uncontrolled: return "uncontrolled";
    case Strategy::Kind::Latch: return "latch";
    case Strategy::Kind::Table: break;
  }
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [key, a] : s.entries())
    entries.push_back({{"latch", key.first},
                       {"gaps_to_arrival", key.second},
                       {"action", a == Action::OpenGap ? "open_gap" : "maintain"}});
  return {{"entries", entries}};
}

namespace {

std::vector<double> node_values(const Game& game, const Strategy& strategy) {
  std::vector<double> v(game.nodes.size(), 0.0);
  for (std::size_t i = 0; i < game.nodes.size(); ++i) {
    const auto& n = game.nodes[i];
    switch (n.mover) {
      case Mover::Terminal: v[i] = n.risk; break;
      case Mover::Chance: {
        double acc = 0.0;
        for (std::size_t c = 0; c < n.children.size(); ++c) acc += n.probabilities[c] * v[n.children[c]];
        v[i] = acc;
        break;
      }
      case Mover::Adversary: {
        double best = -1.0;
        for (int c : n.children) best = std::max(best, v[c]);
        v[i] = best;
        break;
      }
      case Mover::Controller: {
        const Action a = strategy.decide(n.obs);
        const auto it = std::find(n.actions.begin(), n.actions.end(), a);
        if (it == n.actions.end()) throw std::invalid_argument("strategy action not available");
        v[i] = v[n.children[it - n.actions.begin()]];
        break;
      }
    }
  }
  return v;
}

}  // namespace

RiskResult worst_case_risk(const Game& game, const Strategy& strategy) {
  const auto v = node_values(game, strategy);
  const auto& root = game.nodes[game.root];
  RiskResult r;
  r.nodes = game.nodes.size();
  r.edges = game.edge_count;
  r.value = -1.0;
  for (std::size_t c = 0; c < root.children.size(); ++c) {
    const double x = v[root.children[c]];
    r.choice_values.push_back(x);
    if (x > r.value) {  // first-listed wins ties
      r.value = x;
      r.witness = game.choices[c];
    }
  }
  return r;
}

double evaluate_fixed_plan(const Game& game, const Strategy& strategy, const ScenarioChoice& choice) {
  const auto it = std::find(game.choices.begin(), game.choices.end(), choice);
  if (it == game.choices.end()) throw std::invalid_argument("scenario choice not in game");
  const auto v = node_values(game, strategy);
  return v[game.nodes[game.root].children[it - game.choices.begin()]];
}

nlohmann::json result_to_json(const RiskResult& r) {
  return {{"value", r.value}, {"witness", choice_to_json(r.witness)}, {"nodes", r.nodes}, {"edges", r.edges}};
}

namespace {

// Calls f on every k-subset of [0, n) in lexicographic order until it returns true.
template <typename F>
bool for_each_subset(int n, int k, F&& f) {
  std::vector<int> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    if (f(idx)) return true;
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return false;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace

SynthesisResult synthesize(const Game& game, double risk_threshold) {
  if (!(risk_threshold >= 0.0 && risk_threshold <= 1.0)) throw std::invalid_argument("threshold must lie in [0,1]");
  const int horizon = game.params.check_ahead;
  std::vector<std::pair<bool, int>> keys;
  for (int k = 0; k < horizon; ++k) {
    keys.push_back({true, k});
    keys.push_back({false, k});
  }
  auto strategy_for = [&](const std::vector<int>& open) {
    std::map<std::pair<bool, int>, Action> entries;
    for (const auto& key : keys) entries[key] = Action::Maintain;
    for (int i : open) entries[keys[i]] = Action::OpenGap;
    return Strategy::table(std::move(entries));
  };

  SynthesisResult out;
  std::vector<int> all(keys.size());
  std::iota(all.begin(), all.end(), 0);
  // Opening never raises risk, so the all-open table attains the minimum.
  const double best = worst_case_risk(game, game.params.allow_open_gap ? strategy_for(all) : strategy_for({})).value;
  out.strategies_evaluated = 1;
  const int n = game.params.allow_open_gap ? static_cast<int>(keys.size()) : 0;
  for (int k = 0; k <= n; ++k) {
    const bool found = for_each_subset(n, k, [&](const std::vector<int>& open) {
      auto s = strategy_for(open);
      const auto r = worst_case_risk(game, s);
      ++out.strategies_evaluated;
      if (r.value <= best + 1e-12) {
        out.value = r.value;
        out.strategy = std::move(s);
        out.witness = r.witness;
        return true;
      }
      return false;
    });
    if (found) break;
  }
  out.feasible = out.value <= risk_threshold;
  return out;
}

nlohmann::json synthesis_to_json(const SynthesisResult& s) {
  return {{"feasible", s.feasible},
          {"value", s.value},
          {"strategy", strategy_to_json(s.strategy)},
          {"witness", choice_to_json(s.witness)},
          {"strategies_evaluated", s.strategies_evaluated}};
}

CurveParameter parse_curve_parameter(const std::string& name) {
  if (name == "sensitivity") return CurveParameter::Sensitivity;
  if (name == "delay") return CurveParameter::Delay;
  if (name == "onset-mean" || name == "onset_mean") return CurveParameter::OnsetMean;
  throw ConfigError("unknown curve parameter '" + name + "'");
}

std::vector<CurvePoint> risk_curve(const GameParams& base, CurveParameter parameter,
                                   const std::vector<double>& grid, const Strategy& strategy) {
  if (grid.empty()) throw std::invalid_argument("risk_curve needs a nonempty grid");
  std::vector<CurvePoint> out;
  for (double x : grid) {
    GameParams p = base;
    switch (parameter) {
      case CurveParameter::Sensitivity: p.sensitivity = x; break;
      case CurveParameter::Delay:
        p.delay_segments.clear();
        p.obs_delay_stages = static_cast<int>(std::lround(x));
        break;
      case CurveParameter::OnsetMean:
        p.onset.offset = static_cast<int>(std::lround(x - p.onset.trials * p.onset.p));
        break;
    }
    out.push_back({x, worst_case_risk(build_game(p), strategy).value});
  }
  return out;
}

std::vector<CalibrationRow> calibration_sweep(const GameParams& base) {
  std::vector<CalibrationRow> rows;
  for (auto noise : {sensor::NoiseModel::PerInterval, sensor::NoiseModel::Independent})
    for (int c = 1; c <= 8; ++c)
      for (int d = 0; d <= 3; ++d)
        for (int off = 2; off <= 5; ++off) {
          GameParams p = base;
          p.noise = noise;
          p.check_ahead = c;
          p.delay_segments.clear();
          p.obs_delay_stages = d;
          p.onset.offset = off;
          rows.push_back({c, d, off, noise, worst_case_risk(build_game(p), Strategy::latch()).value});
        }
  return rows;
}

void write_calibration(std::ostream& json_out, std::ostream& csv_out, const std::vector<CalibrationRow>& rows,
                       double target) {
  auto noise_name = [](sensor::NoiseModel n) {
    return n == sensor::NoiseModel::Independent ? "independent" : "per_interval";
  };
  nlohmann::json all = nlohmann::json::array();
  const CalibrationRow* best = nullptr;
  csv_out << "noise,check_ahead,delay_stages,onset_offset,latch_risk,abs_error\n" << std::setprecision(12);
  for (const auto& r : rows) {
    const double err = std::abs(r.value - target);
    if (!best || err < std::abs(best->value - target)) best = &r;
    csv_out << noise_name(r.noise) << ',' << r.check_ahead << ',' << r.delay << ',' << r.onset_offset << ','
            << r.value << ',' << err << '\n';
    all.push_back({{"noise", noise_name(r.noise)},
                   {"check_ahead", r.check_ahead},
                   {"delay_stages", r.delay},
                   {"onset_offset", r.onset_offset},
                   {"latch_risk", r.value},
                   {"abs_error", err}});
  }
  nlohmann::json j{{"target", target}, {"rows", all}};
  if (best)
    j["closest"] = {{"noise", noise_name(best->noise)},
                    {"check_ahead", best->check_ahead},
                    {"delay_stages", best->delay},
                    {"onset_offset", best->onset_offset},
                    {"latch_risk", best->value},
                    {"abs_error", std::abs(best->value - target)}};
  json_out << j.dump(2) << '\n';
}

sim::SimConfig witness_config(const GameParams& params, const ScenarioChoice& choice, bool controller,
                              double dt) {
  sim::SimConfig cfg;
  cfg.dt = dt;
  const double closed = params.stage_s;
  cfg.closed_gap_s = closed + 0.2;
  cfg.short_gap_s = closed + 1.0;
  cfg.safe_gap_s = std::max(8.0, cfg.short_gap_s);
  const int count = choice.arrival ? choice.arrival_stage + 1 : params.horizon;
  cfg.gaps.assign(static_cast<std::size_t>(count), sim::Gap{closed, Leader::Manual});
  if (choice.arrival) {
    const double width = choice.gap == EgoGap::Short ? closed + 0.5 : cfg.safe_gap_s + 1.0;
    cfg.gaps.back() = sim::Gap{width, choice.leader};
  }
  cfg.start_delay_s = params.start_delay_s;
  cfg.check_ahead_gaps = params.check_ahead;
  cfg.sensor.sensitivity = params.sensitivity;
  cfg.sensor.specificity = params.specificity;
  cfg.sensor.noise = params.noise;
  cfg.sensor.period_s = params.stage_s;
  cfg.sensor.phase_s = params.start_delay_s;
  cfg.sensor.delay_s = params.start_delay_s + params.delay_stages() * params.stage_s;
  cfg.onset = params.onset;
  cfg.merge_override = sim::MergeOverride{params.p_frustrated_av, params.p_frustrated_manual, params.p_calm,
                                          params.p_calm};
  cfg.controller = controller && params.allow_open_gap;
  cfg.count_manual_encounters = params.count_manual_encounters;
  cfg.check();
  return cfg;
}

}  // namespace mixtraffic::game
