#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mixtraffic/sensor/channel.hpp"
#include "mixtraffic/sim/traffic.hpp"

namespace mixtraffic::game {

using sim::Action;
using sim::GapClass;
using sim::Leader;

/// Discretized scenario: one stage per passing gap.
struct GameParams {
  int horizon = 20;
  /// Observation lag in stages. Unset: derived from the delays and stage_s.
  std::optional<int> obs_delay_stages;
  /// Lag as a chain of shift registers; overrides obs_delay_stages when nonempty.
  std::vector<int> delay_segments;
  double stage_s = 3.0;
  double sensor_delay_s = 6.0;
  double start_delay_s = 2.0;
  int check_ahead = 6;
  double sensitivity = 0.78;
  double specificity = 0.78;
  sensor::NoiseModel noise = sensor::NoiseModel::PerInterval;
  sensor::OnsetLaw onset;
  double p_frustrated_av = 0.97;
  double p_frustrated_manual = 0.37;
  double p_calm = 0.0;
  bool count_manual_encounters = false;
  bool allow_open_gap = true;
  std::size_t node_cap = 5'000'000;

  int delay_stages() const;
  /// Throws ConfigError on out-of-range parameters.
  void check() const;
};

GameParams game_params_from_json(const nlohmann::json& doc);
nlohmann::json game_params_to_json(const GameParams& p);

enum class EgoGap { Short, Safe };

/// Open-loop scenario: every gap is closed except the one at
/// `arrival_stage`, led by `leader` and of class `gap`.
struct ScenarioChoice {
  bool arrival = false;
  int arrival_stage = 0;
  Leader leader = Leader::Hav;
  EgoGap gap = EgoGap::Short;

  std::vector<GapClass> gap_classes(int horizon) const;
  std::string label() const;
  bool operator==(const ScenarioChoice&) const = default;
};

nlohmann::json choice_to_json(const ScenarioChoice& c);

struct Observation {
  bool latch = false;
  GapClass gap_class = GapClass::Short;
  int gaps_to_arrival = 0;
};

enum class Mover { Adversary, Chance, Controller, Terminal };

struct GameNode {
  Mover mover = Mover::Terminal;
  int stage = 0;
  double risk = 0.0;                // terminal only
  Observation obs;                  // controller only
  std::vector<int> children;
  std::vector<double> probabilities;  // chance only
  std::vector<Action> actions;        // controller only, parallel to children
};

struct Game {
  GameParams params;
  int delay = 0;
  std::vector<GameNode> nodes;  // children precede parents
  int root = -1;
  std::vector<ScenarioChoice> choices;  // root children, in order
  std::size_t edge_count = 0;
};

/// Throws std::length_error("horizon too large") above params.node_cap nodes.
Game build_game(const GameParams& params);
Game build_game(GameParams params, int horizon, int obs_delay_stages);

/// Observable controller policy on short ego gaps.
class Strategy {
 public:
  enum class Kind { Uncontrolled, Latch, Table };

  static Strategy uncontrolled() { return Strategy(Kind::Uncontrolled); }
  static Strategy latch() { return Strategy(Kind::Latch); }
  /// Keys: (latch, gaps_to_arrival). Missing keys are undefined nodes.
  static Strategy table(std::map<std::pair<bool, int>, Action> entries);

  Kind kind() const { return kind_; }
  const std::map<std::pair<bool, int>, Action>& entries() const { return entries_; }
  /// Throws std::invalid_argument("undefined strategy node") for a missing table entry.
  Action decide(const Observation& obs) const;

 private:
  explicit Strategy(Kind k) : kind_(k) {}
  Kind kind_;
  std::map<std::pair<bool, int>, Action> entries_;
};

Strategy strategy_from_json(const nlohmann::json& doc);
nlohmann::json strategy_to_json(const Strategy& s);

struct RiskResult {
  double value = 0.0;
  ScenarioChoice witness;
  std::vector<double> choice_values;  // parallel to Game::choices
  std::size_t nodes = 0;
  std::size_t edges = 0;
};

RiskResult worst_case_risk(const Game& game, const Strategy& strategy);
double evaluate_fixed_plan(const Game& game, const Strategy& strategy, const ScenarioChoice& choice);
nlohmann::json result_to_json(const RiskResult& r);

struct SynthesisResult {
  bool feasible = false;
  double value = 0.0;
  Strategy strategy = Strategy::uncontrolled();
  ScenarioChoice witness;
  std::size_t strategies_evaluated = 0;
};

/// Minimum worst-case risk over observable strategies, preferring the
/// strategy with the fewest open_gap entries. Infeasible iff value > threshold.
SynthesisResult synthesize(const Game& game, double risk_threshold);
nlohmann::json synthesis_to_json(const SynthesisResult& s);

enum class CurveParameter { Sensitivity, Delay, OnsetMean };
CurveParameter parse_curve_parameter(const std::string& name);

struct CurvePoint {
  double x = 0.0;
  double value = 0.0;
};

/// Worst-case risk of the given strategy per grid point. Onset-mean moves
/// the onset offset so that the law's mean equals the grid value.
std::vector<CurvePoint> risk_curve(const GameParams& base, CurveParameter parameter,
                                   const std::vector<double>& grid,
                                   const Strategy& strategy = Strategy::latch());

struct CalibrationRow {
  int check_ahead = 0;
  int delay = 0;
  int onset_offset = 0;
  sensor::NoiseModel noise = sensor::NoiseModel::PerInterval;
  double value = 0.0;
};

/// Latch risk over a grid of check-ahead, delay, onset offset and noise model.
std::vector<CalibrationRow> calibration_sweep(const GameParams& base);
void write_calibration(std::ostream& json_out, std::ostream& csv_out,
                       const std::vector<CalibrationRow>& rows, double target);

/// Traffic-sim configuration reproducing the given scenario: closed platoon
/// gaps of stage_s, the chosen gap at arrival_stage, report timing aligned
/// with the stage grid and merge probabilities taken from the game.
sim::SimConfig witness_config(const GameParams& params, const ScenarioChoice& choice,
                              bool controller, double dt = 0.5);

}  // namespace mixtraffic::game
