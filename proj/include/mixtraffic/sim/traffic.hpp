#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixtraffic/driver/merging_model.hpp"
#include "mixtraffic/random.hpp"
#include "mixtraffic/sensor/channel.hpp"

namespace mixtraffic::sim {

/// Vehicle following a gap in the oncoming platoon.
enum class Leader { Manual, Hav };

struct Gap {
  double duration_s = 3.0;
  Leader leader = Leader::Manual;
};

/// closed: merging impossible; short: a crossing is a close encounter;
/// medium: crossable but not wide enough for the controller; safe: wide enough.
enum class GapClass { Closed, Short, Medium, Safe };

const char* to_string(GapClass c);

/// Replaces the merging network by fixed merge probabilities per
/// (frustrated, leader) for every mergeable gap.
struct MergeOverride {
  double frustrated_av = 0.97;
  double frustrated_human = 0.37;
  double calm_av = 0.0;
  double calm_human = 0.0;
};

struct WaitingCar {
  bool instrumented = true;
  driver::Gender gender = driver::Gender::Male;
};

struct SimConfig {
  double dt = 0.1;
  std::vector<Gap> gaps;
  double closed_gap_s = 3.2;
  double short_gap_s = 4.0;
  double safe_gap_s = 8.0;
  double start_delay_s = 2.0;
  int check_ahead_gaps = 6;
  sensor::SensorChannel sensor;
  sensor::OnsetLaw onset;
  driver::MergingParams driver = driver::MergingParams::defaults();
  std::optional<MergeOverride> merge_override;
  std::vector<WaitingCar> cars{WaitingCar{}};
  bool controller = true;
  bool count_manual_encounters = false;
  /// Replayed reports for the first waiting car instead of the stochastic channel.
  std::optional<std::vector<sensor::SensorReport>> replay;
  std::uint64_t seed = 0;

  GapClass classify(double gap_s) const;
  /// Throws ConfigError when an invariant is violated.
  void check() const;
};

/// Strict parse: unknown keys are errors. Relative replay paths resolve against `base_dir`.
SimConfig sim_config_from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
nlohmann::json sim_config_to_json(const SimConfig& cfg);

enum class HumanStatus { Waiting, Committing, Crossed, Yielded };

struct VehicleSensorState {
  bool instrumented = true;
  std::optional<sensor::SensorReport> latest;
};

struct WorldState {
  std::int64_t tick = 0;
  double dt = 0.1;
  std::size_t next_gap = 0;
  int waiting_car_id = 0;  // -1 when nobody is waiting
  HumanStatus human = HumanStatus::Waiting;
  std::int64_t commit_tick = -1;
  std::size_t commit_gap = 0;
  sensor::FrustrationProcess frustration;
  std::size_t car_first_gap = 0;
  std::optional<std::int64_t> frustrated_since;  // tick of the rising edge
  double gap_ahead_s = 0.0;  // ego's current front gap
  std::map<int, VehicleSensorState> vehicles;

  double t() const { return static_cast<double>(tick) * dt; }
};

struct C2CMessage {
  enum class Kind { QueryDriverState, StateResponse, NoEquipment };
  Kind kind = Kind::QueryDriverState;
  int vehicle_id = 0;
  double timestamp = 0.0;  // time of the report the response carries
  bool positive = false;
  bool has_report = false;  // false for the cold-start default response
};

/// Most recent report of the vehicle, the cold-start negative response
/// before its first report, or NoEquipment. Throws std::out_of_range for an
/// unknown vehicle.
C2CMessage query_driver_state(const WorldState& world, int vehicle_id);

enum class Action { Maintain, OpenGap };

struct ControllerState {
  bool latch = false;
  Action mode = Action::Maintain;
  int last_waiting_car_id = -1;
  std::optional<double> last_report_t;
};

/// OR-latch policy. The latch resets when the waiting car changes; a response
/// contributes when it is a positive state report.
std::pair<ControllerState, Action> tactical_step(ControllerState ctrl, const C2CMessage& response,
                                                 const WorldState& world, double safe_gap_s);

/// Decision of the waiting human at a gap boundary. Returns the updated
/// world: committing on merge, otherwise unchanged. `merged` tells which.
struct HumanDecision {
  WorldState world;
  bool merged = false;
  double probability = 0.0;
};
HumanDecision human_step(const WorldState& world, const SimConfig& cfg, const Gap& gap,
                         const WaitingCar& car, Rng& rng);

enum class Outcome { SafePass, CloseEncounter, HumanYielded };
const char* to_string(Outcome o);

struct Event {
  double t = 0.0;
  std::string kind;
  nlohmann::json detail;
};

struct EpisodeLog {
  std::vector<Event> events;
  Outcome outcome = Outcome::SafePass;
};

EpisodeLog run_episode(const SimConfig& cfg, std::uint64_t seed);
/// Same dynamics without event recording.
Outcome run_episode_outcome(const SimConfig& cfg, std::uint64_t seed);

void write_log_jsonl(std::ostream& out, const EpisodeLog& log);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Wilson score interval for k successes in n trials.
Interval wilson_interval(std::size_t k, std::size_t n, double z);

struct RiskEstimate {
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
  std::size_t close_encounters = 0;
};

/// Fraction of close encounters over n episodes with seeds derived from
/// master_seed, with a 95 % Wilson interval.
RiskEstimate monte_carlo_risk(const SimConfig& cfg, std::size_t n, std::uint64_t master_seed);
nlohmann::json estimate_to_json(const RiskEstimate& e);

}  // namespace mixtraffic::sim
