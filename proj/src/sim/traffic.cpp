#include "mixtraffic/sim/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "mixtraffic/error.hpp"

namespace mixtraffic::sim {

const char* to_string(GapClass c) {
  switch (c) {
    case GapClass::Closed: return "closed";
    case GapClass::Short: return "short";
    case GapClass::Medium: return "medium";
    case GapClass::Safe: return "safe";
  }
  return "?";
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::SafePass: return "safe_pass";
    case Outcome::CloseEncounter: return "close_encounter";
    case Outcome::HumanYielded: return "human_yielded";
  }
  return "?";
}

GapClass SimConfig::classify(double gap_s) const {
  if (gap_s < closed_gap_s) return GapClass::Closed;
  if (gap_s < short_gap_s) return GapClass::Short;
  if (gap_s < safe_gap_s) return GapClass::Medium;
  return GapClass::Safe;
}

void SimConfig::check() const {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (gaps.empty()) throw ConfigError("gap sequence must not be empty");
  for (const auto& g : gaps)
    if (!(g.duration_s >= dt)) throw ConfigError("every gap must last at least one tick");
  if (!(closed_gap_s <= short_gap_s && short_gap_s <= safe_gap_s))
    throw ConfigError("gap thresholds must satisfy closed <= short <= safe");
  if (!(start_delay_s >= 0.0)) throw ConfigError("start delay must be non-negative");
  if (check_ahead_gaps < 1) throw ConfigError("check_ahead_gaps must be at least 1");
  if (cars.empty()) throw ConfigError("at least one waiting car is required");
  if (onset.trials < 0 || !(onset.p >= 0.0 && onset.p <= 1.0))
    throw ConfigError("onset law needs trials >= 0 and p in [0,1]");
  sensor.check();
  if (merge_override) {
    for (double p : {merge_override->frustrated_av, merge_override->frustrated_human,
                     merge_override->calm_av, merge_override->calm_human})
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("merge probabilities must lie in [0,1]");
  }
}

namespace {

template <typename F>
void for_keys(const nlohmann::json& doc, const char* what, F&& f) {
  if (!doc.is_object()) throw ConfigError(std::string(what) + " must be an object");
  for (const auto& [key, value] : doc.items())
    if (!f(key, value)) throw ConfigError("unknown " + std::string(what) + " key '" + key + "'");
}

Leader parse_leader(const std::string& s) {
  if (s == "hav" || s == "AV") return Leader::Hav;
  if (s == "manual" || s == "H") return Leader::Manual;
  throw ConfigError("leader must be 'hav' or 'manual'");
}

std::vector<Gap> parse_gaps(const nlohmann::json& doc) {
  std::vector<Gap> gaps;
  if (doc.is_array()) {
    for (const auto& item : doc) {
      Gap g;
      for_keys(item, "gap", [&](const std::string& k, const nlohmann::json& v) {
        if (k == "duration_s") g.duration_s = v.get<double>();
        else if (k == "leader") g.leader = parse_leader(v.get<std::string>());
        else return false;
        return true;
      });
      gaps.push_back(g);
    }
    return gaps;
  }
  // Generator: a manual platoon with a single HAV-led gap.
  std::size_t count = 20, ego_index = 12;
  double platoon_gap_s = 3.0, ego_gap_s = 3.6;
  for_keys(doc, "gap generator", [&](const std::string& k, const nlohmann::json& v) {
    if (k == "count") count = v.get<std::size_t>();
    else if (k == "ego_index") ego_index = v.get<std::size_t>();
    else if (k == "platoon_gap_s") platoon_gap_s = v.get<double>();
    else if (k == "ego_gap_s") ego_gap_s = v.get<double>();
    else return false;
    return true;
  });
  if (ego_index >= count) throw ConfigError("ego_index must be below count");
  gaps.assign(count, Gap{platoon_gap_s, Leader::Manual});
  gaps[ego_index] = Gap{ego_gap_s, Leader::Hav};
  return gaps;
}

}  // namespace

SimConfig sim_config_from_json(const nlohmann::json& doc, const std::string& base_dir) {
  SimConfig c;
  c.gaps.clear();
  try {
    for_keys(doc, "simulate", [&](const std::string& k, const nlohmann::json& v) {
      if (k == "dt") c.dt = v.get<double>();
      else if (k == "gaps") c.gaps = parse_gaps(v);
      else if (k == "closed_gap_s") c.closed_gap_s = v.get<double>();
      else if (k == "short_gap_s") c.short_gap_s = v.get<double>();
      else if (k == "safe_gap_s") c.safe_gap_s = v.get<double>();
      else if (k == "start_delay_s") c.start_delay_s = v.get<double>();
      else if (k == "check_ahead_gaps") c.check_ahead_gaps = v.get<int>();
      else if (k == "sensor") c.sensor = sensor::channel_from_json(v);
      else if (k == "onset") {
        for_keys(v, "onset", [&](const std::string& ok, const nlohmann::json& ov) {
          if (ok == "offset") c.onset.offset = ov.get<int>();
          else if (ok == "trials") c.onset.trials = ov.get<int>();
          else if (ok == "p") c.onset.p = ov.get<double>();
          else return false;
          return true;
        });
      } else if (k == "driver") c.driver = driver::params_from_json(v);
      else if (k == "merge_override") {
        MergeOverride m;
        for_keys(v, "merge_override", [&](const std::string& mk, const nlohmann::json& mv) {
          if (mk == "frustrated_av") m.frustrated_av = mv.get<double>();
          else if (mk == "frustrated_human") m.frustrated_human = mv.get<double>();
          else if (mk == "calm_av") m.calm_av = mv.get<double>();
          else if (mk == "calm_human") m.calm_human = mv.get<double>();
          else return false;
          return true;
        });
        c.merge_override = m;
      } else if (k == "cars") {
        c.cars.clear();
        for (const auto& item : v) {
          WaitingCar car;
          for_keys(item, "car", [&](const std::string& ck, const nlohmann::json& cv) {
            if (ck == "instrumented") car.instrumented = cv.get<bool>();
            else if (ck == "gender") {
              const auto s = cv.get<std::string>();
              if (s == "M") car.gender = driver::Gender::Male;
              else if (s == "F") car.gender = driver::Gender::Female;
              else throw ConfigError("car gender must be 'M' or 'F'");
            } else return false;
            return true;
          });
          c.cars.push_back(car);
        }
      } else if (k == "controller") c.controller = v.get<bool>();
      else if (k == "count_manual_encounters") c.count_manual_encounters = v.get<bool>();
      else if (k == "replay") {
        std::string path = v.get<std::string>();
        if (!path.empty() && path.front() != '/') path = base_dir + "/" + path;
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open replay file '" + path + "'");
        c.replay = sensor::read_reports_csv(in);
      } else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else return false;
      return true;
    });
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("simulate config: ") + e.what());
  }
  if (c.gaps.empty()) c.gaps = parse_gaps(nlohmann::json::object());
  c.check();
  return c;
}

nlohmann::json sim_config_to_json(const SimConfig& c) {
  nlohmann::json gaps = nlohmann::json::array();
  for (const auto& g : c.gaps)
    gaps.push_back({{"duration_s", g.duration_s}, {"leader", g.leader == Leader::Hav ? "hav" : "manual"}});
  nlohmann::json cars = nlohmann::json::array();
  for (const auto& car : c.cars)
    cars.push_back({{"instrumented", car.instrumented},
                    {"gender", car.gender == driver::Gender::Male ? "M" : "F"}});
  nlohmann::json j{{"dt", c.dt},
                   {"gaps", gaps},
                   {"closed_gap_s", c.closed_gap_s},
                   {"short_gap_s", c.short_gap_s},
                   {"safe_gap_s", c.safe_gap_s},
                   {"start_delay_s", c.start_delay_s},
                   {"check_ahead_gaps", c.check_ahead_gaps},
                   {"sensor", sensor::channel_to_json(c.sensor)},
                   {"onset", {{"offset", c.onset.offset}, {"trials", c.onset.trials}, {"p", c.onset.p}}},
                   {"driver", driver::params_to_json(c.driver)},
                   {"cars", cars},
                   {"controller", c.controller},
                   {"count_manual_encounters", c.count_manual_encounters},
                   {"seed", c.seed}};
  if (c.merge_override)
    j["merge_override"] = {{"frustrated_av", c.merge_override->frustrated_av},
                           {"frustrated_human", c.merge_override->frustrated_human},
                           {"calm_av", c.merge_override->calm_av},
                           {"calm_human", c.merge_override->calm_human}};
  return j;
}

C2CMessage query_driver_state(const WorldState& world, int vehicle_id) {
  const auto it = world.vehicles.find(vehicle_id);
  if (it == world.vehicles.end()) throw std::out_of_range("unknown vehicle " + std::to_string(vehicle_id));
  C2CMessage msg;
  msg.vehicle_id = vehicle_id;
  if (!it->second.instrumented) {
    msg.kind = C2CMessage::Kind::NoEquipment;
    return msg;
  }
  msg.kind = C2CMessage::Kind::StateResponse;
  if (const auto& r = it->second.latest) {
    msg.timestamp = r->t;
    msg.positive = r->positive;
    msg.has_report = true;
  } else {
    msg.timestamp = world.t();
  }
  return msg;
}

std::pair<ControllerState, Action> tactical_step(ControllerState ctrl, const C2CMessage& response,
                                                 const WorldState& world, double safe_gap_s) {
  if (world.waiting_car_id != ctrl.last_waiting_car_id) {
    ctrl.latch = false;
    ctrl.last_report_t.reset();
    ctrl.last_waiting_car_id = world.waiting_car_id;
  }
  if (response.kind == C2CMessage::Kind::StateResponse && response.has_report &&
      response.vehicle_id == world.waiting_car_id &&
      (!ctrl.last_report_t || response.timestamp > *ctrl.last_report_t)) {
    ctrl.last_report_t = response.timestamp;
    ctrl.latch = ctrl.latch || response.positive;
  }
  ctrl.mode = ctrl.latch && world.gap_ahead_s < safe_gap_s ? Action::OpenGap : Action::Maintain;
  return {ctrl, ctrl.mode};
}

namespace {

double merge_probability(const SimConfig& cfg, bool frustrated, Leader leader, driver::Gender g) {
  if (cfg.merge_override) {
    const auto& m = *cfg.merge_override;
    if (frustrated) return leader == Leader::Hav ? m.frustrated_av : m.frustrated_human;
    return leader == Leader::Hav ? m.calm_av : m.calm_human;
  }
  return cfg.driver.merge_probability(frustrated,
                                      leader == Leader::Hav ? driver::Partner::AV : driver::Partner::Human, g);
}

}  // namespace

HumanDecision human_step(const WorldState& world, const SimConfig& cfg, const Gap& gap,
                         const WaitingCar& car, Rng& rng) {
  HumanDecision d{world, false, 0.0};
  if (world.human != HumanStatus::Waiting || cfg.classify(gap.duration_s) == GapClass::Closed) return d;
  d.probability = merge_probability(cfg, world.frustration.frustrated, gap.leader, car.gender);
  if (rng.bernoulli(d.probability)) {
    d.merged = true;
    d.world.human = HumanStatus::Committing;
    d.world.commit_tick = world.tick;
    d.world.commit_gap = world.next_gap;
  }
  return d;
}

namespace {

class Episode {
 public:
  Episode(const SimConfig& cfg, std::uint64_t seed, bool record)
      : cfg_(cfg), rng_(seed), record_(record) {
    cfg_.check();
    ticks_per_s_ = 1.0 / cfg_.dt;
    std::int64_t t = 0;
    for (const auto& g : cfg_.gaps) {
      boundary_.push_back(t);
      t += ticks(g.duration_s);
    }
    boundary_.push_back(t);
    const auto it = std::find_if(cfg_.gaps.begin(), cfg_.gaps.end(),
                                 [](const Gap& g) { return g.leader == Leader::Hav; });
    ego_ = it == cfg_.gaps.end() ? std::nullopt
                                 : std::optional<std::size_t>(static_cast<std::size_t>(it - cfg_.gaps.begin()));
    start_ticks_ = ticks(cfg_.start_delay_s);
    delay_ticks_ = ticks(cfg_.sensor.delay_s);
    period_ticks_ = std::max<std::int64_t>(1, ticks(cfg_.sensor.period_s));
    phase_ticks_ = ticks(cfg_.sensor.phase_s);
    if (ego_) {
      const auto e = static_cast<std::int64_t>(*ego_);
      const auto first = static_cast<std::size_t>(std::max<std::int64_t>(0, e - cfg_.check_ahead_gaps + 1));
      window_lo_ = boundary_[first] + start_ticks_;
      window_hi_ = boundary_[*ego_] + start_ticks_;
      world_.gap_ahead_s = cfg_.gaps[*ego_].duration_s;
    }
    world_.dt = cfg_.dt;
    world_.waiting_car_id = -1;
    arrive(0, 0);
  }

  EpisodeLog run() {
    const std::int64_t end = boundary_.back() + start_ticks_ + 1;
    for (world_.tick = 0; world_.tick <= end; ++world_.tick) {
      sense_tick();
      control_tick();
      if (crossing_tick() || boundary_tick()) break;
    }
    if (!done_) finish(Outcome::SafePass);
    return std::move(log_);
  }

 private:
  std::int64_t ticks(double s) const { return std::llround(s * ticks_per_s_); }
  double seconds(std::int64_t tk) const { return static_cast<double>(tk) * cfg_.dt; }

  void emit(std::int64_t tick, const char* kind, nlohmann::json detail) {
    if (record_) log_.events.push_back({seconds(tick), kind, std::move(detail)});
  }

  void arrive(int car, std::size_t first_gap) {
    world_.waiting_car_id = car;
    world_.human = HumanStatus::Waiting;
    world_.car_first_gap = first_gap;
    const int onset = cfg_.onset.sample(rng_);
    world_.frustration = sensor::FrustrationProcess::start(onset);
    world_.frustrated_since.reset();
    if (world_.frustration.frustrated) world_.frustrated_since = world_.tick;
    world_.vehicles[car] = {cfg_.cars[car].instrumented, std::nullopt};
    stream_.emplace(cfg_.sensor);
    replay_next_ = 0;
    emit(world_.tick, "arrival", {{"vehicle", car}, {"onset_gap", onset}});
    if (world_.frustration.frustrated) emit(world_.tick, "frustrated", {{"vehicle", car}});
  }

  bool frustrated_at(std::int64_t tk) const {
    return world_.frustrated_since && tk >= *world_.frustrated_since;
  }

  void sense_tick() {
    if (world_.waiting_car_id < 0) return;
    const int car = world_.waiting_car_id;
    auto& vs = world_.vehicles[car];
    if (!vs.instrumented) return;
    if (car == 0 && cfg_.replay) {
      const auto& rs = *cfg_.replay;
      while (replay_next_ < rs.size() && ticks(rs[replay_next_].t) <= world_.tick) {
        vs.latest = rs[replay_next_++];
        emit(world_.tick, "report", {{"vehicle", car}, {"positive", vs.latest->positive}, {"replayed", true}});
      }
      return;
    }
    if (world_.tick < phase_ticks_ || (world_.tick - phase_ticks_) % period_ticks_ != 0) return;
    // The car's state before it started waiting counts as calm.
    const bool state = frustrated_at(world_.tick - delay_ticks_);
    const bool positive = stream_->report(state, rng_);
    vs.latest = sensor::SensorReport{world_.t(), positive};
    emit(world_.tick, "report", {{"vehicle", car}, {"positive", positive}, {"observed_state", state}});
  }

  void control_tick() {
    if (!cfg_.controller || !ego_ || opened_ || world_.waiting_car_id < 0) return;
    if (world_.tick < window_lo_ || world_.tick > window_hi_) return;
    const auto msg = query_driver_state(world_, world_.waiting_car_id);
    const bool was = ctrl_.latch;
    auto [next, action] = tactical_step(ctrl_, msg, world_, cfg_.safe_gap_s);
    ctrl_ = next;
    if (ctrl_.latch != was) emit(world_.tick, "latch", {{"vehicle", world_.waiting_car_id}});
    if (action == Action::OpenGap) {
      opened_ = true;
      open_tick_ = world_.tick;
      emit(world_.tick, "open_gap",
           {{"gap", *ego_}, {"deadline_t", seconds(window_hi_)},
            {"maneuver_time_s", seconds(window_hi_ - world_.tick)}});
    }
  }

  double ego_gap_at(std::int64_t tk) const {
    const double g0 = cfg_.gaps[*ego_].duration_s;
    if (!opened_ || tk < open_tick_) return g0;
    const double span = static_cast<double>(window_hi_ - open_tick_);
    const double frac = span <= 0 ? 1.0 : std::min(1.0, static_cast<double>(tk - open_tick_) / span);
    return std::max(g0, g0 + (cfg_.safe_gap_s - g0) * frac);
  }

  bool crossing_tick() {
    if (ego_) world_.gap_ahead_s = ego_gap_at(world_.tick);
    if (world_.human != HumanStatus::Committing || world_.tick != world_.commit_tick + start_ticks_) return false;
    const auto g = world_.commit_gap;
    const bool is_ego = ego_ && g == *ego_;
    const double width = is_ego ? ego_gap_at(world_.tick) : cfg_.gaps[g].duration_s;
    const auto cls = cfg_.classify(width);
    const bool counted = cfg_.gaps[g].leader == Leader::Hav || cfg_.count_manual_encounters;
    world_.human = HumanStatus::Crossed;
    emit(world_.tick, "crossing",
         {{"vehicle", world_.waiting_car_id}, {"gap", g}, {"gap_s", width}, {"class", to_string(cls)}});
    if (cls == GapClass::Short && counted) {
      finish(Outcome::CloseEncounter);
      return true;
    }
    if (is_ego) {
      finish(Outcome::SafePass);
      return true;
    }
    const int next = world_.waiting_car_id + 1;
    if (static_cast<std::size_t>(next) < cfg_.cars.size()) {
      // The gap under way is only partially available to the next car.
      arrive(next, world_.next_gap);
    } else {
      world_.waiting_car_id = -1;
    }
    return false;
  }

  bool boundary_tick() {
    while (world_.next_gap < cfg_.gaps.size() && boundary_[world_.next_gap] == world_.tick) {
      const auto g = world_.next_gap;
      // The previous gap went by without this car taking it.
      if (world_.human == HumanStatus::Waiting && world_.waiting_car_id >= 0 && g > world_.car_first_gap) {
        const bool was = world_.frustration.frustrated;
        world_.frustration = sensor::advance_frustration(world_.frustration);
        if (!was && world_.frustration.frustrated) {
          world_.frustrated_since = world_.tick;
          emit(world_.tick, "frustrated", {{"vehicle", world_.waiting_car_id}});
        }
      }
      if (world_.human == HumanStatus::Waiting && world_.waiting_car_id >= 0) {
        const auto cls = cfg_.classify(cfg_.gaps[g].duration_s);
        if (cls != GapClass::Closed) {
          auto d = human_step(world_, cfg_, cfg_.gaps[g], cfg_.cars[world_.waiting_car_id], rng_);
          world_ = std::move(d.world);
          emit(world_.tick, "decision",
               {{"vehicle", world_.waiting_car_id}, {"gap", g}, {"merge", d.merged},
                {"probability", d.probability}, {"frustrated", world_.frustration.frustrated}});
        }
      }
      const bool waiting = world_.human == HumanStatus::Waiting && world_.waiting_car_id >= 0;
      ++world_.next_gap;
      if (ego_ && g == *ego_ && waiting) {
        emit(world_.tick, "ego_pass", {{"gap", g}});
        finish(Outcome::HumanYielded);
        return true;
      }
    }
    return false;
  }

  void finish(Outcome o) {
    done_ = true;
    log_.outcome = o;
    emit(world_.tick, "outcome", {{"outcome", to_string(o)}});
  }

  SimConfig cfg_;
  Rng rng_;
  bool record_;
  double ticks_per_s_ = 10.0;
  std::vector<std::int64_t> boundary_;
  std::optional<std::size_t> ego_;
  std::int64_t start_ticks_ = 0, delay_ticks_ = 0, period_ticks_ = 1, phase_ticks_ = 0;
  std::int64_t window_lo_ = 0, window_hi_ = -1;
  WorldState world_;
  ControllerState ctrl_;
  std::optional<sensor::SensorStream> stream_;
  std::size_t replay_next_ = 0;
  bool opened_ = false;
  std::int64_t open_tick_ = 0;
  bool done_ = false;
  EpisodeLog log_;
};

}  // namespace

EpisodeLog run_episode(const SimConfig& cfg, std::uint64_t seed) { return Episode(cfg, seed, true).run(); }

Outcome run_episode_outcome(const SimConfig& cfg, std::uint64_t seed) {
  return Episode(cfg, seed, false).run().outcome;
}

void write_log_jsonl(std::ostream& out, const EpisodeLog& log) {
  for (const auto& e : log.events) {
    nlohmann::json j{{"t", e.t}, {"kind", e.kind}};
    for (const auto& [k, v] : e.detail.items()) j[k] = v;
    out << j.dump() << '\n';
  }
}

Interval wilson_interval(std::size_t k, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z / (1 + z2 / nn) * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn));
  return {k == 0 ? 0.0 : std::max(0.0, centre - half), k == n ? 1.0 : std::min(1.0, centre + half)};
}

RiskEstimate monte_carlo_risk(const SimConfig& cfg, std::size_t n, std::uint64_t master_seed) {
  if (n == 0) throw std::invalid_argument("monte_carlo_risk needs at least one episode");
  RiskEstimate r;
  r.n = n;
  for (std::size_t i = 0; i < n; ++i)
    r.close_encounters += run_episode_outcome(cfg, derive_seed(master_seed, i)) == Outcome::CloseEncounter;
  r.estimate = static_cast<double>(r.close_encounters) / static_cast<double>(n);
  const auto ci = wilson_interval(r.close_encounters, n, 1.959963984540054);
  r.ci_low = ci.low;
  r.ci_high = ci.high;
  return r;
}

nlohmann::json estimate_to_json(const RiskEstimate& e) {
  return {{"estimate", e.estimate},
          {"ci95_low", e.ci_low},
          {"ci95_high", e.ci_high},
          {"episodes", e.n},
          {"close_encounters", e.close_encounters}};
}

}  // namespace mixtraffic::sim
