#include <doctest.h>

#include <cmath>

#include "mixtraffic/error.hpp"
#include "mixtraffic/game/risk_game.hpp"
#include "../common/game_matrix.hpp"

using namespace mixtraffic;
using namespace mixtraffic::game;

namespace {

std::size_t count_mover(const Game& g, Mover m) {
  std::size_t n = 0;
  for (const auto& node : g.nodes) n += node.mover == m;
  return n;
}

// Onset CDF by direct summation of the binomial law.
double onset_cdf(int stage, const sensor::OnsetLaw& law) {
  const auto pmf = law.pmf();
  double acc = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k)
    if (law.offset + static_cast<int>(k) <= stage) acc += pmf[k];
  return acc;
}

}  // namespace

TEST_CASE("uncontrolled worst case is the frustrated acceptance rate") {
  const auto g = build_game(GameParams{});
  const auto r = worst_case_risk(g, Strategy::uncontrolled());
  CHECK(std::abs(r.value - 0.97) < 1e-9);
  CHECK(r.witness.arrival);
  CHECK(r.witness.leader == Leader::Hav);
  CHECK(r.witness.gap == EgoGap::Short);
  CHECK(r.witness.arrival_stage == 12);  // first stage with certain frustration

  // Below the onset support the value follows the onset CDF.
  GameParams p;
  p.horizon = 10;
  const auto short_h = worst_case_risk(build_game(p), Strategy::uncontrolled());
  CHECK(std::abs(short_h.value - 0.97 * onset_cdf(9, p.onset)) < 1e-12);
}

TEST_CASE("latch controller reduces the default risk") {
  const auto g = build_game(GameParams{});
  const double u = worst_case_risk(g, Strategy::uncontrolled()).value;
  const double l = worst_case_risk(g, Strategy::latch()).value;
  CHECK(l < u);
  CHECK(u / l >= 2.0);
  CHECK(u / l <= 5.0);
}

TEST_CASE("perfect and zero information limits") {
  GameParams p;
  p.sensitivity = 1.0;
  p.obs_delay_stages = 0;
  CHECK(std::abs(worst_case_risk(build_game(p), Strategy::latch()).value) < 1e-12);

  for (auto noise : {sensor::NoiseModel::PerInterval, sensor::NoiseModel::Independent}) {
    GameParams z;
    z.noise = noise;
    z.sensitivity = 0.0;
    const auto g = build_game(z);
    CHECK(std::abs(worst_case_risk(g, Strategy::latch()).value - worst_case_risk(g, Strategy::uncontrolled()).value) <
          1e-12);
  }
}

TEST_CASE("adversary dominance and witness re-evaluation") {
  for (const auto& entry : testutil::game_matrix()) {
    CAPTURE(entry.name);
    const auto g = build_game(entry.params);
    for (const auto& s : {Strategy::uncontrolled(), Strategy::latch()}) {
      const auto r = worst_case_risk(g, s);
      CHECK(r.value >= 0.0);
      CHECK(r.value <= 1.0);
      for (double v : r.choice_values) CHECK(v <= r.value);
      CHECK(std::abs(evaluate_fixed_plan(g, s, r.witness) - r.value) < 1e-12);
    }
  }
}

TEST_CASE("optimality chain on the matrix") {
  for (const auto& entry : testutil::game_matrix()) {
    CAPTURE(entry.name);
    const auto g = build_game(entry.params);
    const double u = worst_case_risk(g, Strategy::uncontrolled()).value;
    const double l = worst_case_risk(g, Strategy::latch()).value;
    const auto opt = synthesize(g, 1.0);
    CHECK(opt.feasible);
    CHECK(opt.value <= l + 1e-12);
    CHECK(l < u);
    CHECK(std::abs(worst_case_risk(g, opt.strategy).value - opt.value) < 1e-12);
  }
}

TEST_CASE("delay pipeline composition") {
  for (auto noise : {sensor::NoiseModel::PerInterval, sensor::NoiseModel::Independent}) {
    for (const auto& [split, whole] :
         std::vector<std::pair<std::vector<int>, int>>{{{1, 1}, 2}, {{1, 2}, 3}, {{2, 1}, 3}, {{1, 1, 1}, 3}}) {
      GameParams a;
      a.noise = noise;
      a.horizon = 14;
      a.delay_segments = split;
      GameParams b = a;
      b.delay_segments.clear();
      b.obs_delay_stages = whole;
      const auto ga = build_game(a), gb = build_game(b);
      CHECK(ga.delay == gb.delay);
      for (const auto& s : {Strategy::uncontrolled(), Strategy::latch()})
        CHECK(std::abs(worst_case_risk(ga, s).value - worst_case_risk(gb, s).value) < 1e-12);
    }
  }
  // A zero-length pipeline is the undelayed game, node for node.
  GameParams a;
  a.obs_delay_stages = 0;
  GameParams b = a;
  b.delay_segments = {0, 0};
  const auto ga = build_game(a), gb = build_game(b);
  CHECK(ga.nodes.size() == gb.nodes.size());
  CHECK(ga.edge_count == gb.edge_count);
}

TEST_CASE("stage mapping of the delays") {
  GameParams p;
  CHECK(p.delay_stages() == 1);  // 6 s -> 2 stages, 2 s -> 1 stage
  p.sensor_delay_s = 9.0;
  CHECK(p.delay_stages() == 2);
  p.obs_delay_stages = 0;
  CHECK(p.delay_stages() == 0);
}

TEST_CASE("minimal instance") {
  GameParams p;
  p.horizon = 1;
  p.obs_delay_stages = 0;
  p.sensitivity = p.specificity = 1.0;
  p.onset = {0, 0, 0.5};
  const auto g = build_game(p);
  CHECK(count_mover(g, Mover::Adversary) == 1);
  CHECK(count_mover(g, Mover::Controller) >= 1);
  CHECK(count_mover(g, Mover::Chance) >= 1);
  CHECK(worst_case_risk(g, Strategy::uncontrolled()).value == doctest::Approx(0.97));
  CHECK(worst_case_risk(g, Strategy::latch()).value == 0.0);
  for (const auto& n : g.nodes)
    for (int c : n.children) CHECK(c < static_cast<int>(&n - g.nodes.data()));
}

TEST_CASE("node cap") {
  GameParams p;
  p.node_cap = 100;
  CHECK_THROWS_WITH_AS(build_game(p), "horizon too large", std::length_error);
}

TEST_CASE("synthesis") {
  GameParams p;
  const auto g = build_game(p);
  const auto s = synthesize(g, 1.0);
  CHECK(s.feasible);
  CHECK(s.value == 0.0);

  // Without information the optimum opens unconditionally before the merge.
  GameParams blind = p;
  blind.sensitivity = 0.0;
  const auto b = synthesize(build_game(blind), 0.0);
  CHECK(b.feasible);
  CHECK(b.value == 0.0);
  CHECK(b.strategy.decide({true, GapClass::Short, 0}) == Action::OpenGap);
  CHECK(b.strategy.decide({false, GapClass::Short, 0}) == Action::OpenGap);

  // Removing open_gap leaves only the uncontrolled value.
  GameParams weak = p;
  weak.allow_open_gap = false;
  const auto gw = build_game(weak);
  const auto w = synthesize(gw, 0.0);
  CHECK_FALSE(w.feasible);
  CHECK(std::abs(w.value - 0.97) < 1e-9);
  CHECK(s.value <= w.value);

  // Manual-led short gaps are beyond the ego's control.
  GameParams manual = p;
  manual.count_manual_encounters = true;
  const auto m = synthesize(build_game(manual), 0.0);
  CHECK_FALSE(m.feasible);
  CHECK(std::abs(m.value - 0.37) < 1e-12);
}

TEST_CASE("strategy tables") {
  const auto g = build_game(GameParams{});
  const auto partial = Strategy::table({{{true, 0}, Action::OpenGap}});
  CHECK_THROWS_AS(worst_case_risk(g, partial), std::invalid_argument);

  std::map<std::pair<bool, int>, Action> latchlike;
  for (int k = 0; k < 6; ++k) {
    latchlike[{true, k}] = Action::OpenGap;
    latchlike[{false, k}] = Action::Maintain;
  }
  const auto t = Strategy::table(latchlike);
  CHECK(std::abs(worst_case_risk(g, t).value - worst_case_risk(g, Strategy::latch()).value) < 1e-12);
  const auto back = strategy_from_json(strategy_to_json(t));
  CHECK(strategy_to_json(back) == strategy_to_json(t));
  CHECK(strategy_from_json("latch").kind() == Strategy::Kind::Latch);
  CHECK_THROWS_AS(strategy_from_json("aggressive"), ConfigError);
}

TEST_CASE("risk curves") {
  const GameParams p;
  const auto sens = risk_curve(p, CurveParameter::Sensitivity, {0.0, 0.5, 0.78, 0.9, 1.0});
  for (std::size_t i = 1; i < sens.size(); ++i) CHECK(sens[i].value <= sens[i - 1].value + 1e-12);

  const auto delay = risk_curve(p, CurveParameter::Delay, {0, 1, 2, 3});
  for (std::size_t i = 1; i < delay.size(); ++i) CHECK(delay[0].value <= delay[i].value + 1e-12);

  GameParams calm = p;
  calm.p_calm = 0.0;
  for (const auto& s : {Strategy::uncontrolled(), Strategy::latch()}) {
    const auto far = risk_curve(calm, CurveParameter::OnsetMean, {40.0}, s);
    CHECK(far[0].value == 0.0);
  }
  CHECK_THROWS_AS(risk_curve(p, CurveParameter::Delay, {}), std::invalid_argument);
}

TEST_CASE("parameters json") {
  const GameParams p;
  const auto back = game_params_from_json(game_params_to_json(p));
  CHECK(game_params_to_json(back) == game_params_to_json(p));
  CHECK_THROWS_AS(game_params_from_json({{"horizn", 3}}), ConfigError);
  CHECK_THROWS_AS(game_params_from_json({{"sensitivity", 2.0}}), ConfigError);
  CHECK_THROWS_AS(game_params_from_json({{"actions", {"open_gap"}}}), ConfigError);
  CHECK_FALSE(game_params_from_json({{"actions", {"maintain"}}}).allow_open_gap);
}

TEST_CASE("witness export simulates the scenario") {
  GameParams p;
  p.horizon = 12;
  const auto g = build_game(p);
  for (const auto& s : {Strategy::uncontrolled(), Strategy::latch()}) {
    const auto r = worst_case_risk(g, s);
    const auto cfg = witness_config(p, r.witness, s.kind() == Strategy::Kind::Latch);
    const auto reparsed = sim::sim_config_from_json(sim::sim_config_to_json(cfg));
    CHECK(sim::sim_config_to_json(reparsed) == sim::sim_config_to_json(cfg));
    const std::size_t n = 20000;
    const auto est = sim::monte_carlo_risk(cfg, n, 99);
    const double sigma = std::sqrt(r.value * (1 - r.value) / n);
    CHECK(std::abs(est.estimate - r.value) < 4 * sigma);
  }
}
