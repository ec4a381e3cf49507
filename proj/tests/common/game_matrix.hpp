#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mixtraffic/game/risk_game.hpp"

namespace testutil {

struct MatrixEntry {
  std::string name;
  mixtraffic::game::GameParams params;
};

// Shared configurations with horizon <= 12 for solver/simulator checks.
inline std::vector<MatrixEntry> game_matrix() {
  using mixtraffic::game::GameParams;
  using mixtraffic::sensor::NoiseModel;
  GameParams base;
  base.horizon = 12;
  std::vector<MatrixEntry> m;
  auto add = [&](std::string name, auto&& edit) {
    GameParams q = base;
    edit(q);
    m.push_back({std::move(name), q});
  };
  add("per-interval d1 h12", [](GameParams&) {});
  add("independent d1 h12", [](GameParams& q) { q.noise = NoiseModel::Independent; });
  add("per-interval d0 sens0.9 h10", [](GameParams& q) {
    q.horizon = 10;
    q.obs_delay_stages = 0;
    q.sensitivity = 0.9;
  });
  add("per-interval d2 c4 h12", [](GameParams& q) {
    q.obs_delay_stages = 2;
    q.check_ahead = 4;
  });
  add("independent d0 sens0.6 spec0.9 c5 h10", [](GameParams& q) {
    q.horizon = 10;
    q.noise = NoiseModel::Independent;
    q.obs_delay_stages = 0;
    q.sensitivity = 0.6;
    q.specificity = 0.9;
    q.check_ahead = 5;
  });
  add("per-interval calm0.1 h12", [](GameParams& q) { q.p_calm = 0.1; });
  add("manual counted h8", [](GameParams& q) {
    q.horizon = 8;
    q.count_manual_encounters = true;
  });
  return m;
}

}  // namespace testutil
