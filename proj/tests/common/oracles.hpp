#pragma once

#include <vector>

#include "mixtraffic/bn/network.hpp"
#include "mixtraffic/eval/metrics.hpp"
#include "mixtraffic/random.hpp"

namespace testutil {

// Joint table computed straight from the CPT rows, without the library's
// indexing or ordering.
struct BruteJoint {
  std::vector<mixtraffic::bn::Assignment> assignments;
  std::vector<double> p;
};

inline BruteJoint brute_joint(const mixtraffic::bn::BayesianNetwork& net) {
  const auto& vars = net.variables();
  BruteJoint out;
  mixtraffic::bn::Assignment a(vars.size(), 0);
  while (true) {
    double prob = 1.0;
    for (const auto& cpt : net.cpts()) {
      std::size_t child = 0;
      while (vars[child].name != cpt.child) ++child;
      std::vector<std::size_t> given;
      for (const auto& pn : cpt.parents) {
        std::size_t j = 0;
        while (vars[j].name != pn) ++j;
        given.push_back(a[j]);
      }
      prob *= cpt.rows.at(given)[a[child]];
    }
    out.assignments.push_back(a);
    out.p.push_back(prob);
    std::size_t i = 0;
    for (; i < a.size(); ++i) {
      if (++a[i] < vars[i].states.size()) break;
      a[i] = 0;
    }
    if (i == a.size()) break;
  }
  return out;
}

// Probability that a random positive outscores a random negative, ties 1/2.
inline double pair_count_auc(const std::vector<mixtraffic::eval::ScoredLabel>& d) {
  double concordant = 0.0;
  std::size_t pairs = 0;
  for (const auto& p : d)
    if (p.label)
      for (const auto& n : d)
        if (!n.label) {
          ++pairs;
          concordant += p.score > n.score ? 1.0 : p.score == n.score ? 0.5 : 0.0;
        }
  return concordant / static_cast<double>(pairs);
}

inline std::vector<mixtraffic::eval::ScoredLabel> random_scores(mixtraffic::Rng& rng) {
  const std::size_t n = 2 + rng.below(199);
  const bool coarse = rng.bernoulli(0.5);  // coarse scores produce many ties
  std::vector<mixtraffic::eval::ScoredLabel> d(n);
  for (auto& x : d) {
    x.score = coarse ? static_cast<double>(rng.below(6)) / 5.0 : rng.uniform();
    x.label = rng.bernoulli(0.5);
  }
  d[0].label = true;
  d[1].label = false;
  return d;
}

}  // namespace testutil
