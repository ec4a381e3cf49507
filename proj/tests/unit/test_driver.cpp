#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mixtraffic/driver/merging_model.hpp"
#include "mixtraffic/error.hpp"

using namespace mixtraffic;
using namespace mixtraffic::driver;

namespace {

// Default merge table, restated here as the oracle: rows (TL, IP, G).
struct Cell {
  bool tl;
  Partner ip;
  Gender g;
  double p;
};
const Cell kTable[] = {
    {true, Partner::AV, Gender::Male, 0.97},     {true, Partner::Human, Gender::Male, 0.37},
    {true, Partner::AV, Gender::Female, 0.80},   {true, Partner::Human, Gender::Female, 0.75},
    {false, Partner::AV, Gender::Male, 0.45},    {false, Partner::Human, Gender::Male, 0.60},
    {false, Partner::AV, Gender::Female, 0.05},  {false, Partner::Human, Gender::Female, 0.45},
};

double prior(const Cell& c) {
  return 0.5 * 0.5 * (c.g == Gender::Female ? 0.59 : 0.41);
}

}  // namespace

TEST_CASE("build_model encodes the default table") {
  const auto model = build_default_model();
  REQUIRE(bn::is_valid(model.network));
  for (const auto& c : kTable) {
    const auto p = predict_merge(model, MergingRecord{c.tl, c.ip, c.g, false}, EvidenceMask::full());
    CHECK(p.probability == doctest::Approx(c.p).epsilon(1e-12));
    CHECK(p.merge == (c.p >= 0.5));
  }
}

TEST_CASE("marginal and partial-evidence posteriors") {
  const auto model = build_default_model();
  double marginal = 0.0;
  for (const auto& c : kTable) marginal += prior(c) * c.p;
  CHECK(marginal == doctest::Approx(0.54735).epsilon(1e-12));
  CHECK(predict_merge(model, bn::Evidence{}).probability == doctest::Approx(marginal).epsilon(1e-12));

  // Gender is marginalized with P(F) = 0.59.
  const auto p = predict_merge(model, {{kTimeLimit, "true"}, {kPartner, "AV"}});
  CHECK(p.probability == doctest::Approx(0.41 * 0.97 + 0.59 * 0.80).epsilon(1e-12));
  CHECK(p.probability == doctest::Approx(0.8697).epsilon(1e-12));
}

TEST_CASE("time pressure reverses the partner preference") {
  const auto params = MergingParams::defaults();
  for (Gender g : {Gender::Male, Gender::Female}) {
    CHECK(params.merge_probability(false, Partner::AV, g) < params.merge_probability(false, Partner::Human, g));
    CHECK(params.merge_probability(true, Partner::AV, g) > params.merge_probability(true, Partner::Human, g));
  }
}

TEST_CASE("predict_merge rejects evidence outside the parents") {
  const auto model = build_default_model();
  CHECK_THROWS_AS(predict_merge(model, {{kMerge, "true"}}), std::invalid_argument);
  CHECK_THROWS_AS(predict_merge(model, {{"speed", "high"}}), std::invalid_argument);
}

TEST_CASE("generated data follows the network") {
  const auto model = build_default_model();
  Rng rng(5);
  CHECK(generate_dataset(model, 0, rng).empty());
  const std::size_t n = 200000;
  const auto data = generate_dataset(model, n, rng);
  REQUIRE(data.size() == n);
  for (const auto& c : kTable) {
    std::size_t in_cell = 0, merged = 0;
    for (const auto& r : data)
      if (r.time_limit == c.tl && r.partner == c.ip && r.gender == c.g) {
        ++in_cell;
        merged += r.merged;
      }
    const double pc = prior(c);
    CHECK(std::abs(static_cast<double>(in_cell) / n - pc) < 4 * std::sqrt(pc * (1 - pc) / n));
    const double freq = static_cast<double>(merged) / static_cast<double>(in_cell);
    CHECK(std::abs(freq - c.p) < 4 * std::sqrt(c.p * (1 - c.p) / static_cast<double>(in_cell)));
  }
}

TEST_CASE("fit_cpt applies the pseudocount") {
  std::vector<MergingRecord> records{
      {true, Partner::AV, Gender::Male, true},
      {true, Partner::AV, Gender::Male, true},
      {true, Partner::AV, Gender::Male, false},
  };
  const auto m1 = fit_cpt(records, 1.0);
  CHECK(m1.params().merge_probability(true, Partner::AV, Gender::Male) == doctest::Approx(3.0 / 5.0));
  // Unobserved cells fall back to 1/2.
  CHECK(m1.params().merge_probability(false, Partner::Human, Gender::Female) == doctest::Approx(0.5));
  CHECK_THROWS_WITH_AS(fit_cpt(records, 0.0), "empty cell", std::domain_error);
  CHECK_THROWS_AS(fit_cpt({}, 1.0), std::invalid_argument);
}

TEST_CASE("fit_cpt recovers the generating table") {
  Rng rng(17);
  const auto data = generate_dataset(build_default_model(), 100000, rng);
  const auto fitted = fit_cpt(data, 1.0).params();
  for (const auto& c : kTable) {
    const double cell_n = 100000 * prior(c);
    CHECK(std::abs(fitted.merge_probability(c.tl, c.ip, c.g) - c.p) < 5 * std::sqrt(c.p * (1 - c.p) / cell_n) + 1e-3);
  }
}

TEST_CASE("evidence masks") {
  CHECK(EvidenceMask::parse("TL,IP").label() == "p(M|TL,IP)");
  CHECK(EvidenceMask::parse("IP+G").label() == "p(M|IP,G)");
  CHECK(EvidenceMask::parse("none").label() == "p(M)");
  CHECK(EvidenceMask::parse("G,TL") == EvidenceMask(true, false, true));
  CHECK_THROWS_AS(EvidenceMask::parse("TL,XX"), ConfigError);
  const MergingRecord r{true, Partner::Human, Gender::Female, true};
  const auto ev = evidence_for(r, EvidenceMask(true, false, true));
  CHECK(ev.size() == 2);
  CHECK(ev.at(kTimeLimit) == "true");
  CHECK(ev.at(kGender) == "F");
}

TEST_CASE("records csv round trip") {
  Rng rng(3);
  const auto data = generate_dataset(build_default_model(), 50, rng);
  std::stringstream s;
  write_records_csv(s, data);
  CHECK(s.str().rfind("tl,ip,g,merged\n", 0) == 0);
  CHECK(read_records_csv(s) == data);
  std::stringstream bad("tl,ip,g,merged\nt,AV,X,f\n");
  CHECK_THROWS_AS(read_records_csv(bad), ConfigError);
}

TEST_CASE("parameter json is strict and round-trips") {
  const auto p = MergingParams::defaults();
  const auto back = params_from_json(params_to_json(p));
  CHECK(params_to_json(back) == params_to_json(p));
  auto doc = params_to_json(p);
  doc["p_shoe_size"] = 0.1;
  CHECK_THROWS_AS(params_from_json(doc), ConfigError);
  doc = params_to_json(p);
  doc["merge"]["t"]["AV"]["M"] = 1.5;
  CHECK_THROWS_AS(params_from_json(doc), ConfigError);
}
