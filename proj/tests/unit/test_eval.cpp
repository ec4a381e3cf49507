#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "mixtraffic/eval/metrics.hpp"
#include "../common/oracles.hpp"

using namespace mixtraffic;
using namespace mixtraffic::eval;

using testutil::pair_count_auc;
using testutil::random_scores;

TEST_CASE("trapezoidal AUC equals pair counting") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = random_scores(rng);
    CHECK(std::abs(auc(roc(d)) - pair_count_auc(d)) < 1e-12);
  }
}

TEST_CASE("roc curve shape") {
  const std::vector<ScoredLabel> d{{0.9, true}, {0.8, false}, {0.7, true}, {0.1, false}};
  const auto c = roc(d);
  REQUIRE(c.points.size() == 5);
  CHECK(c.points.front().fpr == 0.0);
  CHECK(c.points.back().tpr == 1.0);
  CHECK(auc(c) == doctest::Approx(0.75));
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    CHECK(c.points[i].fpr >= c.points[i - 1].fpr);
    CHECK(c.points[i].tpr >= c.points[i - 1].tpr);
  }
  const std::vector<ScoredLabel> perfect{{0.9, true}, {0.2, false}};
  CHECK(auc(roc(perfect)) == 1.0);
  const std::vector<ScoredLabel> one_class{{0.9, true}, {0.2, true}};
  CHECK_THROWS_WITH_AS(roc(one_class), "degenerate labels", std::invalid_argument);
}

TEST_CASE("threshold metrics") {
  const std::vector<ScoredLabel> d{{0.9, true}, {0.4, true}, {0.5, false}, {0.1, false}, {0.5, true}};
  const auto m = threshold_metrics(d, 0.5);
  CHECK(m.accuracy == doctest::Approx(3.0 / 5.0));
  CHECK(*m.fnr == doctest::Approx(1.0 / 3.0));
  CHECK(*m.fpr == doctest::Approx(0.5));
  const std::vector<ScoredLabel> negatives{{0.9, false}, {0.1, false}};
  CHECK_FALSE(threshold_metrics(negatives).fnr.has_value());
}

TEST_CASE("folds partition the records evenly") {
  Rng rng(4);
  const auto data = driver::generate_dataset(driver::build_default_model(), 103, rng);
  for (bool stratified : {false, true}) {
    Rng frng(9);
    const auto folds = make_folds(data, 10, stratified, frng);
    REQUIRE(folds.size() == 10);
    std::set<std::size_t> seen;
    std::size_t lo = data.size(), hi = 0;
    for (const auto& f : folds) {
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
      seen.insert(f.begin(), f.end());
    }
    CHECK(hi - lo <= 1);
    CHECK(seen.size() == data.size());
  }
  Rng frng(1);
  CHECK_THROWS_WITH_AS(make_folds(std::vector<driver::MergingRecord>(3), 10, false, frng), "too few records",
                       std::invalid_argument);
}

TEST_CASE("cross validation is deterministic and orders the masks") {
  Rng rng(77);
  const auto data = driver::generate_dataset(driver::build_default_model(), 2000, rng);
  const std::vector<driver::EvidenceMask> masks{driver::EvidenceMask::full(), {false, true, true},
                                                {true, false, true}, {true, true, false}};
  CvOptions opt;
  opt.seed = 3;
  opt.repetitions = 3;
  const auto a = cross_validate(data, masks, opt);
  const auto b = cross_validate(data, masks, opt);
  CHECK(report_to_json(a) == report_to_json(b));
  REQUIRE(a.masks.size() == 4);
  for (const auto& m : a.masks) {
    CHECK(m.auc_per_repetition.size() == 3);
    CHECK(m.auc.mean > 0.5);
    CHECK(m.auc.mean <= 1.0);
  }
  for (std::size_t i : {0u, 2u, 3u}) CHECK(a.masks[i].auc.mean > a.masks[1].auc.mean);
}

TEST_CASE("report csv has the table layout") {
  Rng rng(8);
  const auto data = driver::generate_dataset(driver::build_default_model(), 300, rng);
  CvOptions opt;
  opt.repetitions = 2;
  const auto r = cross_validate(data, {driver::EvidenceMask::full(), {true, true, false}}, opt);
  std::ostringstream s;
  write_report_csv(s, r);
  std::istringstream in(s.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "metric,\"p(M|TL,IP,G)\",\"p(M|TL,IP)\"");
  std::getline(in, line);
  CHECK(line.rfind("AUC,", 0) == 0);
  CHECK(line.find(" +- ") != std::string::npos);
  std::getline(in, line);
  CHECK(line.rfind("Accuracy,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("FNR,", 0) == 0);
}

TEST_CASE("time-limit evidence lowers the miss rate") {
  Rng rng(5);
  const auto data = driver::generate_dataset(driver::build_default_model(), 2000, rng);
  const std::vector<driver::EvidenceMask> masks{driver::EvidenceMask::full(), {false, true, true},
                                                {true, false, true}, {true, true, false}};
  CvOptions opt;
  opt.seed = 12;
  const auto r = cross_validate(data, masks, opt);
  int lower = 0;
  for (std::size_t k = 0; k < opt.repetitions; ++k)
    lower += r.masks[3].fnr_per_repetition[k].value() < r.masks[1].fnr_per_repetition[k].value();
  CHECK(lower >= 8);
  for (std::size_t i : {0u, 2u, 3u}) CHECK(r.masks[i].auc.mean >= r.masks[1].auc.mean + 0.05);
}
