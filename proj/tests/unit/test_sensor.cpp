#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "mixtraffic/error.hpp"
#include "mixtraffic/sensor/channel.hpp"

using namespace mixtraffic;
using namespace mixtraffic::sensor;

TEST_CASE("onset law moments") {
  const OnsetLaw law;
  const auto pmf = law.pmf();
  REQUIRE(pmf.size() == 9);
  CHECK(std::accumulate(pmf.begin(), pmf.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pmf[4] == doctest::Approx(70.0 / 256.0).epsilon(1e-12));
  double mean = 0.0, second = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    const double x = law.offset + static_cast<double>(k);
    mean += pmf[k] * x;
    second += pmf[k] * x * x;
  }
  CHECK(mean == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(second - mean * mean == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(law.mean() == 8.0);
  CHECK(law.variance() == 2.0);

  Rng rng(123);
  const int n = 100000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const int x = law.sample(rng);
    CHECK_UNARY(x >= 4);
    CHECK_UNARY(x <= 12);
    s += x;
    ss += static_cast<double>(x) * x;
  }
  const double m = s / n;
  CHECK(std::abs(m - 8.0) < 0.05);
  CHECK(std::abs((ss - n * m * m) / (n - 1) - 2.0) < 0.1);
}

TEST_CASE("frustration sets in after the onset count and persists") {
  auto p = FrustrationProcess::start(3);
  CHECK_FALSE(p.frustrated);
  p = advance_frustration(p);
  p = advance_frustration(p);
  CHECK_FALSE(p.frustrated);
  p = advance_frustration(p);
  CHECK(p.frustrated);
  for (int i = 0; i < 5; ++i) {
    p = advance_frustration(p);
    CHECK(p.frustrated);
  }
  CHECK(FrustrationProcess::start(0).frustrated);
}

TEST_CASE("independent channel confusion rates") {
  SensorChannel chan;
  Rng rng(9);
  const int n = 100000;
  const FrustrationTrajectory always{0.0}, never{};
  int tp = 0, tn = 0;
  for (int i = 0; i < n; ++i) {
    tp += sense(chan, always, 100.0, rng).positive;
    tn += !sense(chan, never, 100.0, rng).positive;
  }
  const double sigma = std::sqrt(0.78 * 0.22 / n);
  CHECK(std::abs(static_cast<double>(tp) / n - 0.78) < 4 * sigma);
  CHECK(std::abs(static_cast<double>(tn) / n - 0.78) < 4 * sigma);
}

TEST_CASE("noiseless channel reports the shifted trajectory") {
  SensorChannel chan;
  chan.sensitivity = chan.specificity = 1.0;
  chan.delay_s = 6.0;
  chan.period_s = 0.5;
  const FrustrationTrajectory traj{10.0};
  Rng rng(1);
  const auto reports = report_stream(chan, traj, 30.0, rng);
  REQUIRE(reports.size() == 60);
  for (const auto& r : reports) CHECK(r.positive == traj.at(r.t - 6.0));
  CHECK_FALSE(sense(chan, traj, 15.5, rng).positive);
  CHECK(sense(chan, traj, 16.0, rng).positive);
}

TEST_CASE("per-interval noise repeats one verdict per interval") {
  SensorChannel chan;
  chan.noise = NoiseModel::PerInterval;
  chan.delay_s = 0.0;
  Rng rng(31);
  int first_pos = 0, second_pos = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto reports = report_stream(chan, FrustrationTrajectory{5.0}, 10.0, rng);
    for (std::size_t k = 1; k < reports.size(); ++k)
      if ((reports[k].t < 5.0) == (reports[k - 1].t < 5.0)) CHECK(reports[k].positive == reports[k - 1].positive);
    first_pos += reports.front().positive;
    second_pos += reports.back().positive;
  }
  const double sigma = std::sqrt(0.78 * 0.22 / n);
  CHECK(std::abs(static_cast<double>(n - first_pos) / n - 0.78) < 4 * sigma);
  CHECK(std::abs(static_cast<double>(second_pos) / n - 0.78) < 4 * sigma);
}

TEST_CASE("channel config validation") {
  SensorChannel c;
  c.sensitivity = 1.2;
  CHECK_THROWS_AS(c.check(), ConfigError);
  CHECK_THROWS_AS(channel_from_json({{"sensitivty", 0.5}}), ConfigError);
  CHECK_THROWS_AS(channel_from_json({{"noise", "pink"}}), ConfigError);
  const auto back = channel_from_json(channel_to_json(SensorChannel{}));
  CHECK(channel_to_json(back) == channel_to_json(SensorChannel{}));
}

TEST_CASE("replay csv") {
  const std::vector<SensorReport> reports{{0.0, false}, {1.0, true}, {2.5, false}};
  std::stringstream s;
  write_reports_csv(s, reports);
  CHECK(read_reports_csv(s) == reports);
  std::stringstream out_of_order("t,positive\n1,0\n0.5,1\n");
  CHECK_THROWS_AS(read_reports_csv(out_of_order), ConfigError);
  std::stringstream bad_value("t,positive\n1,maybe\n");
  CHECK_THROWS_AS(read_reports_csv(bad_value), ConfigError);
  std::stringstream words("t,positive\n1,true\n2,f\n");
  const auto parsed = read_reports_csv(words);
  CHECK(parsed[0].positive);
  CHECK_FALSE(parsed[1].positive);
}
