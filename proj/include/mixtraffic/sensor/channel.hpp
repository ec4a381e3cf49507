#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "mixtraffic/random.hpp"

namespace mixtraffic::sensor {

/// Number of passed gaps after which frustration sets in:
/// offset + Binomial(trials, p). The default has mean 8 and variance 2.
struct OnsetLaw {
  int offset = 4;
  int trials = 8;
  double p = 0.5;

  double mean() const { return offset + trials * p; }
  double variance() const { return trials * p * (1.0 - p); }
  /// pmf()[k] = P(onset = offset + k).
  std::vector<double> pmf() const;
  int sample(Rng& rng) const;
};

struct FrustrationProcess {
  int onset_gap = 0;
  int gaps_waited = 0;
  bool frustrated = false;

  static FrustrationProcess start(int onset_gap) {
    return {onset_gap, 0, onset_gap <= 0};
  }
};

/// One gap passed without the driver taking it. Frustration never clears.
FrustrationProcess advance_frustration(FrustrationProcess proc);

/// How report errors are correlated over time.
enum class NoiseModel {
  /// Every report is flipped independently.
  Independent,
  /// One verdict per maximal interval of constant (delayed) true state; all
  /// reports observing that interval repeat it.
  PerInterval,
};

struct SensorChannel {
  double sensitivity = 0.78;  // P(report + | frustrated)
  double specificity = 0.78;  // P(report - | calm)
  double delay_s = 6.0;
  double period_s = 1.0;
  double phase_s = 0.0;  // first report time
  NoiseModel noise = NoiseModel::Independent;

  /// Throws ConfigError on out-of-range parameters.
  void check() const;
};

SensorChannel channel_from_json(const nlohmann::json& doc);
nlohmann::json channel_to_json(const SensorChannel& chan);

/// True frustration state over time: calm before `onset_s`, frustrated from
/// it on (at most one rising edge). No onset means never frustrated.
struct FrustrationTrajectory {
  std::optional<double> onset_s;

  bool at(double t) const { return onset_s && t >= *onset_s; }
};

struct SensorReport {
  double t = 0.0;
  bool positive = false;
  bool operator==(const SensorReport&) const = default;
};

/// Reports the state at t - delay_s through a binary channel with
/// independent errors (regardless of `chan.noise`).
SensorReport sense(const SensorChannel& chan, const FrustrationTrajectory& history, double t,
                   Rng& rng);

/// Stateful report generator honoring `chan.noise`. The caller supplies the
/// delayed true state; the stream keeps per-interval verdicts.
class SensorStream {
 public:
  explicit SensorStream(SensorChannel chan) : chan_(chan) {}

  bool report(bool delayed_state, Rng& rng);
  const SensorChannel& channel() const { return chan_; }

 private:
  SensorChannel chan_;
  std::optional<bool> interval_state_;
  bool interval_verdict_ = false;
};

/// Reports at phase_s + k * period_s for every such time below horizon_s.
std::vector<SensorReport> report_stream(const SensorChannel& chan,
                                        const FrustrationTrajectory& history, double horizon_s,
                                        Rng& rng);

// Replay file: CSV `t,positive` with positive in {0,1}.
void write_reports_csv(std::ostream& out, const std::vector<SensorReport>& reports);
std::vector<SensorReport> read_reports_csv(std::istream& in);

}  // namespace mixtraffic::sensor
