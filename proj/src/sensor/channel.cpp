#include "mixtraffic/sensor/channel.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "mixtraffic/error.hpp"

namespace mixtraffic::sensor {

std::vector<double> OnsetLaw::pmf() const {
  std::vector<double> out(static_cast<std::size_t>(trials) + 1);
  // Binomial coefficients built multiplicatively; trials is small.
  double coeff = 1.0;
  for (int k = 0; k <= trials; ++k) {
    out[k] = coeff * std::pow(p, k) * std::pow(1.0 - p, trials - k);
    coeff = coeff * (trials - k) / (k + 1);
  }
  return out;
}

int OnsetLaw::sample(Rng& rng) const {
  int k = 0;
  for (int i = 0; i < trials; ++i) k += rng.bernoulli(p);
  return offset + k;
}

FrustrationProcess advance_frustration(FrustrationProcess proc) {
  ++proc.gaps_waited;
  proc.frustrated = proc.frustrated || proc.gaps_waited >= proc.onset_gap;
  return proc;
}

void SensorChannel::check() const {
  if (!(sensitivity >= 0.0 && sensitivity <= 1.0)) throw ConfigError("sensitivity must lie in [0,1]");
  if (!(specificity >= 0.0 && specificity <= 1.0)) throw ConfigError("specificity must lie in [0,1]");
  if (!(delay_s >= 0.0)) throw ConfigError("sensor delay must be non-negative");
  if (!(period_s > 0.0)) throw ConfigError("report period must be positive");
  if (!(phase_s >= 0.0)) throw ConfigError("report phase must be non-negative");
}

SensorChannel channel_from_json(const nlohmann::json& doc) {
  SensorChannel c;
  if (!doc.is_object()) throw ConfigError("sensor section must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "sensitivity") c.sensitivity = value.get<double>();
    else if (key == "specificity") c.specificity = value.get<double>();
    else if (key == "delay_s") c.delay_s = value.get<double>();
    else if (key == "period_s") c.period_s = value.get<double>();
    else if (key == "phase_s") c.phase_s = value.get<double>();
    else if (key == "noise") {
      const auto s = value.get<std::string>();
      if (s == "independent") c.noise = NoiseModel::Independent;
      else if (s == "per_interval") c.noise = NoiseModel::PerInterval;
      else throw ConfigError("sensor noise must be 'independent' or 'per_interval'");
    } else {
      throw ConfigError("unknown sensor key '" + key + "'");
    }
  }
  c.check();
  return c;
}

nlohmann::json channel_to_json(const SensorChannel& c) {
  return {{"sensitivity", c.sensitivity},
          {"specificity", c.specificity},
          {"delay_s", c.delay_s},
          {"period_s", c.period_s},
          {"phase_s", c.phase_s},
          {"noise", c.noise == NoiseModel::Independent ? "independent" : "per_interval"}};
}

namespace {

bool draw(const SensorChannel& chan, bool state, Rng& rng) {
  return state ? rng.bernoulli(chan.sensitivity) : !rng.bernoulli(chan.specificity);
}

}  // namespace

SensorReport sense(const SensorChannel& chan, const FrustrationTrajectory& history, double t,
                   Rng& rng) {
  return {t, draw(chan, history.at(t - chan.delay_s), rng)};
}

bool SensorStream::report(bool delayed_state, Rng& rng) {
  if (chan_.noise == NoiseModel::Independent) return draw(chan_, delayed_state, rng);
  if (!interval_state_ || *interval_state_ != delayed_state) {
    interval_state_ = delayed_state;
    interval_verdict_ = draw(chan_, delayed_state, rng);
  }
  return interval_verdict_;
}

std::vector<SensorReport> report_stream(const SensorChannel& chan,
                                        const FrustrationTrajectory& history, double horizon_s,
                                        Rng& rng) {
  chan.check();
  std::vector<SensorReport> out;
  SensorStream stream(chan);
  for (std::size_t k = 0;; ++k) {
    const double t = chan.phase_s + static_cast<double>(k) * chan.period_s;
    if (!(t < horizon_s)) break;
    out.push_back({t, stream.report(history.at(t - chan.delay_s), rng)});
  }
  return out;
}

void write_reports_csv(std::ostream& out, const std::vector<SensorReport>& reports) {
  out << "t,positive\n" << std::setprecision(17);
  for (const auto& r : reports) out << r.t << ',' << (r.positive ? 1 : 0) << '\n';
}

std::vector<SensorReport> read_reports_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "t,positive")
    throw ConfigError("replay file must start with header 't,positive'");
  std::vector<SensorReport> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("replay line " + std::to_string(lineno) + ": expected 't,positive'");
    SensorReport r;
    try {
      std::size_t used = 0;
      r.t = std::stod(line.substr(0, comma), &used);
      if (used != comma) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("replay line " + std::to_string(lineno) + ": bad timestamp");
    }
    const auto v = line.substr(comma + 1);
    if (v == "1" || v == "t" || v == "true") r.positive = true;
    else if (v == "0" || v == "f" || v == "false") r.positive = false;
    else throw ConfigError("replay line " + std::to_string(lineno) + ": positive must be 0/1");
    if (!out.empty() && !(r.t > out.back().t))
      throw ConfigError("replay line " + std::to_string(lineno) + ": timestamps must increase");
    out.push_back(r);
  }
  return out;
}

}  // namespace mixtraffic::sensor
