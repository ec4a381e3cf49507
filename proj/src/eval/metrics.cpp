#include "mixtraffic/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mixtraffic::eval {

RocCurve roc(std::span<const ScoredLabel> data) {
  std::size_t pos = 0;
  for (const auto& d : data) {
    if (!std::isfinite(d.score) || d.score < 0.0 || d.score > 1.0)
      throw std::invalid_argument("scores must be finite and lie in [0,1]");
    pos += d.label;
  }
  const std::size_t neg = data.size() - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("degenerate labels");

  std::vector<ScoredLabel> sorted(data.begin(), data.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double s = sorted[i].score;
    for (; i < sorted.size() && sorted[i].score == s; ++i) (sorted[i].label ? tp : fp)++;
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos)});
  }
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

ThresholdMetrics threshold_metrics(std::span<const ScoredLabel> data, double threshold) {
  if (data.empty()) throw std::invalid_argument("threshold_metrics needs data");
  std::size_t correct = 0, pos = 0, neg = 0, fn = 0, fp = 0;
  for (const auto& d : data) {
    const bool predicted = d.score >= threshold;
    correct += predicted == d.label;
    if (d.label) {
      ++pos;
      fn += !predicted;
    } else {
      ++neg;
      fp += predicted;
    }
  }
  ThresholdMetrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  if (pos) m.fnr = static_cast<double>(fn) / static_cast<double>(pos);
  if (neg) m.fpr = static_cast<double>(fp) / static_cast<double>(neg);
  return m;
}

std::vector<std::vector<std::size_t>> make_folds(const std::vector<driver::MergingRecord>& records,
                                                 std::size_t k, bool stratified, Rng& rng) {
  if (k < 2) throw std::invalid_argument("cross-validation needs at least two folds");
  if (k > records.size()) throw std::invalid_argument("too few records");
  std::vector<std::size_t> order;
  if (stratified) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < records.size(); ++i) (records[i].merged ? pos : neg).push_back(i);
    rng.shuffle(std::span(pos));
    rng.shuffle(std::span(neg));
    order = std::move(pos);
    order.insert(order.end(), neg.begin(), neg.end());
  } else {
    order.resize(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span(order));
  }
  // Round-robin dealing keeps sizes within one and spreads strata evenly.
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < order.size(); ++i) folds[i % k].push_back(order[i]);
  return folds;
}

namespace {

MetricSummary summarize(const std::vector<double>& xs) {
  MetricSummary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

int cell_of(const driver::MergingRecord& r) {
  return (r.time_limit ? 0 : 4) + static_cast<int>(r.partner) * 2 + static_cast<int>(r.gender);
}

}  // namespace

CvReport cross_validate(const std::vector<driver::MergingRecord>& records,
                        const std::vector<driver::EvidenceMask>& masks, const CvOptions& options) {
  if (options.folds > records.size()) throw std::invalid_argument("too few records");
  if (options.repetitions == 0) throw std::invalid_argument("repetitions must be positive");

  CvReport report;
  report.folds = options.folds;
  report.repetitions = options.repetitions;
  report.masks.resize(masks.size());
  for (std::size_t m = 0; m < masks.size(); ++m) report.masks[m].mask = masks[m];

  for (std::size_t rep = 0; rep < options.repetitions; ++rep) {
    Rng rng(derive_seed(options.seed, rep));
    const auto folds = make_folds(records, options.folds, options.stratified, rng);

    std::vector<std::vector<ScoredLabel>> scored(masks.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<driver::MergingRecord> train;
      train.reserve(records.size() - folds[f].size());
      for (std::size_t g = 0; g < folds.size(); ++g)
        if (g != f)
          for (auto i : folds[g]) train.push_back(records[i]);
      if (train.empty()) throw std::invalid_argument("a fold left no training records");
      const auto model = driver::fit_cpt(train, options.alpha, options.threshold);

      // Eight parent cells, so predictions are cached per cell and mask.
      std::map<std::pair<int, std::size_t>, double> cache;
      for (auto i : folds[f]) {
        const auto& r = records[i];
        for (std::size_t m = 0; m < masks.size(); ++m) {
          auto key = std::pair{cell_of(r), m};
          auto it = cache.find(key);
          if (it == cache.end())
            it = cache.emplace(key, driver::predict_merge(model, r, masks[m]).probability).first;
          scored[m].push_back({it->second, r.merged});
        }
      }
    }

    for (std::size_t m = 0; m < masks.size(); ++m) {
      auto& mr = report.masks[m];
      const auto curve = roc(scored[m]);
      mr.auc_per_repetition.push_back(auc(curve));
      const auto tm = threshold_metrics(scored[m], options.threshold);
      mr.accuracy_per_repetition.push_back(tm.accuracy);
      mr.fnr_per_repetition.push_back(tm.fnr);
      if (rep == 0) mr.first_roc = curve;
    }
  }

  for (auto& mr : report.masks) {
    mr.auc = summarize(mr.auc_per_repetition);
    mr.accuracy = summarize(mr.accuracy_per_repetition);
    std::vector<double> fnrs;
    for (const auto& x : mr.fnr_per_repetition)
      if (x) fnrs.push_back(*x);
    mr.fnr = summarize(fnrs);
  }
  return report;
}

nlohmann::json report_to_json(const CvReport& report) {
  nlohmann::json j{{"folds", report.folds}, {"repetitions", report.repetitions}};
  j["models"] = nlohmann::json::array();
  auto summary = [](const MetricSummary& s) {
    return nlohmann::json{{"mean", s.mean}, {"sd", s.sd}, {"n", s.count}};
  };
  for (const auto& m : report.masks) {
    nlohmann::json fnr = nlohmann::json::array();
    for (const auto& x : m.fnr_per_repetition) fnr.push_back(x ? nlohmann::json(*x) : nlohmann::json());
    j["models"].push_back({{"model", m.mask.label()},
                           {"auc", summary(m.auc)},
                           {"accuracy", summary(m.accuracy)},
                           {"fnr", summary(m.fnr)},
                           {"auc_per_repetition", m.auc_per_repetition},
                           {"accuracy_per_repetition", m.accuracy_per_repetition},
                           {"fnr_per_repetition", fnr}});
  }
  return j;
}

void write_report_csv(std::ostream& out, const CvReport& report) {
  auto cell = [](const MetricSummary& s) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(2) << s.mean << " +- " << s.sd;
    return c.str();
  };
  out << "metric";
  for (const auto& m : report.masks) out << ",\"" << m.mask.label() << '"';
  out << '\n';
  const std::pair<const char*, MetricSummary MaskReport::*> rows[] = {
      {"AUC", &MaskReport::auc}, {"Accuracy", &MaskReport::accuracy}, {"FNR", &MaskReport::fnr}};
  for (const auto& [name, field] : rows) {
    out << name;
    for (const auto& m : report.masks) out << ',' << cell(m.*field);
    out << '\n';
  }
}

void write_roc_csv(std::ostream& out, const RocCurve& curve) {
  out << "fpr,tpr\n";
  out << std::setprecision(17);
  for (const auto& p : curve.points) out << p.fpr << ',' << p.tpr << '\n';
}

}  // namespace mixtraffic::eval
