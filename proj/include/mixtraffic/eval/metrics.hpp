#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "mixtraffic/driver/merging_model.hpp"

namespace mixtraffic::eval {

struct ScoredLabel {
  double score = 0.0;
  bool label = false;  // true = merged
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Starts at (0,0), ends at (1,1); one point per distinct score, descending.
struct RocCurve {
  std::vector<RocPoint> points;
};

/// Throws std::invalid_argument("degenerate labels") unless both classes occur.
RocCurve roc(std::span<const ScoredLabel> data);
/// Trapezoidal area under the curve.
double auc(const RocCurve& curve);

struct ThresholdMetrics {
  double accuracy = 0.0;
  std::optional<double> fnr;  // absent when there are no positives
  std::optional<double> fpr;  // absent when there are no negatives
};

/// Predicts "merge" iff score >= threshold.
ThresholdMetrics threshold_metrics(std::span<const ScoredLabel> data, double threshold = 0.5);

struct CvOptions {
  std::size_t folds = 10;
  std::size_t repetitions = 10;
  double alpha = 1.0;
  double threshold = 0.5;
  bool stratified = false;
  std::uint64_t seed = 0;
};

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation over repetitions
  std::size_t count = 0;
};

struct MaskReport {
  driver::EvidenceMask mask;
  MetricSummary auc;
  MetricSummary accuracy;
  MetricSummary fnr;
  std::vector<double> auc_per_repetition;
  std::vector<double> accuracy_per_repetition;
  std::vector<std::optional<double>> fnr_per_repetition;
  RocCurve first_roc;  // pooled out-of-fold curve of repetition 0
};

struct CvReport {
  std::size_t folds = 0;
  std::size_t repetitions = 0;
  std::vector<MaskReport> masks;
};

/// Assignment of record indices to folds for one repetition. Fold sizes
/// differ by at most one.
std::vector<std::vector<std::size_t>> make_folds(const std::vector<driver::MergingRecord>& records,
                                                 std::size_t k, bool stratified, Rng& rng);

/// Repeated k-fold cross-validation. Each repetition shuffles with a seed
/// derived from `options.seed`, fits the CPTs on k-1 folds and scores the
/// held-out fold under every mask; AUC/accuracy/FNR are computed on the pooled
/// out-of-fold predictions of the repetition.
/// Throws std::invalid_argument("too few records") when k exceeds the record count.
CvReport cross_validate(const std::vector<driver::MergingRecord>& records,
                        const std::vector<driver::EvidenceMask>& masks, const CvOptions& options);

nlohmann::json report_to_json(const CvReport& report);
/// Rows AUC / Accuracy / FNR, one column per mask, cells "mean +- sd".
void write_report_csv(std::ostream& out, const CvReport& report);
void write_roc_csv(std::ostream& out, const RocCurve& curve);

}  // namespace mixtraffic::eval
