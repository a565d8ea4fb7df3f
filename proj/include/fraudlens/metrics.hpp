#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fraudlens/corpus.hpp"

namespace fraudlens {

/// 2x2 counts with fraud as the positive class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  std::uint64_t positives() const noexcept { return tp + fn; }
  std::uint64_t negatives() const noexcept { return fp + tn; }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// accuracy is optional only because published rows sometimes report
/// precision and recall alone; derive_metrics always fills it.
struct MetricSet {
  std::optional<double> accuracy;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> roc_auc;
};

/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall) noexcept;

ConfusionMatrix confusion(std::span<const BinaryLabel> predicted, std::span<const BinaryLabel> gold);

/// Zero denominators give 0 for precision and recall. roc_auc is left empty.
MetricSet derive_metrics(const ConfusionMatrix& m);

/// Metric row for a published (precision, recall) pair; accuracy is unknown.
MetricSet metrics_from_precision_recall(double precision, double recall);

/// Cell-wise sum, i.e. micro-aggregation.
ConfusionMatrix aggregate(std::span<const ConfusionMatrix> matrices);

/// Probability that a random positive outscores a random negative, ties
/// counted as one half (Mann-Whitney U over average ranks).
double roc_auc(std::span<const double> scores, std::span<const BinaryLabel> gold);

/// Items x categories rating counts; every row sums to the same rater count.
class RatingMatrix {
 public:
  /// Throws InvalidMatrix on ragged rows, negative-free violations, unequal
  /// row sums, or fewer than two categories or items; TooFewRaters if n < 2.
  explicit RatingMatrix(std::vector<std::vector<std::uint32_t>> counts);

  std::size_t items() const noexcept { return counts_.size(); }
  std::size_t categories() const noexcept { return counts_.empty() ? 0 : counts_[0].size(); }
  std::uint32_t raters() const noexcept { return raters_; }
  const std::vector<std::vector<std::uint32_t>>& rows() const noexcept { return counts_; }

 private:
  std::vector<std::vector<std::uint32_t>> counts_;
  std::uint32_t raters_ = 0;
};

double fleiss_kappa(const RatingMatrix& r);

struct Reconstruction {
  ConfusionMatrix matrix;
  // Largest absolute gap over accuracy, precision and recall.
  double deviation = 0.0;
};

/// Brute-force search for the integer matrix with the given class totals
/// whose accuracy, precision and recall are closest (in max-norm) to the
/// target. Ties go to the smallest tp, then the smallest fp. A target without
/// accuracy is matched on precision and recall only.
Reconstruction reconstruct_confusion(const MetricSet& target, std::uint64_t n_pos, std::uint64_t n_neg);

/// (TPR + TNR) / 2, which equals ROC AUC for a hard 0/1 classifier.
double balanced_accuracy(const ConfusionMatrix& m);

/// Half-up rounding to four decimals, formatted with exactly four digits.
std::string format_metric(double value);

struct ReportRow {
  std::string name;
  MetricSet metrics;
};

struct RenderedReport {
  std::string text;
  std::string csv;
};

/// Columns Recall, Precision, F1, then Accuracy and ROC AUC. An optional
/// column is only emitted when at least one row has a value for it.
RenderedReport render_report(const std::vector<ReportRow>& rows);

}  // namespace fraudlens
