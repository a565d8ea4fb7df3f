#include "fraudlens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "fraudlens/error.hpp"

namespace fraudlens {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double f1_score(double precision, double recall) noexcept {
  const double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

ConfusionMatrix confusion(std::span<const BinaryLabel> predicted, std::span<const BinaryLabel> gold) {
  if (predicted.size() != gold.size()) {
    throw Error(Errc::LengthMismatch, "predictions and gold labels differ in length");
  }
  if (predicted.empty()) throw Error(Errc::EmptyInput, "no labels");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predicted[i] == BinaryLabel::fraud;
    const bool g = gold[i] == BinaryLabel::fraud;
    if (p && g) ++m.tp;
    else if (p) ++m.fp;
    else if (g) ++m.fn;
    else ++m.tn;
  }
  return m;
}

MetricSet derive_metrics(const ConfusionMatrix& m) {
  if (m.total() == 0) throw Error(Errc::EmptyMatrix, "confusion matrix has no observations");
  MetricSet s;
  s.accuracy = ratio(m.tp + m.tn, m.total());
  s.precision = ratio(m.tp, m.tp + m.fp);
  s.recall = ratio(m.tp, m.tp + m.fn);
  s.f1 = f1_score(s.precision, s.recall);
  return s;
}

MetricSet metrics_from_precision_recall(double precision, double recall) {
  MetricSet s;
  s.precision = precision;
  s.recall = recall;
  s.f1 = f1_score(precision, recall);
  return s;
}

ConfusionMatrix aggregate(std::span<const ConfusionMatrix> matrices) {
  if (matrices.empty()) throw Error(Errc::EmptyInput, "nothing to aggregate");
  ConfusionMatrix sum;
  for (const auto& m : matrices) sum += m;
  return sum;
}

double roc_auc(std::span<const double> scores, std::span<const BinaryLabel> gold) {
  if (scores.size() != gold.size()) throw Error(Errc::LengthMismatch, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::uint64_t n_pos = 0;
  for (auto g : gold) n_pos += g == BinaryLabel::fraud ? 1 : 0;
  const std::uint64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(Errc::SingleClassInput, "ROC AUC needs both classes");
  for (double s : scores) {
    if (std::isnan(s)) throw Error(Errc::InvalidArgument, "NaN score");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of average ranks (1-based) of the positives.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (gold[order[k]] == BinaryLabel::fraud) pos_rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(n_pos);
  const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(n_neg));
}

RatingMatrix::RatingMatrix(std::vector<std::vector<std::uint32_t>> counts) : counts_(std::move(counts)) {
  if (counts_.empty()) throw Error(Errc::InvalidMatrix, "rating matrix has no items");
  const std::size_t k = counts_[0].size();
  if (k < 2) throw Error(Errc::InvalidMatrix, "need at least two categories");
  for (const auto& row : counts_) {
    if (row.size() != k) throw Error(Errc::InvalidMatrix, "ragged rating matrix");
  }
  raters_ = std::accumulate(counts_[0].begin(), counts_[0].end(), std::uint32_t{0});
  for (const auto& row : counts_) {
    if (std::accumulate(row.begin(), row.end(), std::uint32_t{0}) != raters_) {
      throw Error(Errc::InvalidMatrix, "rows must sum to the same number of raters");
    }
  }
  if (raters_ < 2) throw Error(Errc::TooFewRaters, "need at least two raters per item");
}

double fleiss_kappa(const RatingMatrix& r) {
  const double n = r.raters();
  const double items = static_cast<double>(r.items());
  std::vector<double> column(r.categories(), 0.0);
  double p_bar = 0.0;
  for (const auto& row : r.rows()) {
    double agree = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double c = row[j];
      agree += c * (c - 1.0);
      column[j] += c;
    }
    p_bar += agree / (n * (n - 1.0));
  }
  p_bar /= items;
  double p_e = 0.0;
  for (double c : column) {
    const double p = c / (items * n);
    p_e += p * p;
  }
  if (p_e >= 1.0) {
    // Every rating fell into one category.
    if (p_bar >= 1.0) return 1.0;
    throw Error(Errc::InvalidMatrix, "chance agreement is 1 without perfect agreement");
  }
  return (p_bar - p_e) / (1.0 - p_e);
}

Reconstruction reconstruct_confusion(const MetricSet& target, std::uint64_t n_pos, std::uint64_t n_neg) {
  if (n_pos == 0 || n_neg == 0) throw Error(Errc::InvalidArgument, "class totals must be positive");
  Reconstruction best;
  bool have = false;
  const std::uint64_t total = n_pos + n_neg;
  for (std::uint64_t tp = 0; tp <= n_pos; ++tp) {
    const double recall = ratio(tp, n_pos);
    const double d_recall = std::abs(recall - target.recall);
    if (have && d_recall >= best.deviation) continue;
    for (std::uint64_t fp = 0; fp <= n_neg; ++fp) {
      double dev = std::max(d_recall, std::abs(ratio(tp, tp + fp) - target.precision));
      if (target.accuracy) {
        dev = std::max(dev, std::abs(ratio(tp + n_neg - fp, total) - *target.accuracy));
      }
      if (!have || dev < best.deviation) {
        best.matrix = {tp, fp, n_pos - tp, n_neg - fp};
        best.deviation = dev;
        have = true;
      }
    }
  }
  return best;
}

double balanced_accuracy(const ConfusionMatrix& m) {
  return (ratio(m.tp, m.tp + m.fn) + ratio(m.tn, m.tn + m.fp)) / 2.0;
}

std::string format_metric(double value) {
  const double scaled = std::floor(value * 10000.0 + 0.5 + 1e-9);
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << scaled / 10000.0;
  return os.str();
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

RenderedReport render_report(const std::vector<ReportRow>& rows) {
  const bool with_accuracy =
      std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.metrics.accuracy.has_value(); });
  const bool with_auc =
      std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.metrics.roc_auc.has_value(); });

  // Value columns are six characters wide ("0.9213"); headers are kept to
  // that width so rows read as plain value runs.
  std::vector<std::string> text_headers = {"Recall", "Prec.", "F1"};
  std::vector<std::string> csv_headers = {"Model", "Recall", "Precision", "F1"};
  if (with_accuracy) {
    text_headers.push_back("Acc.");
    csv_headers.push_back("Accuracy");
  }
  if (with_auc) {
    text_headers.push_back("AUC");
    csv_headers.push_back("ROC AUC");
  }

  auto cell = [](const std::optional<double>& v) { return v ? format_metric(*v) : std::string("-"); };
  std::vector<std::vector<std::string>> values;
  std::size_t name_width = 5;  // "Model"
  for (const auto& r : rows) {
    std::vector<std::string> v = {format_metric(r.metrics.recall), format_metric(r.metrics.precision),
                                  format_metric(r.metrics.f1)};
    if (with_accuracy) v.push_back(cell(r.metrics.accuracy));
    if (with_auc) v.push_back(cell(r.metrics.roc_auc));
    values.push_back(std::move(v));
    name_width = std::max(name_width, r.name.size());
  }

  auto pad = [](std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
  };
  auto line = [&](const std::string& name, const std::vector<std::string>& cols) {
    std::string out = pad(name, name_width);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      out += "  ";
      out += i + 1 < cols.size() ? pad(cols[i], 6) : cols[i];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };

  RenderedReport rep;
  rep.text = line("Model", text_headers);
  for (std::size_t i = 0; i < rows.size(); ++i) rep.text += line(rows[i].name, values[i]);

  auto join = [](const std::vector<std::string>& cols) {
    std::string out;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) out += ',';
      out += cols[i];
    }
    return out + "\n";
  };
  rep.csv = join(csv_headers);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> cols = {csv_field(rows[i].name)};
    for (auto& v : values[i]) cols.push_back(v == "-" ? "" : v);
    rep.csv += join(cols);
  }
  return rep;
}

}  // namespace fraudlens
