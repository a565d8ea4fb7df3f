#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fraudlens/error.hpp"
#include "fraudlens/metrics.hpp"
#include "fraudlens/random.hpp"

using namespace fraudlens;

namespace {

constexpr auto F = BinaryLabel::fraud;
constexpr auto G = BinaryLabel::genuine;

// Pairwise definition: wins plus half the ties over all positive/negative pairs.
double pairwise_auc(const std::vector<double>& s, const std::vector<BinaryLabel>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != F) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != G) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

// Textbook Fleiss formulas, straight from the definitions.
double fleiss_oracle(const std::vector<std::vector<std::uint32_t>>& rows) {
  const double N = static_cast<double>(rows.size());
  const double n = std::accumulate(rows[0].begin(), rows[0].end(), 0.0);
  std::vector<double> p(rows[0].size(), 0.0);
  double P_bar = 0;
  for (const auto& r : rows) {
    double agree = 0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      p[j] += r[j] / (N * n);
      agree += double(r[j]) * (double(r[j]) - 1);
    }
    P_bar += agree / (n * (n - 1)) / N;
  }
  double Pe = 0;
  for (double pj : p) Pe += pj * pj;
  return (P_bar - Pe) / (1 - Pe);
}

}  // namespace

TEST_CASE("confusion") {
  std::vector<BinaryLabel> all_fraud(5, F);
  CHECK(confusion(all_fraud, all_fraud) == ConfusionMatrix{5, 0, 0, 0});
  std::vector<BinaryLabel> gold = {F, F, G, G};
  std::vector<BinaryLabel> none(4, G);
  CHECK(confusion(none, gold) == ConfusionMatrix{0, 0, 2, 2});
  std::vector<BinaryLabel> mixed = {F, G, F, G};
  CHECK(confusion(mixed, gold) == ConfusionMatrix{1, 1, 1, 1});
  CHECK_THROWS_AS(confusion(mixed, all_fraud), Error);
  CHECK_THROWS_AS(confusion({}, {}), Error);
}

TEST_CASE("derive_metrics") {
  auto m = derive_metrics({0, 0, 5, 5});
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK(*m.accuracy == 0.5);
  CHECK_FALSE(m.roc_auc.has_value());
  CHECK_THROWS_AS(derive_metrics({}), Error);

  CHECK(metrics_from_precision_recall(0.9836, 0.1151).f1 == doctest::Approx(0.2061).epsilon(0.00005 / 0.2061));
  CHECK(metrics_from_precision_recall(0.9286, 0.9213).f1 == doctest::Approx(0.9249).epsilon(0.00005 / 0.9249));
  CHECK(f1_score(0, 0) == 0.0);
}

TEST_CASE("aggregate over the existing-filter matrices") {
  const std::vector<ConfusionMatrix> posts = {{8, 0, 9, 5}, {0, 0, 32, 6}, {8, 1, 50, 43}, {0, 0, 32, 6}};
  const auto sum = aggregate(posts);
  CHECK(sum == ConfusionMatrix{16, 1, 123, 60});
  const auto m = derive_metrics(sum);
  CHECK(std::abs(m.recall - 0.1151) <= 0.00005);
  CHECK(format_metric(m.precision) == "0.9412");
  CHECK(format_metric(60.0 / 61.0) == "0.9836");

  const std::vector<ConfusionMatrix> one = {{1, 2, 3, 4}};
  CHECK(aggregate(one) == one[0]);
  const std::vector<ConfusionMatrix> zeros = {{}, {}};
  CHECK(aggregate(zeros) == ConfusionMatrix{});
  CHECK_THROWS_AS(derive_metrics(aggregate(zeros)), Error);
  CHECK_THROWS_AS(aggregate(std::vector<ConfusionMatrix>{}), Error);
}

TEST_CASE("roc_auc") {
  CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<BinaryLabel>{F, F, G, G}) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.7, 0.6}, std::vector<BinaryLabel>{F, G, F, G}) == 0.75);
  CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<BinaryLabel>{F, F}), Error);

  // Hard 0/1 scores give balanced accuracy.
  ConfusionMatrix cm{73, 59, 42, 171};
  std::vector<double> s;
  std::vector<BinaryLabel> y;
  auto push = [&](std::uint64_t n, double score, BinaryLabel label) {
    for (std::uint64_t i = 0; i < n; ++i) {
      s.push_back(score);
      y.push_back(label);
    }
  };
  push(cm.tp, 1, F);
  push(cm.fn, 0, F);
  push(cm.fp, 1, G);
  push(cm.tn, 0, G);
  CHECK(roc_auc(s, y) == doctest::Approx(balanced_accuracy(cm)));
  CHECK(std::abs(roc_auc(s, y) - 0.6889) <= 0.0005);
}

TEST_CASE("roc_auc agrees with the pairwise definition on random ties") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    std::vector<double> s(n);
    std::vector<BinaryLabel> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(6)) / 5.0;
      y[i] = rng.below(2) ? F : G;
    }
    y[0] = F;
    y[1] = G;
    CHECK(roc_auc(s, y) == doctest::Approx(pairwise_auc(s, y)).epsilon(1e-12));
  }
}

TEST_CASE("fleiss_kappa") {
  CHECK(fleiss_kappa(RatingMatrix({{3, 0, 0}, {0, 3, 0}, {0, 0, 3}})) == doctest::Approx(1.0));
  CHECK(fleiss_kappa(RatingMatrix({{3, 0, 0}, {0, 3, 0}, {1, 1, 1}})) == 0.4375);
  // Everyone always picks the same category: no chance-corrected signal, but full agreement.
  CHECK(fleiss_kappa(RatingMatrix({{2, 0}, {2, 0}})) == 1.0);

  CHECK_THROWS_AS(RatingMatrix({{3, 0}, {2, 0}}), Error);
  CHECK_THROWS_AS(RatingMatrix({{1, 0}, {0, 1}}), Error);
  CHECK_THROWS_AS(RatingMatrix({{3, 0, 0}, {3, 0}}), Error);
  CHECK_THROWS_AS(RatingMatrix({}), Error);
}

TEST_CASE("fleiss_kappa matches the oracle on random matrices") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t items = 2 + rng.below(10), cats = 2 + rng.below(4);
    const std::uint32_t raters = 2 + static_cast<std::uint32_t>(rng.below(6));
    std::vector<std::vector<std::uint32_t>> rows(items, std::vector<std::uint32_t>(cats, 0));
    for (auto& r : rows) {
      for (std::uint32_t k = 0; k < raters; ++k) ++r[rng.below(cats)];
    }
    rows[0][0] = raters;
    std::fill(rows[0].begin() + 1, rows[0].end(), 0);
    rows[1][1] = raters;
    rows[1][0] = 0;
    std::fill(rows[1].begin() + 2, rows[1].end(), 0);
    CHECK(fleiss_kappa(RatingMatrix(rows)) == doctest::Approx(fleiss_oracle(rows)).epsilon(1e-12));
  }
}

TEST_CASE("reconstruct_confusion") {
  MetricSet target;
  target.accuracy = 0.7068;
  target.precision = 0.5530;
  target.recall = 0.6348;
  auto r = reconstruct_confusion(target, 115, 230);
  CHECK(r.matrix == ConfusionMatrix{73, 59, 42, 171});
  CHECK(r.deviation < 0.0005);

  const ConfusionMatrix known{17, 4, 6, 40};
  r = reconstruct_confusion(derive_metrics(known), 23, 44);
  CHECK(r.matrix == known);
  CHECK(r.deviation == 0.0);

  // Precision 1 with recall 0 cannot both hold; the closest matrices have one
  // true positive and no false positive.
  MetricSet degenerate;
  degenerate.precision = 1.0;
  degenerate.recall = 0.0;
  r = reconstruct_confusion(degenerate, 10, 20);
  CHECK(r.matrix == ConfusionMatrix{1, 0, 9, 20});
  CHECK(r.deviation == doctest::Approx(0.1));
  r = reconstruct_confusion(degenerate, 1, 5);
  CHECK(r.deviation == doctest::Approx(1.0));
  CHECK(r.matrix == ConfusionMatrix{0, 0, 1, 5});
}

TEST_CASE("format_metric rounds half up to four decimals") {
  CHECK(format_metric(0.92486) == "0.9249");
  CHECK(format_metric(0.12345) == "0.1235");
  CHECK(format_metric(1.0) == "1.0000");
  CHECK(format_metric(0.0) == "0.0000");
}

TEST_CASE("render_report") {
  const auto bert = metrics_from_precision_recall(0.9286, 0.9213);
  auto report = render_report({{"BERT", bert}});
  CHECK(report.text.find("0.9213  0.9286  0.9249") != std::string::npos);
  CHECK(report.text.find("Acc.") == std::string::npos);
  CHECK(report.text.find("AUC") == std::string::npos);
  CHECK(report.csv == "Model,Recall,Precision,F1\nBERT,0.9213,0.9286,0.9249\n");

  auto full = derive_metrics({73, 59, 42, 171});
  full.roc_auc = 0.6889;
  report = render_report({{"GPT-4", full}, {"BERT", bert}});
  CHECK(report.csv.rfind("Model,Recall,Precision,F1,Accuracy,ROC AUC\n", 0) == 0);
  CHECK(report.csv.find("GPT-4") < report.csv.find("BERT"));
  CHECK(report.csv.find("BERT,0.9213,0.9286,0.9249,,") != std::string::npos);
}
