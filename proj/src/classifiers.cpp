#include "fraudlens/classifiers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <thread>
#include <unordered_set>

#include "fraudlens/random.hpp"

#include "fraudlens/error.hpp"
#include "fraudlens/metrics.hpp"

namespace fraudlens {

using nlohmann::ordered_json;

Prediction make_prediction(double score, double threshold) {
  return {score > threshold ? BinaryLabel::fraud : BinaryLabel::genuine, score};
}

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::naive_bayes: return "naive_bayes";
    case ModelKind::logistic_regression: return "logistic_regression";
    case ModelKind::decision_tree: return "decision_tree";
    case ModelKind::random_forest: return "random_forest";
    case ModelKind::remote: return "remote";
  }
  return "remote";
}

std::string_view short_code(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::naive_bayes: return "nb";
    case ModelKind::logistic_regression: return "lr";
    case ModelKind::decision_tree: return "tree";
    case ModelKind::random_forest: return "forest";
    case ModelKind::remote: return "remote";
  }
  return "remote";
}

std::optional<ModelKind> parse_model_kind(std::string_view text) noexcept {
  for (auto k : {ModelKind::naive_bayes, ModelKind::logistic_regression, ModelKind::decision_tree,
                 ModelKind::random_forest, ModelKind::remote}) {
    if (text == to_string(k) || text == short_code(k)) return k;
  }
  return std::nullopt;
}

void TrainConfig::validate() const {
  auto fail = [](const char* what) { throw Error(Errc::InvalidArgument, what); };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (epochs == 0) fail("epochs must be positive");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) fail("l2 must be non-negative");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) fail("alpha must be positive");
  if (max_depth == 0) fail("max_depth must be positive");
  if (min_leaf == 0) fail("min_leaf must be positive");
  if (n_trees == 0) fail("n_trees must be positive");
  if (feature_subsample && !(*feature_subsample > 0.0 && *feature_subsample <= 1.0)) {
    fail("feature_subsample must lie in (0,1]");
  }
  if (vocabulary.min_df == 0 || vocabulary.max_size == 0) fail("vocabulary bounds must be positive");
}

ordered_json TrainConfig::to_json() const {
  ordered_json j;
  j["learning_rate"] = learning_rate;
  j["epochs"] = epochs;
  j["l2"] = l2;
  j["alpha"] = alpha;
  j["max_depth"] = max_depth;
  j["min_leaf"] = min_leaf;
  j["n_trees"] = n_trees;
  j["feature_subsample"] = feature_subsample ? ordered_json(*feature_subsample) : ordered_json("sqrt");
  j["bootstrap"] = bootstrap;
  j["seed"] = seed;
  j["min_df"] = vocabulary.min_df;
  j["max_vocabulary"] = vocabulary.max_size;
  return j;
}

namespace {

void require_both_classes(std::span<const Example> train) {
  if (train.empty()) throw Error(Errc::EmptyInput, "no training examples");
  bool fraud = false, genuine = false;
  for (const auto& e : train) (e.y == BinaryLabel::fraud ? fraud : genuine) = true;
  if (!fraud || !genuine) throw Error(Errc::SingleClassInput, "training data has a single class");
}

void check_dims(const FeatureSpace& space, std::span<const Example> train) {
  for (const auto& e : train) {
    if (!e.x.empty() && e.x.entries.back().first >= space.dims()) {
      throw Error(Errc::InvalidArgument, "feature index outside the vocabulary");
    }
  }
}

ClassifierModel base_model(ModelKind kind, const FeatureSpace& space) {
  ClassifierModel m;
  m.kind = kind;
  m.name = std::string(short_code(kind)) + "-v1";
  m.features = space;
  return m;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double yval(BinaryLabel y) { return y == BinaryLabel::fraud ? 1.0 : 0.0; }

}  // namespace

// ---------------------------------------------------------------------------
// Naive Bayes

std::array<double, 2> naive_bayes_posterior(const NaiveBayesParams& p, const SparseVector& counts) {
  std::array<double, 2> joint = p.log_prior;
  for (std::size_t c = 0; c < 2; ++c) {
    for (const auto& [i, n] : counts.entries) {
      if (i < p.log_likelihood[c].size()) joint[c] += n * p.log_likelihood[c][i];
    }
  }
  const double fraud = sigmoid(joint[1] - joint[0]);
  return {1.0 - fraud, fraud};
}

ClassifierModel train_naive_bayes(const FeatureSpace& space, std::span<const Example> train,
                                  const TrainConfig& cfg) {
  cfg.validate();
  require_both_classes(train);
  check_dims(space, train);
  const std::size_t dims = space.dims();
  NaiveBayesParams p;
  p.alpha = cfg.alpha;
  std::array<std::vector<double>, 2> counts = {std::vector<double>(dims, 0.0), std::vector<double>(dims, 0.0)};
  std::array<double, 2> mass{0.0, 0.0};
  std::array<double, 2> docs{0.0, 0.0};
  for (const auto& e : train) {
    const auto c = static_cast<std::size_t>(e.y);
    docs[c] += 1.0;
    for (const auto& [i, n] : e.x.entries) {
      counts[c][i] += n;
      mass[c] += n;
    }
  }
  const double n = static_cast<double>(train.size());
  for (std::size_t c = 0; c < 2; ++c) {
    p.log_prior[c] = std::log(docs[c] / n);
    const double denom = std::log(mass[c] + cfg.alpha * static_cast<double>(dims));
    p.log_likelihood[c].resize(dims);
    for (std::size_t i = 0; i < dims; ++i) {
      p.log_likelihood[c][i] = std::log(counts[c][i] + cfg.alpha) - denom;
    }
  }
  auto m = base_model(ModelKind::naive_bayes, space);
  m.parameters = std::move(p);
  return m;
}

// ---------------------------------------------------------------------------
// Logistic regression

double logistic_loss(const LogisticParams& p, std::span<const Example> batch, double l2) {
  double loss = 0.0;
  for (const auto& e : batch) {
    const double z = e.x.dot(p.weights) + p.bias;
    loss += softplus(z) - yval(e.y) * z;
  }
  loss /= static_cast<double>(batch.size());
  double sq = 0.0;
  for (double w : p.weights) sq += w * w;
  return loss + 0.5 * l2 * sq;
}

LogisticParams logistic_gradient(const LogisticParams& p, std::span<const Example> batch, double l2) {
  LogisticParams g;
  g.weights.assign(p.weights.size(), 0.0);
  for (const auto& e : batch) {
    const double r = sigmoid(e.x.dot(p.weights) + p.bias) - yval(e.y);
    for (const auto& [i, v] : e.x.entries) g.weights[i] += r * v;
    g.bias += r;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < g.weights.size(); ++i) g.weights[i] = g.weights[i] * inv + l2 * p.weights[i];
  g.bias *= inv;
  return g;
}

ClassifierModel train_logistic_regression(const FeatureSpace& space, std::span<const Example> train,
                                          const TrainConfig& cfg) {
  cfg.validate();
  require_both_classes(train);
  check_dims(space, train);
  LogisticParams p;
  p.weights.assign(space.dims(), 0.0);

  double prev = logistic_loss(p, train, cfg.l2);
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto g = logistic_gradient(p, train, cfg.l2);
    for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] -= cfg.learning_rate * g.weights[i];
    p.bias -= cfg.learning_rate * g.bias;
    const double loss = logistic_loss(p, train, cfg.l2);
    if (!std::isfinite(loss)) {
      throw Error(Errc::NonFiniteLoss, "loss became non-finite at epoch " + std::to_string(epoch + 1));
    }
    // Full-batch descent with a small enough step never increases the loss.
    if (loss > prev + 1e-12 * std::max(1.0, std::abs(prev))) {
      throw Error(Errc::NonFiniteLoss, "loss increased at epoch " + std::to_string(epoch + 1) +
                                           "; lower the learning rate");
    }
    prev = loss;
  }
  auto m = base_model(ModelKind::logistic_regression, space);
  m.parameters = std::move(p);
  return m;
}

// ---------------------------------------------------------------------------
// CART

double gini(double fraud, double total) noexcept {
  if (total <= 0.0) return 0.0;
  const double p = fraud / total;
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

double DecisionTreeParams::score(const SparseVector& x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x.get(static_cast<std::uint32_t>(n.feature)) <= n.threshold ? n.left : n.right);
  }
  return nodes[i].score;
}

std::size_t DecisionTreeParams::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack = {{0, 0}};
  std::size_t best = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes[i].feature >= 0) {
      stack.push_back({static_cast<std::size_t>(nodes[i].left), d + 1});
      stack.push_back({static_cast<std::size_t>(nodes[i].right), d + 1});
    }
  }
  return best;
}

namespace {

using i128 = __int128;

// Sum over children of (f^2 + g^2) / n, kept as an exact fraction. A larger
// value means lower weighted Gini impurity.
struct Purity {
  i128 num = 0;
  i128 den = 1;

  static Purity of(std::uint64_t f, std::uint64_t n) {
    const i128 g = static_cast<i128>(n) - f;
    return {static_cast<i128>(f) * f + g * g, static_cast<i128>(n)};
  }
  static Purity split(std::uint64_t fl, std::uint64_t nl, std::uint64_t fr, std::uint64_t nr) {
    const auto l = of(fl, nl), r = of(fr, nr);
    return {l.num * r.den + r.num * l.den, l.den * r.den};
  }
  bool operator>(const Purity& o) const { return num * o.den > o.num * den; }
};

class TreeBuilder {
 public:
  TreeBuilder(std::span<const Example> rows, std::vector<std::uint32_t> weights, std::size_t dims,
              const TrainConfig& cfg, std::size_t max_features, Rng* rng)
      : rows_(rows), weights_(std::move(weights)), dims_(dims), cfg_(cfg),
        max_features_(max_features), rng_(rng), candidate_(dims, 0) {}

  DecisionTreeParams build() {
    std::vector<std::uint32_t> samples;
    for (std::uint32_t i = 0; i < rows_.size(); ++i) {
      if (weights_[i] > 0) samples.push_back(i);
    }
    grow(samples, 0);
    return std::move(tree_);
  }

 private:
  struct Entry {
    std::uint32_t feature;
    double value;
    std::uint32_t sample;
  };

  struct Split {
    std::uint32_t feature = 0;
    double threshold = 0.0;
    Purity purity;
  };

  std::int32_t grow(const std::vector<std::uint32_t>& samples, std::uint32_t depth) {
    std::uint64_t total = 0, fraud = 0;
    for (auto s : samples) {
      total += weights_[s];
      if (rows_[s].y == BinaryLabel::fraud) fraud += weights_[s];
    }
    const auto index = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.push_back({});
    tree_.nodes[index].score = total ? static_cast<double>(fraud) / static_cast<double>(total) : 0.0;

    if (depth >= cfg_.max_depth || total < 2ULL * cfg_.min_leaf || fraud == 0 || fraud == total) {
      return index;
    }
    auto split = best_split(samples, total, fraud);
    if (!split) return index;

    std::vector<std::uint32_t> left, right;
    for (auto s : samples) {
      (rows_[s].x.get(split->feature) <= split->threshold ? left : right).push_back(s);
    }
    const auto l = grow(left, depth + 1);
    const auto r = grow(right, depth + 1);
    auto& node = tree_.nodes[index];
    node.feature = static_cast<std::int32_t>(split->feature);
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    return index;
  }

  std::vector<std::uint32_t> pick_features() {
    std::vector<std::uint32_t> picked;
    if (max_features_ == 0 || max_features_ >= dims_) return picked;  // empty: all features
    // Floyd's algorithm: k distinct draws in O(k).
    std::unordered_set<std::uint32_t> chosen;
    for (std::size_t j = dims_ - max_features_; j < dims_; ++j) {
      const auto t = static_cast<std::uint32_t>(rng_->below(j + 1));
      if (!chosen.insert(t).second) chosen.insert(static_cast<std::uint32_t>(j));
    }
    picked.assign(chosen.begin(), chosen.end());
    std::sort(picked.begin(), picked.end());
    return picked;
  }

  std::optional<Split> best_split(const std::vector<std::uint32_t>& samples, std::uint64_t total,
                                  std::uint64_t fraud) {
    const auto picked = pick_features();
    const bool all = picked.empty();
    for (auto f : picked) candidate_[f] = 1;

    std::vector<Entry> entries;
    for (auto s : samples) {
      for (const auto& [f, v] : rows_[s].x.entries) {
        if (all || candidate_[f]) entries.push_back({f, v, s});
      }
    }
    for (auto f : picked) candidate_[f] = 0;
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      if (a.feature != b.feature) return a.feature < b.feature;
      if (a.value != b.value) return a.value < b.value;
      return a.sample < b.sample;
    });

    std::optional<Split> best;
    Purity bar = Purity::of(fraud, total);  // a split must beat the parent
    std::vector<std::pair<double, std::pair<std::uint64_t, std::uint64_t>>> groups;  // value -> (w, fraud w)

    for (std::size_t i = 0; i < entries.size();) {
      const auto feature = entries[i].feature;
      std::size_t j = i;
      std::uint64_t nz_w = 0, nz_f = 0;
      groups.clear();
      bool zero_inserted = false;
      auto add_zero = [&](std::uint64_t w, std::uint64_t fw) {
        if (w > 0) groups.push_back({0.0, {w, fw}});
        zero_inserted = true;
      };
      for (; j < entries.size() && entries[j].feature == feature; ++j) {
        const auto s = entries[j].sample;
        nz_w += weights_[s];
        if (rows_[s].y == BinaryLabel::fraud) nz_f += weights_[s];
      }
      const std::uint64_t zero_w = total - nz_w, zero_f = fraud - nz_f;
      for (std::size_t k = i; k < j; ++k) {
        const auto& e = entries[k];
        if (!zero_inserted && e.value > 0.0) add_zero(zero_w, zero_f);
        const std::uint64_t w = weights_[e.sample];
        const std::uint64_t fw = rows_[e.sample].y == BinaryLabel::fraud ? w : 0;
        if (!groups.empty() && groups.back().first == e.value) {
          groups.back().second.first += w;
          groups.back().second.second += fw;
        } else {
          groups.push_back({e.value, {w, fw}});
        }
      }
      if (!zero_inserted) add_zero(zero_w, zero_f);

      std::uint64_t left_w = 0, left_f = 0;
      for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
        left_w += groups[g].second.first;
        left_f += groups[g].second.second;
        const std::uint64_t right_w = total - left_w, right_f = fraud - left_f;
        if (left_w < cfg_.min_leaf || right_w < cfg_.min_leaf) continue;
        const auto purity = Purity::split(left_f, left_w, right_f, right_w);
        if (purity > bar) {
          bar = purity;
          best = Split{feature, (groups[g].first + groups[g + 1].first) / 2.0, purity};
        }
      }
      i = j;
    }
    return best;
  }

  std::span<const Example> rows_;
  std::vector<std::uint32_t> weights_;
  std::size_t dims_;
  const TrainConfig& cfg_;
  std::size_t max_features_;
  Rng* rng_;
  std::vector<std::uint8_t> candidate_;
  DecisionTreeParams tree_;
};

}  // namespace

ClassifierModel train_decision_tree(const FeatureSpace& space, std::span<const Example> train,
                                    const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw Error(Errc::EmptyInput, "no training examples");
  check_dims(space, train);
  TreeBuilder builder(train, std::vector<std::uint32_t>(train.size(), 1), space.dims(), cfg, 0, nullptr);
  auto m = base_model(ModelKind::decision_tree, space);
  m.parameters = builder.build();
  return m;
}

ClassifierModel train_random_forest(const FeatureSpace& space, std::span<const Example> train,
                                    const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw Error(Errc::EmptyInput, "no training examples");
  check_dims(space, train);
  const std::size_t dims = space.dims();
  const double fraction = cfg.feature_subsample.value_or(0.0);
  std::size_t max_features = cfg.feature_subsample
                                 ? static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(dims)))
                                 : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dims))));
  // 0 tells the builder to try every feature.
  max_features = max_features >= dims ? 0 : std::max<std::size_t>(max_features, 1);

  RandomForestParams forest;
  forest.trees.resize(cfg.n_trees);
  auto build_tree = [&](std::size_t t) {
    // Each tree owns a generator seeded from its index, so the schedule
    // cannot change the result.
    Rng rng(cfg.seed + t);
    std::vector<std::uint32_t> weights(train.size(), cfg.bootstrap ? 0 : 1);
    if (cfg.bootstrap) {
      for (std::size_t k = 0; k < train.size(); ++k) ++weights[rng.below(train.size())];
    }
    TreeBuilder builder(train, std::move(weights), dims, cfg, max_features, &rng);
    forest.trees[t] = builder.build();
  };

  const std::size_t workers =
      std::min<std::size_t>(cfg.n_trees, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t t = 0; t < cfg.n_trees; ++t) build_tree(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t t = next++; t < cfg.n_trees; t = next++) build_tree(t);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  auto m = base_model(ModelKind::random_forest, space);
  m.parameters = std::move(forest);
  return m;
}

ClassifierModel train_model(ModelKind kind, const std::vector<LabeledComment>& train, const TrainConfig& cfg) {
  cfg.validate();
  if (!is_native(kind)) throw Error(Errc::KindMismatch, "remote models are configured, not trained");
  if (train.empty()) throw Error(Errc::EmptyInput, "no training comments");
  std::vector<TokenList> docs;
  docs.reserve(train.size());
  for (const auto& c : train) docs.push_back(tokenize(c.comment.text));
  FeatureSpace space{build_vocabulary(docs, cfg.vocabulary), {}};
  space.idf = fit_idf(docs, space.vocabulary);

  std::vector<Example> examples;
  examples.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto x = kind == ModelKind::naive_bayes ? count_vectorize(docs[i], space.vocabulary)
                                            : tfidf_vectorize(docs[i], space.vocabulary, space.idf);
    examples.push_back({std::move(x), train[i].binary()});
  }
  ClassifierModel model;
  switch (kind) {
    case ModelKind::naive_bayes: model = train_naive_bayes(space, examples, cfg); break;
    case ModelKind::logistic_regression: model = train_logistic_regression(space, examples, cfg); break;
    case ModelKind::decision_tree: model = train_decision_tree(space, examples, cfg); break;
    case ModelKind::random_forest: model = train_random_forest(space, examples, cfg); break;
    case ModelKind::remote: break;
  }
  model.provenance["train_config"] = cfg.to_json();
  model.provenance["train_size"] = train.size();
  return model;
}

// ---------------------------------------------------------------------------
// Prediction

SparseVector featurize(const ClassifierModel& model, std::string_view text) {
  if (!model.features) throw Error(Errc::KindMismatch, "model has no feature space");
  const auto tokens = tokenize(text);
  if (model.kind == ModelKind::naive_bayes) return count_vectorize(tokens, model.features->vocabulary);
  return tfidf_vectorize(tokens, model.features->vocabulary, model.features->idf);
}

double score_features(const ClassifierModel& model, const SparseVector& x) {
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NaiveBayesParams>) {
          return naive_bayes_posterior(p, x)[1];
        } else if constexpr (std::is_same_v<T, LogisticParams>) {
          return sigmoid(x.dot(p.weights) + p.bias);
        } else if constexpr (std::is_same_v<T, DecisionTreeParams>) {
          return p.score(x);
        } else if constexpr (std::is_same_v<T, RandomForestParams>) {
          double s = 0.0;
          for (const auto& t : p.trees) s += t.score(x);
          return s / static_cast<double>(p.trees.size());
        } else {
          throw Error(Errc::RemoteUnavailable, "remote models must be opened with open_backend");
        }
      },
      model.parameters);
}

Prediction predict(const ClassifierModel& model, std::string_view text) {
  if (!is_native(model.kind)) {
    throw Error(Errc::RemoteUnavailable, "remote models must be opened with open_backend");
  }
  return make_prediction(score_features(model, featurize(model, text)), model.threshold);
}

double tune_threshold(std::span<const double> scores, std::span<const BinaryLabel> gold) {
  if (scores.size() != gold.size()) throw Error(Errc::LengthMismatch, "scores and labels differ in length");
  if (scores.empty()) throw Error(Errc::EmptyInput, "no validation scores");
  std::vector<double> candidates(scores.begin(), scores.end());
  candidates.push_back(0.0);
  candidates.push_back(0.5);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  double best_t = 0.5, best_f1 = -1.0;
  std::vector<BinaryLabel> pred(scores.size());
  for (double t : candidates) {
    if (t < 0.0 || t > 1.0) continue;
    for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = make_prediction(scores[i], t).label;
    const double f1 = derive_metrics(confusion(pred, gold)).f1;
    if (f1 >= best_f1) {
      best_f1 = f1;
      best_t = t;
    }
  }
  return best_t;
}

NativeBackend::NativeBackend(ClassifierModel model) : model_(std::move(model)) {
  if (!is_native(model_.kind)) throw Error(Errc::KindMismatch, "NativeBackend needs a native model");
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

ordered_json tree_to_json(const DecisionTreeParams& t) {
  ordered_json feature = ordered_json::array(), threshold = ordered_json::array(), left = ordered_json::array(),
               right = ordered_json::array(), score = ordered_json::array();
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    score.push_back(n.score);
  }
  ordered_json j;
  j["feature"] = std::move(feature);
  j["threshold"] = std::move(threshold);
  j["left"] = std::move(left);
  j["right"] = std::move(right);
  j["score"] = std::move(score);
  return j;
}

[[noreturn]] void corrupt(const std::string& what) { throw Error(Errc::CorruptModel, what); }

const ordered_json& field(const ordered_json& j, const char* key) {
  if (!j.is_object()) corrupt("expected an object");
  auto it = j.find(key);
  if (it == j.end()) corrupt(std::string("missing field '") + key + "'");
  return *it;
}

double real(const ordered_json& j) {
  if (!j.is_number()) corrupt("expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) corrupt("non-finite parameter");
  return v;
}

std::vector<double> reals(const ordered_json& j, std::optional<std::size_t> size = std::nullopt) {
  if (!j.is_array()) corrupt("expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(real(v));
  if (size && out.size() != *size) corrupt("parameter array has the wrong length");
  return out;
}

std::int32_t integer(const ordered_json& j) {
  if (!j.is_number_integer()) corrupt("expected an integer");
  return j.get<std::int32_t>();
}

DecisionTreeParams tree_from_json(const ordered_json& j, std::size_t dims) {
  const auto thresholds = reals(field(j, "threshold"));
  const auto scores = reals(field(j, "score"), thresholds.size());
  const auto& feature = field(j, "feature");
  const auto& left = field(j, "left");
  const auto& right = field(j, "right");
  const std::size_t n = thresholds.size();
  if (n == 0 || !feature.is_array() || !left.is_array() || !right.is_array() || feature.size() != n ||
      left.size() != n || right.size() != n) {
    corrupt("malformed tree");
  }
  DecisionTreeParams t;
  t.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = t.nodes[i];
    node.feature = integer(feature[i]);
    node.threshold = thresholds[i];
    node.left = integer(left[i]);
    node.right = integer(right[i]);
    node.score = scores[i];
    if (node.score < 0.0 || node.score > 1.0) corrupt("leaf score outside [0,1]");
    if (node.feature >= 0) {
      // Children always come after their parent, which also rules out cycles.
      auto ok = [&](std::int32_t c) { return c > static_cast<std::int32_t>(i) && static_cast<std::size_t>(c) < n; };
      if (static_cast<std::size_t>(node.feature) >= dims || !ok(node.left) || !ok(node.right)) {
        corrupt("tree node references are out of range");
      }
    }
  }
  return t;
}

}  // namespace

ordered_json model_to_json(const ClassifierModel& model) {
  ordered_json j;
  j["format_version"] = model.version;
  j["kind"] = std::string(to_string(model.kind));
  j["name"] = model.name;
  j["threshold"] = model.threshold;
  if (model.features) {
    j["vocabulary"] = model.features->vocabulary.terms();
    ordered_json idf;
    idf["doc_count"] = model.features->idf.doc_count;
    idf["values"] = model.features->idf.idf;
    j["idf"] = std::move(idf);
  } else {
    j["vocabulary"] = nullptr;
    j["idf"] = nullptr;
  }
  ordered_json params;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NaiveBayesParams>) {
          params["alpha"] = p.alpha;
          params["log_prior"] = p.log_prior;
          params["log_likelihood"] = {p.log_likelihood[0], p.log_likelihood[1]};
        } else if constexpr (std::is_same_v<T, LogisticParams>) {
          params["bias"] = p.bias;
          params["weights"] = p.weights;
        } else if constexpr (std::is_same_v<T, DecisionTreeParams>) {
          params = tree_to_json(p);
        } else if constexpr (std::is_same_v<T, RandomForestParams>) {
          params["trees"] = ordered_json::array();
          for (const auto& t : p.trees) params["trees"].push_back(tree_to_json(t));
        } else {
          params = p.config;
        }
      },
      model.parameters);
  j["parameters"] = std::move(params);
  if (!model.provenance.is_null()) j["provenance"] = model.provenance;
  return j;
}

ClassifierModel model_from_json(const ordered_json& j, std::optional<ModelKind> expected) {
  if (!j.is_object()) corrupt("model document is not an object");
  const auto& version = field(j, "format_version");
  if (!version.is_string()) corrupt("format_version must be a string");
  const auto v = version.get<std::string>();
  if (v.substr(0, v.find('.')) != kModelFormatVersion.substr(0, kModelFormatVersion.find('.'))) {
    throw Error(Errc::UnsupportedVersion, "model format version '" + v + "' is not supported");
  }
  const auto& kind_field = field(j, "kind");
  if (!kind_field.is_string()) corrupt("kind must be a string");
  auto kind = parse_model_kind(kind_field.get<std::string>());
  if (!kind) corrupt("unknown model kind '" + kind_field.get<std::string>() + "'");
  if (expected && *expected != *kind) {
    throw Error(Errc::KindMismatch, "expected a " + std::string(to_string(*expected)) + " model, found " +
                                        std::string(to_string(*kind)));
  }

  ClassifierModel m;
  m.kind = *kind;
  m.version = v;
  m.threshold = real(field(j, "threshold"));
  if (m.threshold < 0.0 || m.threshold > 1.0) corrupt("threshold outside [0,1]");
  if (auto it = j.find("name"); it != j.end() && it->is_string()) {
    m.name = it->get<std::string>();
  } else {
    m.name = std::string(short_code(m.kind)) + "-v1";
  }

  const auto& vocab = field(j, "vocabulary");
  const auto& idf = field(j, "idf");
  if (is_native(m.kind)) {
    if (vocab.is_null() || idf.is_null()) throw Error(Errc::KindMismatch, "native model without vocabulary");
    FeatureSpace space;
    try {
      space.vocabulary = Vocabulary::from_json(vocab);
    } catch (const Error& e) {
      corrupt(e.what());
    }
    const auto& dc = field(idf, "doc_count");
    if (!dc.is_number_unsigned() || dc.get<std::size_t>() == 0) corrupt("idf doc_count must be positive");
    space.idf.doc_count = dc.get<std::size_t>();
    space.idf.idf = reals(field(idf, "values"), space.vocabulary.size());
    m.features = std::move(space);
  } else if (!vocab.is_null() || !idf.is_null()) {
    throw Error(Errc::KindMismatch, "remote model must not carry a vocabulary");
  }

  const auto& p = field(j, "parameters");
  if (!p.is_object()) corrupt("parameters must be an object");
  const std::size_t dims = m.features ? m.features->dims() : 0;
  switch (m.kind) {
    case ModelKind::naive_bayes: {
      NaiveBayesParams nb;
      nb.alpha = real(field(p, "alpha"));
      const auto prior = reals(field(p, "log_prior"), 2);
      nb.log_prior = {prior[0], prior[1]};
      const auto& ll = field(p, "log_likelihood");
      if (!ll.is_array() || ll.size() != 2) corrupt("log_likelihood must hold two classes");
      nb.log_likelihood = {reals(ll[0], dims), reals(ll[1], dims)};
      m.parameters = std::move(nb);
      break;
    }
    case ModelKind::logistic_regression: {
      LogisticParams lr;
      lr.bias = real(field(p, "bias"));
      lr.weights = reals(field(p, "weights"), dims);
      m.parameters = std::move(lr);
      break;
    }
    case ModelKind::decision_tree:
      m.parameters = tree_from_json(p, dims);
      break;
    case ModelKind::random_forest: {
      RandomForestParams rf;
      const auto& trees = field(p, "trees");
      if (!trees.is_array() || trees.empty()) corrupt("forest has no trees");
      for (const auto& t : trees) rf.trees.push_back(tree_from_json(t, dims));
      m.parameters = std::move(rf);
      break;
    }
    case ModelKind::remote:
      m.parameters = RemoteParams{p};
      break;
  }
  if (auto it = j.find("provenance"); it != j.end()) m.provenance = *it;
  return m;
}

void save_model(const ClassifierModel& model, std::ostream& out) {
  out << model_to_json(model).dump(1) << '\n';
  if (!out) throw Error(Errc::Io, "failed to write model");
}

void save_model_file(const ClassifierModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot open '" + path + "' for writing");
  save_model(model, out);
}

ClassifierModel load_model(std::istream& in, std::optional<ModelKind> expected) {
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("unreadable model file: ") + e.what());
  }
  try {
    return model_from_json(j, expected);
  } catch (const nlohmann::json::exception& e) {
    corrupt(e.what());
  }
}

ClassifierModel load_model_file(const std::string& path, std::optional<ModelKind> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open model '" + path + "'");
  return load_model(in, expected);
}

// ---------------------------------------------------------------------------

ordered_json TransformerJobConfig::to_json() const {
  ordered_json j;
  j["pretrained_name"] = pretrained_name;
  j["tokenizer"] = tokenizer;
  j["epochs"] = epochs;
  j["max_length"] = max_length;
  j["batch_size"] = batch_size;
  j["optimizer"] = {{"name", optimizer}, {"learning_rate", learning_rate}, {"correct_bias", correct_bias}};
  j["scheduler"] = {{"name", scheduler}, {"warmup_steps", warmup_steps}};
  j["loss"] = loss;
  j["split"] = {{"train", split.train_fraction}, {"val", split.val_fraction}, {"test", split.test_fraction},
                {"seed", split.seed}, {"stratified", split.stratified}};
  return j;
}

TransformerJobConfig TransformerJobConfig::from_json(const nlohmann::json& j) {
  TransformerJobConfig c;
  try {
    c.pretrained_name = j.value("pretrained_name", c.pretrained_name);
    c.tokenizer = j.value("tokenizer", c.tokenizer);
    c.epochs = j.value("epochs", c.epochs);
    c.max_length = j.value("max_length", c.max_length);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (auto it = j.find("optimizer"); it != j.end()) {
      c.optimizer = it->value("name", c.optimizer);
      c.learning_rate = it->value("learning_rate", c.learning_rate);
      c.correct_bias = it->value("correct_bias", c.correct_bias);
    }
    if (auto it = j.find("scheduler"); it != j.end()) {
      c.scheduler = it->value("name", c.scheduler);
      c.warmup_steps = it->value("warmup_steps", c.warmup_steps);
    }
    c.loss = j.value("loss", c.loss);
    if (auto it = j.find("split"); it != j.end()) {
      c.split.train_fraction = it->value("train", c.split.train_fraction);
      c.split.val_fraction = it->value("val", c.split.val_fraction);
      c.split.test_fraction = it->value("test", c.split.test_fraction);
      c.split.seed = it->value("seed", c.split.seed);
      c.split.stratified = it->value("stratified", c.split.stratified);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bad transformer job config: ") + e.what());
  }
  c.split.validate();
  return c;
}

}  // namespace fraudlens
