#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fraudlens/classifiers.hpp"
#include "fraudlens/error.hpp"
#include "fraudlens/metrics.hpp"
#include "support.hpp"

using namespace fraudlens;
using fraudlens::testing::labeled;

namespace {

constexpr auto F = BinaryLabel::fraud;
constexpr auto G = BinaryLabel::genuine;

FeatureSpace one_feature_space(std::size_t dims = 1) {
  std::vector<std::string> terms;
  for (std::size_t i = 0; i < dims; ++i) terms.push_back("f" + std::to_string(i));
  FeatureSpace space{Vocabulary(terms), {}};
  space.idf.idf.assign(dims, 1.0);
  space.idf.doc_count = 1;
  return space;
}

Example ex(std::vector<std::pair<std::uint32_t, double>> entries, BinaryLabel y) { return {{std::move(entries)}, y}; }

std::vector<LabeledComment> nb_example_corpus() {
  return {labeled("1", "buy crypto now", RawLabel::scam), labeled("2", "nice post", RawLabel::genuine),
          labeled("3", "crypto scam dm me", RawLabel::spam), labeled("4", "love this", RawLabel::genuine)};
}

TrainConfig small_vocab_config() {
  TrainConfig cfg;
  cfg.vocabulary.min_df = 1;
  return cfg;
}

std::string serialized(const ClassifierModel& m) {
  std::ostringstream out;
  save_model(m, out);
  return out.str();
}

}  // namespace

TEST_CASE("make_prediction tie rule") {
  CHECK(make_prediction(0.5).label == G);
  CHECK(make_prediction(0.5000001).label == F);
  CHECK(make_prediction(0.3, 0.2).label == F);
}

TEST_CASE("model kind names") {
  CHECK(parse_model_kind("nb") == ModelKind::naive_bayes);
  CHECK(parse_model_kind("random_forest") == ModelKind::random_forest);
  CHECK_FALSE(parse_model_kind("svm").has_value());
  CHECK(short_code(ModelKind::decision_tree) == "tree");
}

TEST_CASE("naive Bayes matches the hand-computed example") {
  const auto model = train_model(ModelKind::naive_bayes, nb_example_corpus(), small_vocab_config());
  REQUIRE(model.features->dims() == 10);
  const auto& p = std::get<NaiveBayesParams>(model.parameters);
  const auto post = naive_bayes_posterior(p, count_vectorize(tokenize("crypto now"), model.features->vocabulary));
  // P(crypto|F)=3/17, P(now|F)=2/17, P(crypto|G)=P(now|G)=1/14, equal priors.
  const double odds = (3.0 / 17 * 2.0 / 17) / (1.0 / 14 * 1.0 / 14);
  CHECK(odds == doctest::Approx(1176.0 / 289.0));
  CHECK(post[1] / post[0] == doctest::Approx(odds).epsilon(1e-12));
  const auto pred = predict(model, "crypto now");
  CHECK(pred.label == F);
  CHECK(pred.score == doctest::Approx(1176.0 / (1176.0 + 289.0)).epsilon(1e-12));
}

TEST_CASE("naive Bayes without evidence falls back to the prior") {
  const auto model = train_model(ModelKind::naive_bayes, nb_example_corpus(), small_vocab_config());
  const auto empty = predict(model, "");
  CHECK(empty.score == doctest::Approx(0.5));
  CHECK(empty.label == G);
  CHECK(predict(model, "zzz qqq").score == doctest::Approx(0.5));

  auto all_fraud = nb_example_corpus();
  for (auto& c : all_fraud) c.raw = RawLabel::spam;
  CHECK_THROWS_AS(train_model(ModelKind::naive_bayes, all_fraud, small_vocab_config()), Error);
}

TEST_CASE("logistic regression basics") {
  const auto space = one_feature_space();
  const std::vector<Example> data = {ex({{0, 1.0}}, F), ex({{0, -1.0}}, G), ex({{0, 1.0}}, F), ex({{0, -1.0}}, G)};

  LogisticParams zero{{0.0}, 0.0};
  ClassifierModel untrained;
  untrained.kind = ModelKind::logistic_regression;
  untrained.features = space;
  untrained.parameters = zero;
  CHECK(score_features(untrained, data[0].x) == 0.5);
  CHECK(predict(untrained, "anything").label == G);

  const auto model = train_logistic_regression(space, data, TrainConfig{});
  const auto& p = std::get<LogisticParams>(model.parameters);
  CHECK(p.weights[0] > 0.0);
  for (const auto& e : data) CHECK(make_prediction(score_features(model, e.x)).label == e.y);
}

TEST_CASE("logistic gradient matches central finite differences") {
  Rng rng(5);
  const std::size_t dims = 6;
  auto uniform = [&] { return static_cast<double>(rng.below(2'000'001)) / 1'000'000.0 - 1.0; };
  std::vector<Example> batch;
  for (int i = 0; i < 5; ++i) {
    Example e;
    for (std::uint32_t d = 0; d < dims; ++d) {
      if (rng.below(3)) e.x.entries.emplace_back(d, uniform());
    }
    e.y = rng.below(2) ? F : G;
    batch.push_back(e);
  }
  LogisticParams p;
  for (std::size_t d = 0; d < dims; ++d) p.weights.push_back(uniform());
  p.bias = uniform();
  const double l2 = 0.01, h = 1e-5;
  const auto g = logistic_gradient(p, batch, l2);

  auto check = [&](double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    CHECK(std::abs(analytic - numeric) / denom <= 1e-4);
  };
  for (std::size_t d = 0; d < dims; ++d) {
    auto plus = p, minus = p;
    plus.weights[d] += h;
    minus.weights[d] -= h;
    check(g.weights[d], (logistic_loss(plus, batch, l2) - logistic_loss(minus, batch, l2)) / (2 * h));
  }
  auto plus = p, minus = p;
  plus.bias += h;
  minus.bias -= h;
  check(g.bias, (logistic_loss(plus, batch, l2) - logistic_loss(minus, batch, l2)) / (2 * h));
}

TEST_CASE("logistic regression rejects a diverging learning rate") {
  const auto space = one_feature_space();
  std::vector<Example> data;
  for (int i = 0; i < 10; ++i) data.push_back(ex({{0, i % 2 ? 50.0 : -50.0}}, i % 3 ? F : G));
  TrainConfig cfg;
  cfg.learning_rate = 1e3;
  try {
    train_logistic_regression(space, data, cfg);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonFiniteLoss);
  }
}

TEST_CASE("gini") {
  CHECK(gini(4, 4) == 0.0);
  CHECK(gini(2, 4) == 0.5);
  CHECK(gini(0, 3) == 0.0);
}

TEST_CASE("decision tree on separable one-dimensional data") {
  const auto space = one_feature_space();
  const std::vector<Example> data = {ex({{0, 0.1}}, G), ex({{0, 0.2}}, G), ex({{0, 0.8}}, F), ex({{0, 0.9}}, F)};
  TrainConfig cfg;
  cfg.min_leaf = 1;
  const auto model = train_decision_tree(space, data, cfg);
  const auto& tree = std::get<DecisionTreeParams>(model.parameters);
  REQUIRE(tree.nodes.size() == 3);
  const auto& root = tree.nodes[0];
  CHECK(root.feature == 0);
  CHECK(root.threshold == 0.5);
  CHECK(tree.nodes[root.left].score == 0.0);
  CHECK(tree.nodes[root.right].score == 1.0);
  CHECK(tree.depth() == 1);

  const std::vector<Example> pure = {ex({{0, 0.1}}, F), ex({{0, 0.7}}, F)};
  const auto leaf = std::get<DecisionTreeParams>(train_decision_tree(space, pure, cfg).parameters);
  REQUIRE(leaf.nodes.size() == 1);
  CHECK(leaf.nodes[0].score == 1.0);
}

TEST_CASE("decision tree respects max_depth and min_leaf") {
  const auto corpus = fraudlens::testing::synthetic_corpus(120, 9);
  TrainConfig cfg;
  cfg.max_depth = 2;
  const auto model = train_model(ModelKind::decision_tree, corpus, cfg);
  CHECK(std::get<DecisionTreeParams>(model.parameters).depth() <= 2);
  cfg.max_depth = 1;
  const auto stump = train_model(ModelKind::decision_tree, corpus, cfg);
  CHECK(std::get<DecisionTreeParams>(stump.parameters).nodes.size() == 3);
  cfg.max_depth = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("degenerate forest equals a single tree") {
  const auto corpus = fraudlens::testing::synthetic_corpus(80, 2);
  TrainConfig cfg;
  cfg.n_trees = 1;
  cfg.bootstrap = false;
  cfg.feature_subsample = 1.0;
  const auto forest = train_model(ModelKind::random_forest, corpus, cfg);
  const auto tree = train_model(ModelKind::decision_tree, corpus, cfg);
  for (const auto& c : corpus) CHECK(predict(forest, c.comment.text) == predict(tree, c.comment.text));
}

TEST_CASE("forest on identical inputs is a set of leaves") {
  const auto space = one_feature_space();
  std::vector<Example> data;
  for (int i = 0; i < 10; ++i) data.push_back(ex({{0, 1.0}}, i < 3 ? F : G));
  TrainConfig cfg;
  cfg.n_trees = 5;
  cfg.bootstrap = false;
  const auto model = train_random_forest(space, data, cfg);
  for (const auto& t : std::get<RandomForestParams>(model.parameters).trees) {
    REQUIRE(t.nodes.size() == 1);
    CHECK(t.nodes[0].score == doctest::Approx(0.3));
  }
}

TEST_CASE("forest training is deterministic under a fixed seed") {
  const auto corpus = fraudlens::testing::synthetic_corpus(50, 4);
  TrainConfig cfg;
  cfg.n_trees = 10;
  cfg.seed = 42;
  const auto a = serialized(train_model(ModelKind::random_forest, corpus, cfg));
  const auto b = serialized(train_model(ModelKind::random_forest, corpus, cfg));
  CHECK(a == b);
  cfg.seed = 43;
  CHECK(serialized(train_model(ModelKind::random_forest, corpus, cfg)) != a);
}

TEST_CASE("models survive a save/load round trip") {
  const auto corpus = fraudlens::testing::synthetic_corpus(90, 6);
  TrainConfig cfg;
  cfg.n_trees = 5;
  for (auto kind : {ModelKind::naive_bayes, ModelKind::logistic_regression, ModelKind::decision_tree,
                    ModelKind::random_forest}) {
    CAPTURE(to_string(kind));
    const auto model = train_model(kind, corpus, cfg);
    const auto text = serialized(model);
    std::istringstream in(text);
    const auto back = load_model(in, kind);
    CHECK(back.name == std::string(short_code(kind)) + "-v1");
    CHECK(serialized(back) == text);
    for (const auto& c : corpus) CHECK(predict(back, c.comment.text) == predict(model, c.comment.text));
  }
}

TEST_CASE("model loading errors") {
  const auto model = train_model(ModelKind::naive_bayes, nb_example_corpus(), small_vocab_config());
  auto j = model_to_json(model);

  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::InvalidArgument;
  };
  auto future = j;
  future["format_version"] = "99.0";
  CHECK(code_of([&] { model_from_json(future); }) == Errc::UnsupportedVersion);
  auto minor = j;
  minor["format_version"] = "1.7";
  CHECK_NOTHROW(model_from_json(minor));

  const auto text = serialized(model);
  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK(code_of([&] { load_model(truncated); }) == Errc::CorruptModel);
  auto broken = j;
  broken["parameters"].erase("log_prior");
  CHECK(code_of([&] { model_from_json(broken); }) == Errc::CorruptModel);

  CHECK(code_of([&] { model_from_json(j, ModelKind::random_forest); }) == Errc::KindMismatch);
  auto no_vocab = j;
  no_vocab["vocabulary"] = nullptr;
  CHECK(code_of([&] { model_from_json(no_vocab); }) == Errc::KindMismatch);
  CHECK(code_of([] { load_model_file("/nonexistent/model.json"); }) == Errc::Io);
}

TEST_CASE("tune_threshold maximizes F1") {
  const std::vector<double> scores = {0.9, 0.8, 0.35, 0.3, 0.1};
  const std::vector<BinaryLabel> gold = {F, F, F, G, G};
  const double t = tune_threshold(scores, gold);
  CHECK(t >= 0.3);
  CHECK(t < 0.35);
  for (std::size_t i = 0; i < scores.size(); ++i) CHECK(make_prediction(scores[i], t).label == gold[i]);
}

TEST_CASE("transformer job config keeps the reference defaults") {
  const TransformerJobConfig cfg;
  CHECK(cfg.pretrained_name == "bert-base-cased");
  CHECK(cfg.epochs == 10);
  CHECK(cfg.max_length == 512);
  CHECK(cfg.batch_size == 16);
  CHECK(cfg.learning_rate == 2e-5);
  CHECK_FALSE(cfg.correct_bias);
  CHECK(cfg.warmup_steps == 0);
  const auto back = TransformerJobConfig::from_json(nlohmann::json::parse(cfg.to_json().dump()));
  CHECK(back == cfg);
}
