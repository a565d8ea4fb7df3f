#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fraudlens/corpus.hpp"
#include "fraudlens/textproc.hpp"

namespace fraudlens {

inline constexpr std::string_view kModelFormatVersion = "1.0";

struct Prediction {
  BinaryLabel label = BinaryLabel::genuine;
  double score = 0.0;  // probability of fraud

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// fraud iff score > threshold; a score equal to the threshold stays genuine.
Prediction make_prediction(double score, double threshold = 0.5);

enum class ModelKind { naive_bayes, logistic_regression, decision_tree, random_forest, remote };

std::string_view to_string(ModelKind kind) noexcept;
/// Short code used in default model names and on the command line (nb, lr, tree, forest, remote).
std::string_view short_code(ModelKind kind) noexcept;
/// Accepts both the full kind name and the short code.
std::optional<ModelKind> parse_model_kind(std::string_view text) noexcept;
constexpr bool is_native(ModelKind kind) noexcept { return kind != ModelKind::remote; }

struct TrainConfig {
  double learning_rate = 0.1;
  std::uint32_t epochs = 200;
  double l2 = 1e-4;
  double alpha = 1.0;
  std::uint32_t max_depth = 12;
  std::uint32_t min_leaf = 2;
  std::uint32_t n_trees = 100;
  // Fraction of features tried per split; empty selects ceil(sqrt(d)).
  std::optional<double> feature_subsample;
  bool bootstrap = true;
  std::uint64_t seed = 42;
  VocabularyOptions vocabulary;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

struct Example {
  SparseVector x;
  BinaryLabel y = BinaryLabel::genuine;
};

struct FeatureSpace {
  Vocabulary vocabulary;
  IdfTable idf;

  std::size_t dims() const noexcept { return vocabulary.size(); }
};

struct NaiveBayesParams {
  double alpha = 1.0;
  std::array<double, 2> log_prior{};                   // [genuine, fraud]
  std::array<std::vector<double>, 2> log_likelihood;  // per class, per term
};

struct LogisticParams {
  std::vector<double> weights;
  double bias = 0.0;
};

/// Flat CART tree. Internal nodes route x[feature] <= threshold to `left`.
struct DecisionTreeParams {
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double score = 0.0;  // fraud fraction of the training rows that reached the node
  };
  std::vector<Node> nodes;

  double score(const SparseVector& x) const;
  std::size_t depth() const;
};

struct RandomForestParams {
  std::vector<DecisionTreeParams> trees;
};

/// Remote backends are described by their configuration only; see
/// llm_backend.hpp for how one is opened.
struct RemoteParams {
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

using ModelParameters =
    std::variant<NaiveBayesParams, LogisticParams, DecisionTreeParams, RandomForestParams, RemoteParams>;

struct ClassifierModel {
  ModelKind kind = ModelKind::naive_bayes;
  std::string name;
  double threshold = 0.5;
  std::string version{kModelFormatVersion};
  std::optional<FeatureSpace> features;  // present iff kind is native
  ModelParameters parameters;
  // Free-form training record (split, seed, config). Not used for prediction.
  nlohmann::ordered_json provenance;
};

// Training. Native trainers take featurized examples; naive Bayes expects raw
// counts, the others TF-IDF vectors.
ClassifierModel train_naive_bayes(const FeatureSpace& space, std::span<const Example> train,
                                  const TrainConfig& cfg);
ClassifierModel train_logistic_regression(const FeatureSpace& space, std::span<const Example> train,
                                          const TrainConfig& cfg);
ClassifierModel train_decision_tree(const FeatureSpace& space, std::span<const Example> train,
                                    const TrainConfig& cfg);
ClassifierModel train_random_forest(const FeatureSpace& space, std::span<const Example> train,
                                    const TrainConfig& cfg);

/// End to end: tokenize, build the vocabulary and idf on `train`, featurize
/// and fit the requested kind.
ClassifierModel train_model(ModelKind kind, const std::vector<LabeledComment>& train, const TrainConfig& cfg);

/// L2-regularized mean cross-entropy (bias unregularized).
double logistic_loss(const LogisticParams& p, std::span<const Example> batch, double l2);
LogisticParams logistic_gradient(const LogisticParams& p, std::span<const Example> batch, double l2);

/// Gini impurity of a node with `fraud` positives among `total` rows.
double gini(double fraud, double total) noexcept;

/// Naive Bayes class posterior [genuine, fraud] for a count vector.
std::array<double, 2> naive_bayes_posterior(const NaiveBayesParams& p, const SparseVector& counts);

SparseVector featurize(const ClassifierModel& model, std::string_view text);
/// Fraud probability from an already featurized input.
double score_features(const ClassifierModel& model, const SparseVector& x);
/// Native kinds only; a remote model throws RemoteUnavailable (open it
/// through open_backend instead).
Prediction predict(const ClassifierModel& model, std::string_view text);

/// Threshold in [0,1] maximizing F1 over the given scores; ties prefer the
/// higher threshold.
double tune_threshold(std::span<const double> scores, std::span<const BinaryLabel> gold);

nlohmann::ordered_json model_to_json(const ClassifierModel& model);
ClassifierModel model_from_json(const nlohmann::ordered_json& j,
                                std::optional<ModelKind> expected = std::nullopt);
void save_model(const ClassifierModel& model, std::ostream& out);
void save_model_file(const ClassifierModel& model, const std::string& path);
ClassifierModel load_model(std::istream& in, std::optional<ModelKind> expected = std::nullopt);
ClassifierModel load_model_file(const std::string& path, std::optional<ModelKind> expected = std::nullopt);

/// Anything that turns comment text into a verdict: native models and remote
/// adapters alike. Implementations must be safe for concurrent classify().
class Backend {
 public:
  virtual ~Backend() = default;
  virtual Prediction classify(std::string_view text) const = 0;
  virtual std::string name() const = 0;
  virtual std::string kind() const = 0;
};

class NativeBackend final : public Backend {
 public:
  explicit NativeBackend(ClassifierModel model);

  Prediction classify(std::string_view text) const override { return predict(model_, text); }
  std::string name() const override { return model_.name; }
  std::string kind() const override { return std::string(to_string(model_.kind)); }
  const ClassifierModel& model() const noexcept { return model_; }

 private:
  ClassifierModel model_;
};

/// Fine-tuning settings for the external transformer job. Defaults are the
/// reference configuration; nothing here trains a model.
struct TransformerJobConfig {
  std::string pretrained_name = "bert-base-cased";
  std::string tokenizer = "BertTokenizer";
  std::uint32_t epochs = 10;
  std::uint32_t max_length = 512;
  std::uint32_t batch_size = 16;
  std::string optimizer = "AdamW";
  double learning_rate = 2e-5;
  bool correct_bias = false;
  std::string scheduler = "linear";
  std::uint32_t warmup_steps = 0;
  std::string loss = "cross_entropy";
  SplitSpec split;

  nlohmann::ordered_json to_json() const;
  static TransformerJobConfig from_json(const nlohmann::json& j);

  friend bool operator==(const TransformerJobConfig& a, const TransformerJobConfig& b) {
    return a.to_json() == b.to_json();
  }
};

}  // namespace fraudlens
