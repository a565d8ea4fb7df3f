#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "fraudlens/classifiers.hpp"
#include "fraudlens/corpus.hpp"
#include "fraudlens/llm_backend.hpp"
#include "fraudlens/random.hpp"

namespace fraudlens::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fraudlens-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::size_t count_lines(const std::string& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) n += line.empty() ? 0 : 1;
  return n;
}

inline LabeledComment labeled(std::string id, std::string text, RawLabel raw, std::string post = "p1") {
  LabeledComment c;
  c.comment.id = std::move(id);
  c.comment.post_id = std::move(post);
  c.comment.text = std::move(text);
  c.raw = raw;
  return c;
}

// Two word pools with a shared filler pool. Fraud comments always draw at
// least two words from the fraud pool, so the classes are linearly separable.
inline std::vector<LabeledComment> synthetic_corpus(std::size_t n, std::uint64_t seed, double fraud_share = 1.0 / 3) {
  static const std::vector<std::string> fraud_words = {
      "crypto", "profit", "dm",     "invest",  "bitcoin", "forex",   "earn",   "cash",
      "wallet", "signal", "trader", "bonus",   "giveaway", "winner", "claim",  "payout"};
  static const std::vector<std::string> genuine_words = {
      "love",  "beautiful", "photo", "amazing", "cute",   "congrats", "sunset", "friends",
      "happy", "lovely",    "smile", "nature",  "family", "awesome",  "wow",    "stunning"};
  static const std::vector<std::string> filler = {"the", "this", "so", "my", "you", "is", "a", "and", "for", "today"};
  Rng rng(seed);
  std::vector<LabeledComment> out;
  const auto n_fraud = static_cast<std::size_t>(static_cast<double>(n) * fraud_share + 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    const bool fraud = i < n_fraud;
    const auto& pool = fraud ? fraud_words : genuine_words;
    std::string text;
    const auto signal_words = 2 + rng.below(3);
    const auto filler_words = 1 + rng.below(4);
    for (std::uint64_t k = 0; k < signal_words + filler_words; ++k) {
      if (!text.empty()) text += ' ';
      const bool signal = k < signal_words;
      text += signal ? pool[rng.below(pool.size())] : filler[rng.below(filler.size())];
    }
    const RawLabel raw = fraud ? (i % 2 ? RawLabel::scam : RawLabel::spam) : RawLabel::genuine;
    out.push_back(labeled("c" + std::to_string(i), text, raw, "p" + std::to_string(i % 7)));
  }
  rng.shuffle(out);
  return out;
}

inline std::vector<Example> to_examples(const ClassifierModel& model, const std::vector<LabeledComment>& items) {
  std::vector<Example> out;
  for (const auto& it : items) out.push_back({featurize(model, it.comment.text), it.binary()});
  return out;
}

// Backend with a fixed verdict.
class StubBackend final : public Backend {
 public:
  StubBackend(BinaryLabel label, double score, std::string name = "stub")
      : label_(label), score_(score), name_(std::move(name)) {}
  Prediction classify(std::string_view) const override { return {label_, score_}; }
  std::string name() const override { return name_; }
  std::string kind() const override { return "stub"; }

 private:
  BinaryLabel label_;
  double score_;
  std::string name_;
};

// Deterministic text-dependent verdicts; "boom" raises a remote failure.
class KeywordBackend final : public Backend {
 public:
  Prediction classify(std::string_view text) const override {
    if (text == "boom") throw Error(Errc::RemoteUnavailable, "stub failure");
    const auto h = std::hash<std::string_view>{}(text);
    const double score = static_cast<double>(h % 1000) / 1000.0;
    return make_prediction(score);
  }
  std::string name() const override { return "keyword"; }
  std::string kind() const override { return "stub"; }
};

inline std::string chat_body(const std::string& content) {
  nlohmann::json j;
  j["id"] = "chatcmpl-fixture";
  j["object"] = "chat.completion";
  j["choices"] = nlohmann::json::array({{{"index", 0},
                                         {"message", {{"role", "assistant"}, {"content", content}}},
                                         {"finish_reason", "stop"}}});
  return j.dump();
}

// Replay fixture for `items`: every comment gets a reply derived from its
// gold label, with a deterministic share of wrong and unmappable answers.
inline std::string build_chat_fixture(const std::vector<LabeledComment>& items, const LlmConfig& cfg) {
  std::ostringstream out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    HttpRequest req;
    req.path = cfg.endpoint_path;
    req.body = chat_request_body(build_prompt(it.comment.text, cfg), cfg).dump();
    std::string reply;
    if (i % 11 == 5) {
      reply = "I cannot classify this comment.";
    } else if (i % 4 == 3) {
      reply = it.binary() == BinaryLabel::fraud ? "Genuine" : "'spam'";
    } else {
      reply = it.raw == RawLabel::genuine ? "genuine" : (it.raw == RawLabel::spam ? "Spam." : "SCAM");
    }
    nlohmann::json line;
    line["hash"] = request_hash(req);
    line["status"] = 200;
    line["body"] = chat_body(reply);
    out << line.dump() << "\n";
  }
  return out.str();
}

}  // namespace fraudlens::testing
