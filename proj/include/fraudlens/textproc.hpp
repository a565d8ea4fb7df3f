#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace fraudlens {

using Token = std::string;
using TokenList = std::vector<Token>;

/// Lowercases and splits on whitespace and punctuation. `@name` and `#tag`
/// keep their sigil, `$26` keeps its currency sign, and each emoji (with any
/// modifiers or joiner sequence) is its own token.
TokenList tokenize(std::string_view text);

/// Lowercases one code point (ASCII, Latin-1, Latin Extended-A, Greek,
/// Cyrillic). Other code points are returned unchanged.
char32_t to_lower(char32_t cp) noexcept;

class Vocabulary {
 public:
  Vocabulary() = default;
  /// Terms must be distinct and sorted; throws InvalidArgument otherwise.
  explicit Vocabulary(std::vector<std::string> terms);

  std::size_t size() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const std::string& term(std::size_t index) const { return terms_.at(index); }
  /// -1 when absent.
  std::int64_t index_of(std::string_view term) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.terms_ == b.terms_; }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct VocabularyOptions {
  std::size_t min_df = 2;
  std::size_t max_size = 50'000;
};

Vocabulary build_vocabulary(const std::vector<TokenList>& docs, const VocabularyOptions& opts = {});

/// Smoothed inverse document frequency, aligned with the vocabulary:
/// idf(t) = ln((1 + N) / (1 + df(t))) + 1.
struct IdfTable {
  std::vector<double> idf;
  std::size_t doc_count = 0;

  double of(const Vocabulary& vocab, std::string_view term) const;
};

IdfTable fit_idf(const std::vector<TokenList>& docs, const Vocabulary& vocab);

struct SparseVector {
  // Strictly increasing indices, no stored zeros.
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool empty() const noexcept { return entries.empty(); }
  double get(std::uint32_t index) const;
  double norm() const;
  double dot(const std::vector<double>& dense) const;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

/// Raw in-vocabulary token counts.
SparseVector count_vectorize(const TokenList& doc, const Vocabulary& vocab);

/// count * idf, then L2-normalized. All-OOV documents give the empty vector.
SparseVector tfidf_vectorize(const TokenList& doc, const Vocabulary& vocab, const IdfTable& idf);

}  // namespace fraudlens
