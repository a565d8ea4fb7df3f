#include "fraudlens/textproc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "fraudlens/error.hpp"

namespace fraudlens {

namespace {

constexpr char32_t kReplacement = 0xFFFD;
constexpr char32_t kZeroWidthJoiner = 0x200D;

std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t cp) {
  return cp == ' ' || (cp >= 0x09 && cp <= 0x0D) || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
         (cp >= 0x2000 && cp <= 0x200B) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
         cp == 0x205F || cp == 0x3000 || cp == 0xFEFF;
}

bool is_regional_indicator(char32_t cp) { return cp >= 0x1F1E6 && cp <= 0x1F1FF; }

bool is_emoji(char32_t cp) {
  return (cp >= 0x1F000 && cp <= 0x1FAFF) || (cp >= 0x2600 && cp <= 0x27BF) ||
         (cp >= 0x2300 && cp <= 0x23FF) || (cp >= 0x2B00 && cp <= 0x2BFF);
}

bool is_emoji_modifier(char32_t cp) {
  return cp == 0xFE0F || cp == 0xFE0E || cp == 0x20E3 || (cp >= 0x1F3FB && cp <= 0x1F3FF) ||
         (cp >= 0xE0020 && cp <= 0xE007F);
}

bool is_ascii_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }

bool is_word(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || is_ascii_digit(cp) || cp == '_';
  }
  if (is_space(cp) || is_emoji(cp) || is_emoji_modifier(cp) || cp == kZeroWidthJoiner) return false;
  if (cp == kReplacement) return false;
  if (cp >= 0x80 && cp <= 0xBF) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2010 && cp <= 0x206F) return false;  // general punctuation
  if (cp >= 0x20A0 && cp <= 0x20CF) return false;  // currency signs
  if (cp >= 0x2190 && cp <= 0x22FF) return false;  // arrows, math operators
  if (cp >= 0x2500 && cp <= 0x25FF) return false;  // box drawing, shapes
  if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
  if (cp >= 0xFE10 && cp <= 0xFE6F) return false;  // vertical/small forms
  if (cp >= 0xFF01 && cp <= 0xFF0F) return false;  // fullwidth punctuation
  return true;
}

}  // namespace

char32_t to_lower(char32_t cp) noexcept {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp < 0x80) return cp;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
  if (cp == 0x130) return 'i';
  if ((cp >= 0x100 && cp <= 0x137) || (cp >= 0x14A && cp <= 0x177)) return cp | 1;
  if ((cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E)) return (cp & 1) ? cp + 1 : cp;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;
  if (cp == 0x386) return 0x3AC;
  if (cp >= 0x388 && cp <= 0x38A) return cp + 37;
  if (cp == 0x38C) return 0x3CC;
  if (cp == 0x38E || cp == 0x38F) return cp + 63;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  return cp;
}

TokenList tokenize(std::string_view text) {
  const auto cps = decode_utf8(text);
  const std::size_t n = cps.size();
  TokenList tokens;

  auto emit = [&](std::size_t from, std::size_t to) {
    std::string tok;
    for (std::size_t k = from; k < to; ++k) append_utf8(tok, to_lower(cps[k]));
    tokens.push_back(std::move(tok));
  };

  std::size_t i = 0;
  while (i < n) {
    const char32_t cp = cps[i];
    if ((cp == '@' || cp == '#') && i + 1 < n && is_word(cps[i + 1])) {
      std::size_t j = i + 1;
      while (j < n && is_word(cps[j])) ++j;
      emit(i, j);
      i = j;
    } else if (cp == '$' && i + 1 < n && is_ascii_digit(cps[i + 1])) {
      std::size_t j = i + 1;
      while (j < n) {
        if (is_ascii_digit(cps[j])) {
          ++j;
        } else if ((cps[j] == '.' || cps[j] == ',') && j + 1 < n && is_ascii_digit(cps[j + 1])) {
          j += 2;
        } else {
          break;
        }
      }
      emit(i, j);
      i = j;
    } else if (is_regional_indicator(cp)) {
      std::size_t j = i + 1;
      if (j < n && is_regional_indicator(cps[j])) ++j;
      emit(i, j);
      i = j;
    } else if (is_emoji(cp)) {
      std::size_t j = i + 1;
      while (j < n) {
        if (is_emoji_modifier(cps[j])) {
          ++j;
        } else if (cps[j] == kZeroWidthJoiner && j + 1 < n && is_emoji(cps[j + 1])) {
          j += 2;
        } else {
          break;
        }
      }
      emit(i, j);
      i = j;
    } else if (is_word(cp)) {
      std::size_t j = i + 1;
      while (j < n && is_word(cps[j])) ++j;
      emit(i, j);
      i = j;
    } else {
      ++i;
    }
  }
  return tokens;
}

Vocabulary::Vocabulary(std::vector<std::string> terms) : terms_(std::move(terms)) {
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (terms_[i].empty()) throw Error(Errc::InvalidArgument, "empty vocabulary term");
    if (i > 0 && !(terms_[i - 1] < terms_[i])) {
      throw Error(Errc::InvalidArgument, "vocabulary terms must be sorted and distinct");
    }
    index_.emplace(terms_[i], i);
  }
}

std::int64_t Vocabulary::index_of(std::string_view term) const {
  auto it = index_.find(std::string(term));
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

nlohmann::json Vocabulary::to_json() const { return terms_; }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(Errc::InvalidArgument, "vocabulary must be an array");
  std::vector<std::string> terms;
  terms.reserve(j.size());
  for (const auto& t : j) {
    if (!t.is_string()) throw Error(Errc::InvalidArgument, "vocabulary term must be a string");
    terms.push_back(t.get<std::string>());
  }
  return Vocabulary(std::move(terms));
}

Vocabulary build_vocabulary(const std::vector<TokenList>& docs, const VocabularyOptions& opts) {
  if (docs.empty()) throw Error(Errc::EmptyCorpus, "no documents");
  if (opts.min_df == 0 || opts.max_size == 0) {
    throw Error(Errc::InvalidArgument, "min_df and max_size must be positive");
  }
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    std::unordered_set<std::string_view> seen(doc.begin(), doc.end());
    for (auto t : seen) ++df[std::string(t)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [term, count] : df) {
    if (count >= opts.min_df) kept.emplace_back(term, count);
  }
  if (kept.size() > opts.max_size) {
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    kept.resize(opts.max_size);
  }
  std::vector<std::string> terms;
  terms.reserve(kept.size());
  for (auto& kv : kept) terms.push_back(std::move(kv.first));
  std::sort(terms.begin(), terms.end());
  return Vocabulary(std::move(terms));
}

double IdfTable::of(const Vocabulary& vocab, std::string_view term) const {
  const auto idx = vocab.index_of(term);
  if (idx < 0) throw Error(Errc::InvalidArgument, "term not in vocabulary");
  return idf.at(static_cast<std::size_t>(idx));
}

IdfTable fit_idf(const std::vector<TokenList>& docs, const Vocabulary& vocab) {
  if (docs.empty()) throw Error(Errc::EmptyCorpus, "no documents");
  std::vector<std::size_t> df(vocab.size(), 0);
  for (const auto& doc : docs) {
    std::unordered_set<std::int64_t> seen;
    for (const auto& t : doc) {
      const auto idx = vocab.index_of(t);
      if (idx >= 0 && seen.insert(idx).second) ++df[static_cast<std::size_t>(idx)];
    }
  }
  IdfTable table;
  table.doc_count = docs.size();
  table.idf.resize(vocab.size());
  const double n = static_cast<double>(docs.size());
  for (std::size_t i = 0; i < df.size(); ++i) {
    table.idf[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[i]))) + 1.0;
  }
  return table;
}

double SparseVector::get(std::uint32_t index) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), index,
                             [](const auto& e, std::uint32_t i) { return e.first < i; });
  return it != entries.end() && it->first == index ? it->second : 0.0;
}

double SparseVector::norm() const {
  double s = 0.0;
  for (const auto& [i, w] : entries) s += w * w;
  return std::sqrt(s);
}

double SparseVector::dot(const std::vector<double>& dense) const {
  double s = 0.0;
  for (const auto& [i, w] : entries) {
    if (i < dense.size()) s += w * dense[i];
  }
  return s;
}

SparseVector count_vectorize(const TokenList& doc, const Vocabulary& vocab) {
  std::map<std::uint32_t, double> counts;
  for (const auto& t : doc) {
    const auto idx = vocab.index_of(t);
    if (idx >= 0) counts[static_cast<std::uint32_t>(idx)] += 1.0;
  }
  SparseVector v;
  v.entries.assign(counts.begin(), counts.end());
  return v;
}

SparseVector tfidf_vectorize(const TokenList& doc, const Vocabulary& vocab, const IdfTable& idf) {
  SparseVector v = count_vectorize(doc, vocab);
  for (auto& [i, w] : v.entries) w *= idf.idf.at(i);
  const double norm = v.norm();
  if (norm > 0.0) {
    for (auto& e : v.entries) e.second /= norm;
  }
  return v;
}

}  // namespace fraudlens
