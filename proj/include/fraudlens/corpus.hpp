#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fraudlens/error.hpp"

namespace fraudlens {

enum class RawLabel { genuine, spam, scam };

/// Binary verdict; fraud is the positive class (spam or scam).
enum class BinaryLabel : int { genuine = 0, fraud = 1 };

std::string_view to_string(RawLabel label) noexcept;
std::string_view to_string(BinaryLabel label) noexcept;
std::optional<RawLabel> parse_raw_label(std::string_view text) noexcept;
std::optional<BinaryLabel> parse_binary_label(std::string_view text) noexcept;

constexpr BinaryLabel collapse_label(RawLabel raw) noexcept {
  return raw == RawLabel::genuine ? BinaryLabel::genuine : BinaryLabel::fraud;
}

struct Comment {
  std::string id;
  std::string post_id;
  std::optional<std::string> author;
  std::string text;
  std::optional<std::string> created_at;
  // Fields we do not interpret, kept so re-serialization is lossless.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  friend bool operator==(const Comment&, const Comment&) = default;
};

/// A comment with its three-way label. The binary label is always derived
/// from the raw one, so the two cannot disagree.
struct LabeledComment {
  Comment comment;
  RawLabel raw = RawLabel::genuine;

  BinaryLabel binary() const noexcept { return collapse_label(raw); }

  friend bool operator==(const LabeledComment&, const LabeledComment&) = default;
};

struct CorpusRecord {
  Comment comment;
  std::optional<RawLabel> label;

  friend bool operator==(const CorpusRecord&, const CorpusRecord&) = default;
};

struct RejectedLine {
  std::size_t line = 0;  // 1-based
  Errc code = Errc::MalformedLine;
  std::string message;
};

struct ParsedCorpus {
  std::vector<CorpusRecord> records;
  std::vector<RejectedLine> rejected;

  /// Records that carry a label, in input order.
  std::vector<LabeledComment> labeled() const;
  std::vector<Comment> comments() const;
};

/// Reads one JSON object per line. Bad lines are skipped and reported with
/// their line number; blank lines are ignored.
ParsedCorpus parse_corpus(std::istream& in);
ParsedCorpus load_corpus_file(const std::string& path);

nlohmann::ordered_json record_to_json(const CorpusRecord& record);
void write_corpus(std::ostream& out, const std::vector<CorpusRecord>& records);

/// Trims ASCII whitespace from both ends.
std::string_view trim(std::string_view text) noexcept;

struct SplitSpec {
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 42;
  bool stratified = true;

  /// Throws InvalidArgument unless each fraction is in (0,1) and they sum to 1.
  void validate() const;
};

/// Parses "0.8,0.1,0.1".
SplitSpec parse_split_fractions(std::string_view text);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// floor(f_train*n), floor(f_val*n), remainder.
SplitSizes split_sizes(std::size_t n, const SplitSpec& spec);

struct DatasetSplit {
  std::vector<LabeledComment> train;
  std::vector<LabeledComment> val;
  std::vector<LabeledComment> test;
};

enum class SplitPart { train, val, test };
std::optional<SplitPart> parse_split_part(std::string_view text) noexcept;

/// Deterministic partition of items. In stratified mode each part receives
/// its largest-remainder share of fraud items, so every part's fraud count
/// is within one item of the corpus proportion.
DatasetSplit split_dataset(const std::vector<LabeledComment>& items, const SplitSpec& spec);

}  // namespace fraudlens
