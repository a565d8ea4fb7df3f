#include "fraudlens/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <regex>
#include <unordered_set>

#include "fraudlens/random.hpp"

namespace fraudlens {

using nlohmann::ordered_json;

std::string_view to_string(RawLabel label) noexcept {
  switch (label) {
    case RawLabel::genuine: return "genuine";
    case RawLabel::spam: return "spam";
    case RawLabel::scam: return "scam";
  }
  return "genuine";
}

std::string_view to_string(BinaryLabel label) noexcept {
  return label == BinaryLabel::fraud ? "fraud" : "genuine";
}

std::optional<RawLabel> parse_raw_label(std::string_view text) noexcept {
  if (text == "genuine") return RawLabel::genuine;
  if (text == "spam") return RawLabel::spam;
  if (text == "scam") return RawLabel::scam;
  return std::nullopt;
}

std::optional<BinaryLabel> parse_binary_label(std::string_view text) noexcept {
  if (text == "genuine") return BinaryLabel::genuine;
  if (text == "fraud") return BinaryLabel::fraud;
  return std::nullopt;
}

std::string_view trim(std::string_view text) noexcept {
  constexpr std::string_view kSpace = " \t\n\r\f\v";
  const auto first = text.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(kSpace);
  return text.substr(first, last - first + 1);
}

namespace {

const std::regex& iso8601() {
  static const std::regex re(
      R"(^\d{4}-\d{2}-\d{2}([T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:?\d{2})?)?$)");
  return re;
}

std::optional<std::string> optional_string(const ordered_json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error(Errc::MalformedLine, std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

CorpusRecord parse_record(std::string_view line) {
  ordered_json obj;
  try {
    obj = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::MalformedLine, e.what());
  }
  if (!obj.is_object()) throw Error(Errc::MalformedLine, "record is not a JSON object");

  CorpusRecord rec;
  auto id = optional_string(obj, "id");
  if (!id || id->empty()) throw Error(Errc::MissingField, "missing 'id'");
  auto text = optional_string(obj, "text");
  if (!text) throw Error(Errc::MissingField, "missing 'text'");
  if (trim(*text).empty()) throw Error(Errc::MissingField, "'text' is empty");

  rec.comment.id = std::move(*id);
  rec.comment.text = std::move(*text);
  rec.comment.post_id = optional_string(obj, "post_id").value_or("");
  rec.comment.author = optional_string(obj, "author");
  rec.comment.created_at = optional_string(obj, "created_at");
  if (rec.comment.created_at && !std::regex_match(*rec.comment.created_at, iso8601())) {
    throw Error(Errc::MalformedLine, "'created_at' is not an ISO-8601 timestamp");
  }

  if (auto it = obj.find("label"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw Error(Errc::UnknownLabel, "label must be a string");
    auto label = parse_raw_label(it->get<std::string>());
    if (!label) throw Error(Errc::UnknownLabel, "unknown label '" + it->get<std::string>() + "'");
    rec.label = *label;
  }

  static const std::unordered_set<std::string> kKnown = {"id",     "post_id", "author",
                                                         "text",   "label",   "created_at"};
  for (auto& [key, value] : obj.items()) {
    if (!kKnown.contains(key)) rec.comment.extra[key] = value;
  }
  return rec;
}

}  // namespace

std::vector<LabeledComment> ParsedCorpus::labeled() const {
  std::vector<LabeledComment> out;
  for (const auto& r : records) {
    if (r.label) out.push_back({r.comment, *r.label});
  }
  return out;
}

std::vector<Comment> ParsedCorpus::comments() const {
  std::vector<Comment> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.comment);
  return out;
}

ParsedCorpus parse_corpus(std::istream& in) {
  ParsedCorpus result;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    try {
      auto rec = parse_record(line);
      if (!seen.insert(rec.comment.id).second) {
        throw Error(Errc::DuplicateId, "duplicate id '" + rec.comment.id + "'");
      }
      result.records.push_back(std::move(rec));
    } catch (const Error& e) {
      result.rejected.push_back({line_no, e.code(), e.what()});
    }
  }
  return result;
}

ParsedCorpus load_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open corpus '" + path + "'");
  return parse_corpus(in);
}

ordered_json record_to_json(const CorpusRecord& record) {
  const auto& c = record.comment;
  ordered_json obj = ordered_json::object();
  obj["id"] = c.id;
  if (!c.post_id.empty()) obj["post_id"] = c.post_id;
  if (c.author) obj["author"] = *c.author;
  obj["text"] = c.text;
  if (record.label) obj["label"] = std::string(to_string(*record.label));
  if (c.created_at) obj["created_at"] = *c.created_at;
  for (auto& [key, value] : c.extra.items()) obj[key] = value;
  return obj;
}

void write_corpus(std::ostream& out, const std::vector<CorpusRecord>& records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

void SplitSpec::validate() const {
  for (double f : {train_fraction, val_fraction, test_fraction}) {
    if (!(f > 0.0 && f < 1.0)) {
      throw Error(Errc::InvalidArgument, "split fractions must lie strictly between 0 and 1");
    }
  }
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    throw Error(Errc::InvalidArgument, "split fractions must sum to 1");
  }
}

SplitSpec parse_split_fractions(std::string_view text) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    std::string piece(trim(text.substr(start, end - start)));
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(piece, &used));
      if (used != piece.size()) throw std::invalid_argument(piece);
    } catch (const std::exception&) {
      throw Error(Errc::InvalidArgument, "bad split fraction '" + piece + "'");
    }
    start = end + 1;
  }
  if (parts.size() != 3) throw Error(Errc::InvalidArgument, "split needs three fractions");
  SplitSpec spec;
  spec.train_fraction = parts[0];
  spec.val_fraction = parts[1];
  spec.test_fraction = parts[2];
  spec.validate();
  return spec;
}

std::optional<SplitPart> parse_split_part(std::string_view text) noexcept {
  if (text == "train") return SplitPart::train;
  if (text == "val" || text == "validation") return SplitPart::val;
  if (text == "test") return SplitPart::test;
  return std::nullopt;
}

SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  // The epsilon absorbs products such as 0.29*100 = 28.999999999999996.
  auto part = [n](double f) {
    return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
  };
  SplitSizes s;
  s.train = part(spec.train_fraction);
  s.val = part(spec.val_fraction);
  s.test = n - s.train - s.val;
  return s;
}

namespace {

// Largest-remainder apportionment of `total` items over parts proportional
// to `sizes`. Ties go to the earlier part.
std::array<std::size_t, 3> apportion(std::size_t total, const SplitSizes& sizes, std::size_t n) {
  const std::array<std::size_t, 3> sz = {sizes.train, sizes.val, sizes.test};
  std::array<std::size_t, 3> out{};
  std::array<std::size_t, 3> remainder{};  // numerators over n
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t scaled = total * sz[i];
    out[i] = scaled / n;
    remainder[i] = scaled % n;
    assigned += out[i];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; ++k) {
    ++out[order[k % 3]];
    ++assigned;
  }
  return out;
}

}  // namespace

DatasetSplit split_dataset(const std::vector<LabeledComment>& items, const SplitSpec& spec) {
  if (items.empty()) throw Error(Errc::EmptyInput, "cannot split an empty dataset");
  const std::size_t n = items.size();
  const SplitSizes sizes = split_sizes(n, spec);
  if (sizes.train == 0 || sizes.val == 0 || sizes.test == 0) {
    throw Error(Errc::DegenerateSplit, "a split part would be empty for n=" + std::to_string(n));
  }

  Rng rng(spec.seed);
  std::array<std::vector<std::size_t>, 3> parts;

  if (spec.stratified) {
    std::vector<std::size_t> fraud, genuine;
    for (std::size_t i = 0; i < n; ++i) {
      (items[i].binary() == BinaryLabel::fraud ? fraud : genuine).push_back(i);
    }
    rng.shuffle(fraud);
    rng.shuffle(genuine);
    const auto fraud_share = apportion(fraud.size(), sizes, n);
    const std::array<std::size_t, 3> sz = {sizes.train, sizes.val, sizes.test};
    std::size_t f = 0, g = 0;
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t k = 0; k < fraud_share[p]; ++k) parts[p].push_back(fraud[f++]);
      for (std::size_t k = fraud_share[p]; k < sz[p]; ++k) parts[p].push_back(genuine[g++]);
    }
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    parts[0].assign(order.begin(), order.begin() + sizes.train);
    parts[1].assign(order.begin() + sizes.train, order.begin() + sizes.train + sizes.val);
    parts[2].assign(order.begin() + sizes.train + sizes.val, order.end());
  }

  DatasetSplit out;
  std::array<std::vector<LabeledComment>*, 3> dest = {&out.train, &out.val, &out.test};
  for (std::size_t p = 0; p < 3; ++p) {
    std::sort(parts[p].begin(), parts[p].end());
    dest[p]->reserve(parts[p].size());
    for (auto idx : parts[p]) dest[p]->push_back(items[idx]);
  }
  return out;
}

}  // namespace fraudlens
