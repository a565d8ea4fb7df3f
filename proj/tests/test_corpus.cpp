#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "fraudlens/corpus.hpp"
#include "fraudlens/error.hpp"
#include "support.hpp"

using namespace fraudlens;
using fraudlens::testing::labeled;

namespace {

std::size_t fraud_count(const std::vector<LabeledComment>& v) {
  return static_cast<std::size_t>(
      std::count_if(v.begin(), v.end(), [](const auto& c) { return c.binary() == BinaryLabel::fraud; }));
}

std::vector<LabeledComment> balanced(std::size_t n_fraud, std::size_t n_genuine) {
  std::vector<LabeledComment> items;
  for (std::size_t i = 0; i < n_fraud + n_genuine; ++i) {
    items.push_back(labeled("c" + std::to_string(i), "text " + std::to_string(i),
                            i < n_fraud ? RawLabel::scam : RawLabel::genuine));
  }
  return items;
}

}  // namespace

TEST_CASE("labels collapse to the binary fraud class") {
  CHECK(collapse_label(RawLabel::genuine) == BinaryLabel::genuine);
  CHECK(collapse_label(RawLabel::spam) == BinaryLabel::fraud);
  CHECK(collapse_label(RawLabel::scam) == BinaryLabel::fraud);
  CHECK(parse_raw_label("spam") == RawLabel::spam);
  CHECK_FALSE(parse_raw_label("Spam").has_value());
  CHECK(parse_binary_label("fraud") == BinaryLabel::fraud);
  CHECK(to_string(BinaryLabel::genuine) == "genuine");
}

TEST_CASE("parse_corpus maps fields and reports bad lines") {
  std::istringstream in(
      R"({"id":"c1","post_id":"p1","text":"nice post","label":"genuine"})"
      "\n"
      R"({"id":"c2","post_id":"p1","text":"dm me for profits","label":"scam"})"
      "\n"
      R"({"id":"c3","text":""})"
      "\n");
  auto parsed = parse_corpus(in);
  REQUIRE(parsed.records.size() == 2);
  auto lab = parsed.labeled();
  REQUIRE(lab.size() == 2);
  CHECK(lab[0].binary() == BinaryLabel::genuine);
  CHECK(lab[1].binary() == BinaryLabel::fraud);
  CHECK(lab[1].raw == RawLabel::scam);
  REQUIRE(parsed.rejected.size() == 1);
  CHECK(parsed.rejected[0].line == 3);
  CHECK(parsed.rejected[0].code == Errc::MissingField);
}

TEST_CASE("parse_corpus edge cases") {
  std::istringstream in(
      "\n"
      "not json\n"
      R"({"id":"a","post_id":"p","text":"hi","label":"maybe"})"
      "\n"
      R"({"id":"b","post_id":"p","text":"hi","author":"ann","created_at":"2023-05-01T10:00:00Z","likes":3})"
      "\n"
      R"({"id":"b","post_id":"p","text":"again","label":"spam"})"
      "\n"
      R"({"id":"d","post_id":"p","text":"hi","created_at":"yesterday"})"
      "\n");
  auto parsed = parse_corpus(in);
  REQUIRE(parsed.records.size() == 1);
  const auto& b = parsed.records[0];
  CHECK(b.comment.id == "b");
  CHECK_FALSE(b.label.has_value());
  CHECK(b.comment.author == "ann");
  CHECK(b.comment.extra["likes"] == 3);
  REQUIRE(parsed.rejected.size() == 4);
  CHECK(parsed.rejected[0].line == 2);
  CHECK(parsed.rejected[0].code == Errc::MalformedLine);
  CHECK(parsed.rejected[1].code == Errc::UnknownLabel);
  CHECK(parsed.rejected[2].code == Errc::DuplicateId);
  CHECK(parsed.rejected[2].line == 5);
  CHECK(parsed.rejected[3].code == Errc::MalformedLine);
}

TEST_CASE("corpus records round-trip through JSONL") {
  std::istringstream in(
      R"({"id":"x","post_id":"p","author":"a","text":"héllo #tag","created_at":"2024-01-02T03:04:05Z","label":"spam","views":[1,2]})"
      "\n");
  auto parsed = parse_corpus(in);
  REQUIRE(parsed.records.size() == 1);
  std::ostringstream out;
  write_corpus(out, parsed.records);
  std::istringstream again(out.str());
  auto reparsed = parse_corpus(again);
  REQUIRE(reparsed.records.size() == 1);
  CHECK(reparsed.records[0] == parsed.records[0]);
}

TEST_CASE("load_corpus_file on a missing path is an Io error") {
  CHECK_THROWS_AS(load_corpus_file("/nonexistent/missing.jsonl"), Error);
  try {
    load_corpus_file("/nonexistent/missing.jsonl");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Io);
  }
}

TEST_CASE("split sizes follow floor, floor, remainder") {
  SplitSpec spec;
  auto s = split_sizes(3445, spec);
  CHECK(s.train == 2756);
  CHECK(s.val == 344);
  CHECK(s.test == 345);
  s = split_sizes(10, spec);
  CHECK(s.train == 8);
  CHECK(s.val == 1);
  CHECK(s.test == 1);
}

TEST_CASE("split spec validation") {
  CHECK_NOTHROW(parse_split_fractions("0.8,0.1,0.1").validate());
  CHECK_THROWS_AS(parse_split_fractions("0.8,0.1"), Error);
  CHECK_THROWS_AS(parse_split_fractions("0.8,0.3,0.1"), Error);
  CHECK_THROWS_AS(parse_split_fractions("1.0,0.0,0.0"), Error);
  CHECK_THROWS_AS(parse_split_fractions("a,b,c"), Error);
  CHECK(parse_split_part("validation") == SplitPart::val);
  CHECK_FALSE(parse_split_part("dev").has_value());
}

TEST_CASE("stratified split of 5 fraud and 5 genuine puts 4 fraud in train") {
  auto split = split_dataset(balanced(5, 5), SplitSpec{});
  CHECK(split.train.size() == 8);
  CHECK(split.val.size() == 1);
  CHECK(split.test.size() == 1);
  CHECK(fraud_count(split.train) == 4);
}

TEST_CASE("stratified split keeps the class ratio within one item per part") {
  // 3,445 comments, 33.4% fraud.
  const auto items = balanced(1151, 2294);
  const auto split = split_dataset(items, SplitSpec{});
  const double share = 1151.0 / 3445.0;
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    const double expected = share * static_cast<double>(part->size());
    CHECK(std::abs(static_cast<double>(fraud_count(*part)) - expected) <= 1.0);
  }
  CHECK(split.train.size() == 2756);
  CHECK(split.val.size() == 344);
  CHECK(split.test.size() == 345);
}

TEST_CASE("split is a deterministic partition") {
  const auto items = balanced(40, 60);
  for (bool stratified : {true, false}) {
    SplitSpec spec;
    spec.stratified = stratified;
    spec.seed = 7;
    const auto a = split_dataset(items, spec);
    const auto b = split_dataset(items, spec);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    std::set<std::string> ids;
    for (const auto* part : {&a.train, &a.val, &a.test}) {
      for (const auto& c : *part) ids.insert(c.comment.id);
    }
    CHECK(ids.size() == items.size());
    spec.seed = 8;
    CHECK_FALSE(split_dataset(items, spec).train == a.train);
  }
}

TEST_CASE("split errors") {
  CHECK_THROWS_AS(split_dataset({}, SplitSpec{}), Error);
  try {
    split_dataset(balanced(1, 1), SplitSpec{});
    FAIL("expected DegenerateSplit");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateSplit);
  }
}
