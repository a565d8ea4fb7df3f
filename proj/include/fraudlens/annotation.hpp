#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fraudlens/append_log.hpp"
#include "fraudlens/corpus.hpp"
#include "fraudlens/metrics.hpp"

namespace fraudlens {

enum class RaterGroup { expert, amateur, unspecified };

std::string_view to_string(RaterGroup group) noexcept;
std::optional<RaterGroup> parse_rater_group(std::string_view text) noexcept;

struct Rater {
  std::string id;
  RaterGroup group = RaterGroup::unspecified;

  friend bool operator==(const Rater&, const Rater&) = default;
};

struct AuditEntry {
  std::string rater;
  std::string item;
  RawLabel previous = RawLabel::genuine;
  RawLabel replacement = RawLabel::genuine;
  std::string timestamp;

  friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

struct AnnotationSession {
  std::vector<Comment> items;
  std::vector<Rater> raters;
  // (rater id, item id) -> label
  std::map<std::pair<std::string, std::string>, RawLabel> ratings;
  std::vector<AuditEntry> audit;
  std::string created_at;

  const Rater* find_rater(std::string_view id) const;
  const Comment* find_item(std::string_view id) const;

  friend bool operator==(const AnnotationSession&, const AnnotationSession&) = default;
};

// Pure session operations; each returns the updated session.
AnnotationSession register_rater(AnnotationSession session, const Rater& rater);
AnnotationSession add_item(AnnotationSession session, const Comment& item);
AnnotationSession record_rating(AnnotationSession session, std::string_view rater, std::string_view item,
                                RawLabel label, bool overwrite = false, std::string timestamp = {});

/// Lowest-indexed item the rater has not rated; nullopt once all are done.
std::optional<Comment> next_item(const AnnotationSession& session, std::string_view rater);

enum class RatingScheme { three_way, binary };
std::string_view to_string(RatingScheme scheme) noexcept;

struct RatingMatrixBuild {
  RatingMatrix matrix;
  std::vector<std::string> item_ids;  // one per matrix row
  std::vector<std::string> excluded;  // items not rated by every rater in the set
  std::size_t raters = 0;
};

/// Rows are the items rated by every rater (optionally restricted to one
/// group). Three-way columns: genuine, spam, scam. Binary: genuine, fraud.
RatingMatrixBuild build_rating_matrix(const AnnotationSession& session, RatingScheme scheme,
                                      std::optional<RaterGroup> group = std::nullopt);

/// Fleiss kappa for one group; TooFewRaters when it has fewer than two.
double group_kappa(const AnnotationSession& session, RaterGroup group, RatingScheme scheme);

struct GroupAgreement {
  RaterGroup group = RaterGroup::unspecified;
  std::size_t raters = 0;
  std::size_t items_used = 0;
  std::size_t items_excluded = 0;
  std::optional<double> kappa;
  std::optional<Errc> error;  // set instead of kappa when the group cannot be scored
  std::string message;
};

/// One entry per group that has at least one rater, in enum order.
std::vector<GroupAgreement> agreement_by_group(const AnnotationSession& session, RatingScheme scheme);

/// Rebuilds a session from its event log. A torn final line (no trailing
/// newline, unparseable) is dropped; any other bad line is an error.
AnnotationSession replay_session(std::istream& log);

/// A session backed by an append-only JSONL event log. Every mutation is
/// validated against the in-memory state, made durable, then applied.
class SessionLog {
 public:
  /// Opens or creates the log at `path`.
  explicit SessionLog(const std::string& path);

  const AnnotationSession& session() const noexcept { return session_; }

  void register_rater(const Rater& rater);
  void add_item(const Comment& item);
  void record_rating(std::string_view rater, std::string_view item, RawLabel label, bool overwrite = false);

 private:
  AnnotationSession session_;
  std::unique_ptr<AppendOnlyFile> file_;
};

}  // namespace fraudlens
