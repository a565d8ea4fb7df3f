#include "fraudlens/annotation.hpp"

#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>

#include "fraudlens/error.hpp"

namespace fraudlens {

using nlohmann::ordered_json;

std::string_view to_string(RaterGroup group) noexcept {
  switch (group) {
    case RaterGroup::expert: return "expert";
    case RaterGroup::amateur: return "amateur";
    case RaterGroup::unspecified: return "unspecified";
  }
  return "unspecified";
}

std::optional<RaterGroup> parse_rater_group(std::string_view text) noexcept {
  if (text == "expert") return RaterGroup::expert;
  if (text == "amateur") return RaterGroup::amateur;
  if (text == "unspecified") return RaterGroup::unspecified;
  return std::nullopt;
}

std::string_view to_string(RatingScheme scheme) noexcept {
  return scheme == RatingScheme::binary ? "binary" : "three";
}

const Rater* AnnotationSession::find_rater(std::string_view id) const {
  for (const auto& r : raters) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

const Comment* AnnotationSession::find_item(std::string_view id) const {
  for (const auto& c : items) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

AnnotationSession register_rater(AnnotationSession session, const Rater& rater) {
  if (rater.id.empty()) throw Error(Errc::InvalidArgument, "rater id is empty");
  if (const auto* existing = session.find_rater(rater.id)) {
    if (existing->group != rater.group) {
      throw Error(Errc::DuplicateId, "rater '" + rater.id + "' is already registered in another group");
    }
    return session;
  }
  session.raters.push_back(rater);
  return session;
}

AnnotationSession add_item(AnnotationSession session, const Comment& item) {
  if (item.id.empty()) throw Error(Errc::MissingField, "item id is empty");
  if (session.find_item(item.id)) throw Error(Errc::DuplicateId, "item '" + item.id + "' already in session");
  session.items.push_back(item);
  return session;
}

AnnotationSession record_rating(AnnotationSession session, std::string_view rater, std::string_view item,
                                RawLabel label, bool overwrite, std::string timestamp) {
  if (!session.find_rater(rater)) throw Error(Errc::UnknownRater, "unknown rater '" + std::string(rater) + "'");
  if (!session.find_item(item)) throw Error(Errc::UnknownItem, "unknown item '" + std::string(item) + "'");
  auto key = std::make_pair(std::string(rater), std::string(item));
  auto it = session.ratings.find(key);
  if (it != session.ratings.end()) {
    if (!overwrite) {
      throw Error(Errc::DuplicateRating, "rater '" + key.first + "' already rated item '" + key.second + "'");
    }
    session.audit.push_back({key.first, key.second, it->second, label, std::move(timestamp)});
    it->second = label;
    return session;
  }
  session.ratings.emplace(std::move(key), label);
  return session;
}

std::optional<Comment> next_item(const AnnotationSession& session, std::string_view rater) {
  if (!session.find_rater(rater)) throw Error(Errc::UnknownRater, "unknown rater '" + std::string(rater) + "'");
  const std::string r(rater);
  for (const auto& item : session.items) {
    if (!session.ratings.contains({r, item.id})) return item;
  }
  return std::nullopt;
}

RatingMatrixBuild build_rating_matrix(const AnnotationSession& session, RatingScheme scheme,
                                      std::optional<RaterGroup> group) {
  std::vector<const Rater*> raters;
  for (const auto& r : session.raters) {
    if (!group || r.group == *group) raters.push_back(&r);
  }
  if (raters.size() < 2) throw Error(Errc::TooFewRaters, "need at least two raters");

  const std::size_t categories = scheme == RatingScheme::binary ? 2 : 3;
  std::vector<std::vector<std::uint32_t>> rows;
  std::vector<std::string> ids, excluded;
  for (const auto& item : session.items) {
    std::vector<std::uint32_t> row(categories, 0);
    bool complete = true;
    for (const auto* r : raters) {
      auto it = session.ratings.find({r->id, item.id});
      if (it == session.ratings.end()) {
        complete = false;
        break;
      }
      const auto col = scheme == RatingScheme::binary ? static_cast<std::size_t>(collapse_label(it->second))
                                                      : static_cast<std::size_t>(it->second);
      ++row[col];
    }
    if (complete) {
      rows.push_back(std::move(row));
      ids.push_back(item.id);
    } else {
      excluded.push_back(item.id);
    }
  }
  if (rows.empty()) throw Error(Errc::NoFullyRatedItems, "no item was rated by every rater");
  return {RatingMatrix(std::move(rows)), std::move(ids), std::move(excluded), raters.size()};
}

double group_kappa(const AnnotationSession& session, RaterGroup group, RatingScheme scheme) {
  return fleiss_kappa(build_rating_matrix(session, scheme, group).matrix);
}

std::vector<GroupAgreement> agreement_by_group(const AnnotationSession& session, RatingScheme scheme) {
  std::vector<GroupAgreement> out;
  for (auto g : {RaterGroup::expert, RaterGroup::amateur, RaterGroup::unspecified}) {
    GroupAgreement a;
    a.group = g;
    for (const auto& r : session.raters) a.raters += r.group == g ? 1 : 0;
    if (a.raters == 0) continue;
    try {
      auto build = build_rating_matrix(session, scheme, g);
      a.items_used = build.item_ids.size();
      a.items_excluded = build.excluded.size();
      a.kappa = fleiss_kappa(build.matrix);
    } catch (const Error& e) {
      a.error = e.code();
      a.message = e.what();
    }
    out.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Event log

namespace {

ordered_json event(const char* name) {
  ordered_json j;
  j["event"] = name;
  j["ts"] = utc_timestamp();
  return j;
}

AnnotationSession apply_event(AnnotationSession s, const nlohmann::json& e) {
  const auto type = e.at("event").get<std::string>();
  const auto ts = e.value("ts", std::string());
  if (type == "create") {
    s.created_at = ts;
  } else if (type == "register_rater") {
    auto group = parse_rater_group(e.value("group", "unspecified"));
    if (!group) throw Error(Errc::MalformedLine, "unknown rater group");
    s = register_rater(std::move(s), {e.at("rater").get<std::string>(), *group});
  } else if (type == "add_item") {
    std::string line = e.at("item").dump();
    std::istringstream in(line);
    auto parsed = parse_corpus(in);
    if (parsed.records.size() != 1) throw Error(Errc::MalformedLine, "bad item record");
    s = add_item(std::move(s), parsed.records[0].comment);
  } else if (type == "rate") {
    auto label = parse_raw_label(e.at("label").get<std::string>());
    if (!label) throw Error(Errc::UnknownLabel, "unknown label in rating");
    s = record_rating(std::move(s), e.at("rater").get<std::string>(), e.at("item").get<std::string>(), *label,
                      e.value("overwrite", false), ts);
  } else {
    throw Error(Errc::MalformedLine, "unknown event '" + type + "'");
  }
  return s;
}

}  // namespace

AnnotationSession replay_session(std::istream& log) {
  AnnotationSession s;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(log, line)) {
    ++line_no;
    const bool torn = log.eof();  // last line without a newline
    if (trim(line).empty()) continue;
    nlohmann::json e;
    try {
      e = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      if (torn) break;
      throw Error(Errc::MalformedLine, "session log line " + std::to_string(line_no) + " is not JSON");
    }
    try {
      s = apply_event(std::move(s), e);
    } catch (const nlohmann::json::exception& ex) {
      throw Error(Errc::MalformedLine, "session log line " + std::to_string(line_no) + ": " + ex.what());
    } catch (const Error& ex) {
      throw Error(ex.code(), "session log line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return s;
}

SessionLog::SessionLog(const std::string& path) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (!fresh) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot read session '" + path + "'");
    session_ = replay_session(in);
  }
  file_ = std::make_unique<AppendOnlyFile>(path);
  if (fresh) {
    auto e = event("create");
    file_->append(e.dump());
    session_.created_at = e["ts"].get<std::string>();
  }
}

void SessionLog::register_rater(const Rater& rater) {
  if (const auto* existing = session_.find_rater(rater.id); existing && existing->group == rater.group) return;
  auto next = fraudlens::register_rater(session_, rater);
  auto e = event("register_rater");
  e["rater"] = rater.id;
  e["group"] = std::string(to_string(rater.group));
  file_->append(e.dump());
  session_ = std::move(next);
}

void SessionLog::add_item(const Comment& item) {
  auto next = fraudlens::add_item(session_, item);
  auto e = event("add_item");
  e["item"] = record_to_json({item, std::nullopt});
  file_->append(e.dump());
  session_ = std::move(next);
}

void SessionLog::record_rating(std::string_view rater, std::string_view item, RawLabel label, bool overwrite) {
  auto e = event("rate");
  auto next = fraudlens::record_rating(session_, rater, item, label, overwrite, e["ts"].get<std::string>());
  e["rater"] = rater;
  e["item"] = item;
  e["label"] = std::string(to_string(label));
  e["overwrite"] = overwrite;
  file_->append(e.dump());
  session_ = std::move(next);
}

}  // namespace fraudlens
