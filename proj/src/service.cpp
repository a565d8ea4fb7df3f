#include "fraudlens/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <variant>

#include "fraudlens/error.hpp"

namespace fraudlens {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    auto piece = trim(text.substr(start, end - start));
    if (!piece.empty()) out.emplace_back(piece);
    start = end + 1;
  }
  return out;
}

bool truthy(std::string_view v) { return v == "1" || v == "true" || v == "yes" || v == "on"; }

}  // namespace

void ServiceConfig::merge_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "service config must be an object");
  try {
    host = j.value("host", host);
    port = j.value("port", port);
    model_path = j.value("model", model_path);
    report_path = j.value("reports", report_path);
    rate_limit.requests_per_second = j.value("rate_limit", rate_limit.requests_per_second);
    rate_limit.burst = j.value("rate_burst", rate_limit.burst);
    if (auto it = j.find("cors_origins"); it != j.end()) {
      cors_origins = it->is_string() ? split_list(it->get<std::string>()) : it->get<std::vector<std::string>>();
    }
    test_mode = j.value("test_mode", test_mode);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bad service config: ") + e.what());
  }
}

void ServiceConfig::apply_env(const std::function<std::optional<std::string>(const char*)>& lookup) {
  auto number = [](const std::string& v, const char* name) {
    try {
      std::size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw Error(Errc::InvalidArgument, std::string(name) + " is not a number");
    }
  };
  if (auto v = lookup("FRAUDLENS_HOST")) host = *v;
  if (auto v = lookup("FRAUDLENS_PORT")) port = static_cast<int>(number(*v, "FRAUDLENS_PORT"));
  if (auto v = lookup("FRAUDLENS_MODEL")) model_path = *v;
  if (auto v = lookup("FRAUDLENS_REPORTS")) report_path = *v;
  if (auto v = lookup("FRAUDLENS_RATE_LIMIT")) rate_limit.requests_per_second = number(*v, "FRAUDLENS_RATE_LIMIT");
  if (auto v = lookup("FRAUDLENS_RATE_BURST")) rate_limit.burst = number(*v, "FRAUDLENS_RATE_BURST");
  if (auto v = lookup("FRAUDLENS_CORS_ORIGINS")) cors_origins = split_list(*v);
  if (auto v = lookup("FRAUDLENS_TEST_MODE")) test_mode = truthy(*v);
}

ServiceConfig load_service_config(const std::optional<std::string>& path,
                                  const std::function<std::optional<std::string>(const char*)>& env) {
  ServiceConfig cfg;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw Error(Errc::Io, "cannot open service config '" + *path + "'");
    try {
      cfg.merge_json(json::parse(in));
    } catch (const json::parse_error& e) {
      throw Error(Errc::InvalidArgument, std::string("bad service config: ") + e.what());
    }
  }
  cfg.apply_env(env);
  return cfg;
}

std::optional<std::string> process_env(const char* name) {
  const char* v = std::getenv(name);
  if (!v) return std::nullopt;
  return std::string(v);
}

ordered_json ReportRecord::to_json() const {
  ordered_json j;
  j["comment"] = comment;
  j["predicted"] = std::string(fraudlens::to_string(predicted));
  j["reported"] = std::string(fraudlens::to_string(reported));
  if (client_ts) j["client_ts"] = *client_ts;
  j["server_ts"] = server_ts;
  j["model"] = model;
  return j;
}

bool TokenBucketLimiter::allow(const std::string& client, std::chrono::steady_clock::time_point now) {
  if (!cfg_.enabled) return true;
  std::lock_guard lock(mutex_);
  auto [it, inserted] = buckets_.try_emplace(client, Bucket{cfg_.burst, now});
  auto& b = it->second;
  if (!inserted) {
    const double elapsed = std::chrono::duration<double>(now - b.last).count();
    b.tokens = std::min(cfg_.burst, b.tokens + elapsed * cfg_.requests_per_second);
    b.last = now;
  }
  if (b.tokens < 1.0) return false;
  b.tokens -= 1.0;
  return true;
}

// ---------------------------------------------------------------------------

namespace {

HttpResult error_result(int status, std::string_view message) {
  return {status, ordered_json{{"error", message}}.dump()};
}

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::optional<json> parse_object(std::string_view body) {
  try {
    auto j = json::parse(body);
    if (j.is_object()) return j;
  } catch (const json::parse_error&) {
  }
  return std::nullopt;
}

// Validates one comment; returns the trimmed text or an error result.
std::variant<std::string, HttpResult> check_comment(const json& value) {
  if (!value.is_string()) return error_result(400, "comment must be a string");
  const auto& raw = value.get_ref<const std::string&>();
  const auto text = trim(raw);
  if (text.empty()) return error_result(422, "comment is empty");
  if (utf8_length(text) > kMaxCommentChars) return error_result(422, "comment exceeds 10000 characters");
  return std::string(text);
}

int status_for(const Error& e) {
  switch (e.code()) {
    case Errc::RemoteUnavailable:
    case Errc::RateLimited: return 503;
    case Errc::UnmappableReply:
    case Errc::MalformedResponse: return 502;
    case Errc::EmptyComment: return 422;
    default: return 500;
  }
}

ordered_json verdict_json(const Prediction& p, const std::string& model) {
  ordered_json j;
  j["label"] = std::string(to_string(p.label));
  j["score"] = p.score;
  j["model"] = model;
  return j;
}

}  // namespace

ClassificationService::ClassificationService(std::shared_ptr<ReportStore> reports) : reports_(std::move(reports)) {}

void ClassificationService::set_backend(std::shared_ptr<const Backend> backend) {
  {
    std::lock_guard lock(backend_mutex_);
    backend_ = std::move(backend);
  }
  ready_.store(backend_ != nullptr);
}

std::shared_ptr<const Backend> ClassificationService::backend() const {
  std::lock_guard lock(backend_mutex_);
  return backend_;
}

HttpResult ClassificationService::handle_classify(std::string_view body) const {
  auto req = parse_object(body);
  if (!req || !req->contains("comment")) return error_result(400, "body must be {\"comment\": string}");
  auto checked = check_comment((*req)["comment"]);
  if (auto* err = std::get_if<HttpResult>(&checked)) return *err;
  auto model = backend();
  if (!model) return error_result(503, "model is not loaded");
  try {
    return {200, verdict_json(model->classify(std::get<std::string>(checked)), model->name()).dump()};
  } catch (const Error& e) {
    return error_result(status_for(e), errc_name(e.code()));
  }
}

HttpResult ClassificationService::handle_batch(std::string_view body) const {
  auto req = parse_object(body);
  if (!req || !req->contains("comments") || !(*req)["comments"].is_array()) {
    return error_result(400, "body must be {\"comments\": [string, ...]}");
  }
  const auto& comments = (*req)["comments"];
  if (comments.empty() || comments.size() > kMaxBatch) {
    return error_result(422, "batch must hold between 1 and 200 comments");
  }
  auto model = backend();
  if (!model) return error_result(503, "model is not loaded");

  ordered_json results = ordered_json::array();
  for (const auto& c : comments) {
    auto checked = check_comment(c);
    if (auto* err = std::get_if<HttpResult>(&checked)) {
      results.push_back(ordered_json::parse(err->body));
      continue;
    }
    try {
      results.push_back(verdict_json(model->classify(std::get<std::string>(checked)), model->name()));
    } catch (const Error& e) {
      results.push_back(ordered_json{{"error", errc_name(e.code())}});
    }
  }
  return {200, ordered_json{{"results", std::move(results)}}.dump()};
}

HttpResult ClassificationService::handle_report(std::string_view body) const {
  auto req = parse_object(body);
  if (!req) return error_result(400, "body must be a JSON object");
  auto label_of = [&](const char* key) -> std::optional<BinaryLabel> {
    auto it = req->find(key);
    if (it == req->end() || !it->is_string()) return std::nullopt;
    return parse_binary_label(it->get<std::string>());
  };
  auto comment_it = req->find("comment");
  if (comment_it == req->end() || !comment_it->is_string() || trim(comment_it->get<std::string>()).empty()) {
    return error_result(400, "report needs a non-empty comment");
  }
  const auto predicted = label_of("predicted");
  const auto reported = label_of("reported");
  if (!predicted || !reported) return error_result(400, "predicted and reported must be genuine or fraud");
  if (*predicted == *reported) return error_result(422, "a report must disagree with the prediction");

  ReportRecord rec;
  rec.comment = comment_it->get<std::string>();
  rec.predicted = *predicted;
  rec.reported = *reported;
  if (auto it = req->find("client_ts"); it != req->end() && !it->is_null()) {
    if (!it->is_string()) return error_result(400, "client_ts must be a string");
    rec.client_ts = it->get<std::string>();
  }
  rec.server_ts = utc_timestamp();
  if (auto model = backend()) rec.model = model->name();
  try {
    reports_->append(rec);
  } catch (const Error&) {
    return error_result(500, "report could not be stored");
  }
  return {202, ordered_json{{"accepted", true}}.dump()};
}

HttpResult ClassificationService::handle_health() const {
  auto model = backend();
  if (!model) return {503, ordered_json{{"status", "starting"}}.dump()};
  ordered_json j;
  j["status"] = "ok";
  j["model"] = model->name();
  j["kind"] = model->kind();
  j["uptime_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  return {200, j.dump()};
}

// ---------------------------------------------------------------------------

HttpServer::HttpServer(ClassificationService& service, ServiceConfig cfg)
    : service_(service), cfg_(std::move(cfg)), server_(std::make_unique<httplib::Server>()) {
  RateLimitConfig rl = cfg_.rate_limit;
  rl.enabled = rl.enabled && !cfg_.test_mode;
  limiter_ = std::make_unique<TokenBucketLimiter>(rl);

  server_->new_task_queue = [] { return new httplib::ThreadPool(16); };

  auto allow_origin = [this](const httplib::Request& req, httplib::Response& res) {
    const auto origin = req.get_header_value("Origin");
    const bool any = std::find(cfg_.cors_origins.begin(), cfg_.cors_origins.end(), "*") != cfg_.cors_origins.end();
    if (any) {
      res.set_header("Access-Control-Allow-Origin", "*");
    } else if (!origin.empty() &&
               std::find(cfg_.cors_origins.begin(), cfg_.cors_origins.end(), origin) != cfg_.cors_origins.end()) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
    }
  };

  server_->set_pre_routing_handler([this, allow_origin](const httplib::Request& req, httplib::Response& res) {
    if (req.method == "OPTIONS") return httplib::Server::HandlerResponse::Unhandled;
    if (!limiter_->allow(req.remote_addr)) {
      allow_origin(req, res);
      res.status = 429;
      res.set_content(R"({"error":"rate limited"})", "application/json");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  auto bind_route = [this, allow_origin](auto handler) {
    return [this, allow_origin, handler](const httplib::Request& req, httplib::Response& res) {
      const HttpResult r = handler(req);
      allow_origin(req, res);
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
  };
  server_->Post("/scam", bind_route([this](const httplib::Request& req) { return service_.handle_classify(req.body); }));
  server_->Post("/scam/batch",
                bind_route([this](const httplib::Request& req) { return service_.handle_batch(req.body); }));
  server_->Post("/report", bind_route([this](const httplib::Request& req) { return service_.handle_report(req.body); }));
  server_->Get("/health", bind_route([this](const httplib::Request&) { return service_.handle_health(); }));
  server_->Options(".*", [allow_origin](const httplib::Request& req, httplib::Response& res) {
    allow_origin(req, res);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Max-Age", "600");
    res.status = 204;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  if (cfg_.port == 0) {
    port_ = server_->bind_to_any_port(cfg_.host);
  } else {
    port_ = server_->bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1;
  }
  if (port_ < 0) {
    throw Error(Errc::Io, "cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
  }
  return port_;
}

void HttpServer::start() {
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void HttpServer::run() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace fraudlens
