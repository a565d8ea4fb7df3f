#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fraudlens/append_log.hpp"
#include "fraudlens/classifiers.hpp"

namespace httplib {
class Server;
}

namespace fraudlens {

inline constexpr std::size_t kMaxCommentChars = 10'000;
inline constexpr std::size_t kMaxBatch = 200;

struct RateLimitConfig {
  bool enabled = true;
  double requests_per_second = 10.0;
  double burst = 10.0;
};

struct ServiceConfig {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string model_path;
  std::string report_path = "reports.jsonl";
  RateLimitConfig rate_limit;
  std::vector<std::string> cors_origins = {"*"};
  // Disables rate limiting.
  bool test_mode = false;

  /// Keys: host, port, model, reports, rate_limit, rate_burst, cors_origins,
  /// test_mode. Missing keys keep the current value.
  void merge_json(const nlohmann::json& j);
  /// FRAUDLENS_HOST, FRAUDLENS_PORT, FRAUDLENS_MODEL, FRAUDLENS_REPORTS,
  /// FRAUDLENS_RATE_LIMIT, FRAUDLENS_RATE_BURST, FRAUDLENS_CORS_ORIGINS,
  /// FRAUDLENS_TEST_MODE.
  void apply_env(const std::function<std::optional<std::string>(const char*)>& lookup);
};

/// Defaults, then the JSON file (if any), then environment overrides.
ServiceConfig load_service_config(const std::optional<std::string>& path,
                                  const std::function<std::optional<std::string>(const char*)>& env);

std::optional<std::string> process_env(const char* name);

struct ReportRecord {
  std::string comment;
  BinaryLabel predicted = BinaryLabel::genuine;
  BinaryLabel reported = BinaryLabel::fraud;
  std::optional<std::string> client_ts;
  std::string server_ts;
  std::string model;

  nlohmann::ordered_json to_json() const;
};

/// Append-only JSONL store of user reports; durable before append returns.
class ReportStore {
 public:
  explicit ReportStore(std::string path) : file_(std::move(path)) {}
  void append(const ReportRecord& record) { file_.append(record.to_json().dump()); }
  const std::string& path() const noexcept { return file_.path(); }

 private:
  AppendOnlyFile file_;
};

/// Per-client token bucket.
class TokenBucketLimiter {
 public:
  explicit TokenBucketLimiter(RateLimitConfig cfg) : cfg_(cfg) {}
  bool allow(const std::string& client, std::chrono::steady_clock::time_point now = std::chrono::steady_clock::now());

 private:
  struct Bucket {
    double tokens = 0.0;
    std::chrono::steady_clock::time_point last;
  };
  RateLimitConfig cfg_;
  std::mutex mutex_;
  std::unordered_map<std::string, Bucket> buckets_;
};

struct HttpResult {
  int status = 200;
  std::string body;  // JSON
};

/// Transport-independent request handling. The backend is immutable shared
/// state; until one is installed every classify call and /health answer 503.
class ClassificationService {
 public:
  explicit ClassificationService(std::shared_ptr<ReportStore> reports);

  void set_backend(std::shared_ptr<const Backend> backend);
  bool ready() const noexcept { return ready_.load(); }

  HttpResult handle_classify(std::string_view body) const;
  HttpResult handle_batch(std::string_view body) const;
  HttpResult handle_report(std::string_view body) const;
  HttpResult handle_health() const;

 private:
  std::shared_ptr<const Backend> backend() const;

  std::shared_ptr<ReportStore> reports_;
  mutable std::mutex backend_mutex_;
  std::shared_ptr<const Backend> backend_;
  std::atomic<bool> ready_{false};
  std::chrono::steady_clock::time_point started_ = std::chrono::steady_clock::now();
};

/// Binds a ClassificationService to HTTP routes:
///   POST /scam, POST /scam/batch, POST /report, GET /health
/// plus CORS preflight and optional rate limiting.
class HttpServer {
 public:
  HttpServer(ClassificationService& service, ServiceConfig cfg);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds cfg.host:cfg.port (port 0 picks a free one). Returns the port.
  int bind();
  /// Serves on a background thread; bind() first.
  void start();
  /// Blocks serving on the calling thread; bind() first.
  void run();
  void stop();
  int port() const noexcept { return port_; }

 private:
  ClassificationService& service_;
  ServiceConfig cfg_;
  std::unique_ptr<httplib::Server> server_;
  std::unique_ptr<TokenBucketLimiter> limiter_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace fraudlens
