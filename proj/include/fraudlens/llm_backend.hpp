#pragma once

#include <chrono>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fraudlens/classifiers.hpp"
#include "fraudlens/corpus.hpp"
#include "fraudlens/metrics.hpp"

namespace fraudlens {

// ---------------------------------------------------------------------------
// Transports

struct HttpRequest {
  std::string path;
  std::string body;  // JSON
  std::vector<std::pair<std::string, std::string>> headers;
  std::chrono::milliseconds timeout{30'000};
};

struct HttpReply {
  int status = 0;  // 0: no response (timeout, refused connection)
  std::string body;
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  /// May be called concurrently.
  virtual HttpReply send(const HttpRequest& request) = 0;
};

/// Stable key of a request for fixture lookup: FNV-1a 64 over path and body,
/// as 16 hex digits. Headers (and so credentials) are not part of it.
std::string request_hash(const HttpRequest& request);

/// Live HTTP(S) POSTs against a base URL such as "https://api.openai.com".
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::string base_url);
  HttpReply send(const HttpRequest& request) override;

 private:
  std::string base_url_;
};

/// Answers from recorded (request hash -> reply) pairs. A request with no
/// recording raises RemoteUnavailable instead of touching the network.
class ReplayTransport final : public Transport {
 public:
  ReplayTransport() = default;
  /// One JSON object per line: {"hash", "status", "body"}.
  explicit ReplayTransport(std::istream& fixture);
  static std::shared_ptr<ReplayTransport> from_file(const std::string& path);

  void add(std::string hash, HttpReply reply);
  HttpReply send(const HttpRequest& request) override;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, HttpReply> replies_;
};

/// Forwards to another transport and appends every answered exchange to a
/// fixture stream in the ReplayTransport format.
class RecordingTransport final : public Transport {
 public:
  RecordingTransport(std::shared_ptr<Transport> inner, std::ostream& sink);
  HttpReply send(const HttpRequest& request) override;

 private:
  std::shared_ptr<Transport> inner_;
  std::mutex mutex_;
  std::ostream& sink_;
};

/// Test double driven by a callback; counts calls.
class ScriptedTransport final : public Transport {
 public:
  using Handler = std::function<HttpReply(const HttpRequest&)>;
  explicit ScriptedTransport(Handler handler) : handler_(std::move(handler)) {}

  HttpReply send(const HttpRequest& request) override;
  std::size_t calls() const;
  std::vector<HttpRequest> requests() const;

 private:
  Handler handler_;
  mutable std::mutex mutex_;
  std::vector<HttpRequest> requests_;
};

struct RetryPolicy {
  std::uint32_t retries = 2;  // attempts = retries + 1
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;
};

/// Sends with retries on no-response, 5xx and 429. Returns the first 2xx
/// reply; otherwise throws RateLimited (last failure was 429) or
/// RemoteUnavailable.
HttpReply send_with_retry(Transport& transport, const HttpRequest& request, const RetryPolicy& policy);

// ---------------------------------------------------------------------------
// Zero-shot chat protocol

inline constexpr std::string_view kDefaultSystemPrompt =
    "You are a comment moderator at Instagram classifying comments.";
inline constexpr std::string_view kDefaultUserTemplate =
    "Classify the following Instagram comment as 'spam', 'scam', or 'genuine'. "
    "Reply only with the label for this comment: '{comment}'";

struct LlmConfig {
  std::string model_name = "gpt-4-1106-preview";
  std::uint32_t max_tokens = 10;
  double temperature = 0.0;
  std::uint64_t seed = 42;
  std::string system_prompt{kDefaultSystemPrompt};
  std::string user_template{kDefaultUserTemplate};
  std::chrono::milliseconds timeout{30'000};
  RetryPolicy retry;
  std::string api_base_url = "https://api.openai.com";
  std::string endpoint_path = "/v1/chat/completions";
  // Name of the environment variable holding the API key. The key itself is
  // never read from or written to a config file.
  std::string api_key_env = "OPENAI_API_KEY";

  void validate() const;
  nlohmann::ordered_json to_json() const;
  /// Missing keys keep their defaults. A literal "api_key" is rejected.
  static LlmConfig from_json(const nlohmann::json& j);
  static LlmConfig from_file(const std::string& path);
};

struct ChatPrompt {
  std::string system;
  std::string user;
};

ChatPrompt build_prompt(std::string_view comment, const LlmConfig& cfg);

/// Wire body: model, messages (system + user), max_tokens, temperature, seed.
nlohmann::ordered_json chat_request_body(const ChatPrompt& prompt, const LlmConfig& cfg);

/// Trim, lowercase, first whitespace-delimited word, strip surrounding
/// punctuation and quotes.
std::string normalize_reply(std::string_view reply);

/// Throws UnmappableReply unless the normalized reply is genuine, spam or scam.
RawLabel parse_reply(std::string_view reply);

/// Extracts choices[0].message.content; MalformedResponse otherwise.
std::string chat_reply_content(std::string_view response_body);

RawLabel classify_remote_label(std::string_view comment, const LlmConfig& cfg, Transport& transport);

/// Hard verdict: score 1.0 for fraud, 0.0 for genuine.
Prediction classify_remote(std::string_view comment, const LlmConfig& cfg, Transport& transport);

// ---------------------------------------------------------------------------
// Remote inference endpoint (same wire contract as our own /scam)

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8080";
  std::string path = "/scam";
  std::string name = "remote-endpoint";
  std::chrono::milliseconds timeout{10'000};
  RetryPolicy retry;

  nlohmann::ordered_json to_json() const;
  static EndpointConfig from_json(const nlohmann::json& j);
};

Prediction classify_inference_endpoint(std::string_view comment, const EndpointConfig& cfg, Transport& transport);

class RemoteChatBackend final : public Backend {
 public:
  RemoteChatBackend(LlmConfig cfg, std::shared_ptr<Transport> transport);
  Prediction classify(std::string_view text) const override;
  std::string name() const override { return cfg_.model_name; }
  std::string kind() const override { return "remote"; }

 private:
  LlmConfig cfg_;
  std::shared_ptr<Transport> transport_;
};

class InferenceEndpointBackend final : public Backend {
 public:
  InferenceEndpointBackend(EndpointConfig cfg, std::shared_ptr<Transport> transport);
  Prediction classify(std::string_view text) const override;
  std::string name() const override { return cfg_.name; }
  std::string kind() const override { return "remote"; }

 private:
  EndpointConfig cfg_;
  std::shared_ptr<Transport> transport_;
};

/// Remote model description stored in a model file's parameters.
ClassifierModel make_remote_model(const LlmConfig& cfg, std::optional<std::string> replay_fixture = std::nullopt);
ClassifierModel make_remote_model(const EndpointConfig& cfg,
                                  std::optional<std::string> replay_fixture = std::nullopt);

/// Native models get a NativeBackend. Remote models get the adapter named in
/// their parameters; `transport` overrides the one the model would open
/// (live HTTP, or replay when the model names a fixture).
std::unique_ptr<Backend> open_backend(const ClassifierModel& model, std::shared_ptr<Transport> transport = nullptr);

// ---------------------------------------------------------------------------
// Evaluation

struct LlmRunResult {
  ConfusionMatrix matrix;
  MetricSet metrics;
  // Replies outside the label set; counted as genuine in the matrix.
  std::size_t unmappable = 0;
};

/// Classifies every labeled comment `runs` times. Each run yields its own
/// metric row, since remote models are not deterministic.
std::vector<LlmRunResult> evaluate_llm(const std::vector<LabeledComment>& items, const LlmConfig& cfg,
                                       Transport& transport, std::uint32_t runs = 1);

}  // namespace fraudlens
