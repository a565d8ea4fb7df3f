#include "fraudlens/llm_backend.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <thread>

#include "fraudlens/error.hpp"

namespace fraudlens {

using nlohmann::ordered_json;

std::string request_hash(const HttpRequest& request) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  mix(request.path);
  mix("\n");
  mix(request.body);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------

ReplayTransport::ReplayTransport(std::istream& fixture) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(fixture, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      HttpReply reply;
      reply.status = j.value("status", 200);
      reply.body = j.at("body").get<std::string>();
      add(j.at("hash").get<std::string>(), std::move(reply));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidArgument, "bad fixture line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::shared_ptr<ReplayTransport> ReplayTransport::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open fixture '" + path + "'");
  return std::make_shared<ReplayTransport>(in);
}

void ReplayTransport::add(std::string hash, HttpReply reply) {
  std::lock_guard lock(mutex_);
  replies_[std::move(hash)] = std::move(reply);
}

HttpReply ReplayTransport::send(const HttpRequest& request) {
  const auto hash = request_hash(request);
  std::lock_guard lock(mutex_);
  auto it = replies_.find(hash);
  if (it == replies_.end()) {
    throw Error(Errc::RemoteUnavailable, "no recorded reply for request " + hash);
  }
  return it->second;
}

std::size_t ReplayTransport::size() const {
  std::lock_guard lock(mutex_);
  return replies_.size();
}

RecordingTransport::RecordingTransport(std::shared_ptr<Transport> inner, std::ostream& sink)
    : inner_(std::move(inner)), sink_(sink) {}

HttpReply RecordingTransport::send(const HttpRequest& request) {
  auto reply = inner_->send(request);
  if (reply.status != 0) {
    ordered_json line;
    line["hash"] = request_hash(request);
    line["status"] = reply.status;
    line["body"] = reply.body;
    std::lock_guard lock(mutex_);
    sink_ << line.dump() << '\n';
    sink_.flush();
  }
  return reply;
}

HttpReply ScriptedTransport::send(const HttpRequest& request) {
  {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
  }
  return handler_(request);
}

std::size_t ScriptedTransport::calls() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

std::vector<HttpRequest> ScriptedTransport::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

HttpReply send_with_retry(Transport& transport, const HttpRequest& request, const RetryPolicy& policy) {
  auto delay = policy.initial_backoff;
  HttpReply last;
  for (std::uint32_t attempt = 0; attempt <= policy.retries; ++attempt) {
    if (attempt > 0 && delay.count() > 0) {
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(delay.count()) * policy.backoff_factor));
    }
    last = transport.send(request);
    if (last.status >= 200 && last.status < 300) return last;
    const bool retryable = last.status == 0 || last.status == 429 || last.status >= 500;
    if (!retryable) break;
  }
  const std::string attempts = std::to_string(policy.retries + 1);
  if (last.status == 429) throw Error(Errc::RateLimited, "rate limited after " + attempts + " attempts");
  if (last.status == 0) {
    throw Error(Errc::RemoteUnavailable, "no response after " + attempts + " attempts: " + last.error);
  }
  throw Error(Errc::RemoteUnavailable, "remote answered HTTP " + std::to_string(last.status));
}

// ---------------------------------------------------------------------------

void LlmConfig::validate() const {
  const auto first = user_template.find("{comment}");
  if (first == std::string::npos || user_template.find("{comment}", first + 1) != std::string::npos) {
    throw Error(Errc::InvalidArgument, "user_template must contain {comment} exactly once");
  }
  if (model_name.empty()) throw Error(Errc::InvalidArgument, "model_name is empty");
  if (max_tokens == 0) throw Error(Errc::InvalidArgument, "max_tokens must be positive");
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw Error(Errc::InvalidArgument, "temperature out of range");
}

ordered_json LlmConfig::to_json() const {
  ordered_json j;
  j["model_name"] = model_name;
  j["max_tokens"] = max_tokens;
  j["temperature"] = temperature;
  j["seed"] = seed;
  j["system_prompt"] = system_prompt;
  j["user_template"] = user_template;
  j["timeout_ms"] = timeout.count();
  j["retries"] = retry.retries;
  j["initial_backoff_ms"] = retry.initial_backoff.count();
  j["backoff_factor"] = retry.backoff_factor;
  j["api_base_url"] = api_base_url;
  j["endpoint_path"] = endpoint_path;
  j["api_key_env"] = api_key_env;
  return j;
}

LlmConfig LlmConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "LLM config must be an object");
  if (j.contains("api_key")) {
    throw Error(Errc::InvalidArgument, "API keys are read from the environment (api_key_env), not config files");
  }
  LlmConfig c;
  try {
    c.model_name = j.value("model_name", c.model_name);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.temperature = j.value("temperature", c.temperature);
    c.seed = j.value("seed", c.seed);
    c.system_prompt = j.value("system_prompt", c.system_prompt);
    c.user_template = j.value("user_template", c.user_template);
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.timeout.count()));
    c.retry.retries = j.value("retries", c.retry.retries);
    c.retry.initial_backoff = std::chrono::milliseconds(j.value("initial_backoff_ms", c.retry.initial_backoff.count()));
    c.retry.backoff_factor = j.value("backoff_factor", c.retry.backoff_factor);
    c.api_base_url = j.value("api_base_url", c.api_base_url);
    c.endpoint_path = j.value("endpoint_path", c.endpoint_path);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bad LLM config: ") + e.what());
  }
  c.validate();
  return c;
}

LlmConfig LlmConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open LLM config '" + path + "'");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::InvalidArgument, std::string("bad LLM config: ") + e.what());
  }
}

ChatPrompt build_prompt(std::string_view comment, const LlmConfig& cfg) {
  if (trim(comment).empty()) throw Error(Errc::EmptyComment, "comment is empty");
  cfg.validate();
  ChatPrompt p;
  p.system = cfg.system_prompt;
  p.user = cfg.user_template;
  p.user.replace(p.user.find("{comment}"), std::string_view("{comment}").size(), comment);
  return p;
}

ordered_json chat_request_body(const ChatPrompt& prompt, const LlmConfig& cfg) {
  ordered_json j;
  j["model"] = cfg.model_name;
  j["messages"] = ordered_json::array({
      ordered_json{{"role", "system"}, {"content", prompt.system}},
      ordered_json{{"role", "user"}, {"content", prompt.user}},
  });
  j["max_tokens"] = cfg.max_tokens;
  j["temperature"] = cfg.temperature;
  j["seed"] = cfg.seed;
  return j;
}

std::string normalize_reply(std::string_view reply) {
  std::string s(trim(reply));
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const auto end = s.find_first_of(" \t\n\r\f\v");
  if (end != std::string::npos) s.resize(end);
  auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_punct(s.back())) s.pop_back();
  std::size_t lead = 0;
  while (lead < s.size() && is_punct(s[lead])) ++lead;
  return s.substr(lead);
}

RawLabel parse_reply(std::string_view reply) {
  auto label = parse_raw_label(normalize_reply(reply));
  if (!label) throw Error(Errc::UnmappableReply, "reply is not one of genuine, spam, scam");
  return *label;
}

std::string chat_reply_content(std::string_view response_body) {
  try {
    const auto j = nlohmann::json::parse(response_body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw Error(Errc::MalformedResponse, "reply content is not a string");
    return content.get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::MalformedResponse, "chat completion response lacks choices[0].message.content");
  }
}

namespace {

HttpRequest chat_request(std::string_view comment, const LlmConfig& cfg) {
  HttpRequest req;
  req.path = cfg.endpoint_path;
  req.body = chat_request_body(build_prompt(comment, cfg), cfg).dump();
  req.timeout = cfg.timeout;
  req.headers.emplace_back("Content-Type", "application/json");
  if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key) {
    req.headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  return req;
}

}  // namespace

RawLabel classify_remote_label(std::string_view comment, const LlmConfig& cfg, Transport& transport) {
  const auto reply = send_with_retry(transport, chat_request(comment, cfg), cfg.retry);
  return parse_reply(chat_reply_content(reply.body));
}

Prediction classify_remote(std::string_view comment, const LlmConfig& cfg, Transport& transport) {
  const auto label = collapse_label(classify_remote_label(comment, cfg, transport));
  return {label, label == BinaryLabel::fraud ? 1.0 : 0.0};
}

// ---------------------------------------------------------------------------

ordered_json EndpointConfig::to_json() const {
  ordered_json j;
  j["base_url"] = base_url;
  j["path"] = path;
  j["name"] = name;
  j["timeout_ms"] = timeout.count();
  j["retries"] = retry.retries;
  j["initial_backoff_ms"] = retry.initial_backoff.count();
  j["backoff_factor"] = retry.backoff_factor;
  return j;
}

EndpointConfig EndpointConfig::from_json(const nlohmann::json& j) {
  EndpointConfig c;
  try {
    c.base_url = j.value("base_url", c.base_url);
    c.path = j.value("path", c.path);
    c.name = j.value("name", c.name);
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.timeout.count()));
    c.retry.retries = j.value("retries", c.retry.retries);
    c.retry.initial_backoff = std::chrono::milliseconds(j.value("initial_backoff_ms", c.retry.initial_backoff.count()));
    c.retry.backoff_factor = j.value("backoff_factor", c.retry.backoff_factor);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bad endpoint config: ") + e.what());
  }
  return c;
}

Prediction classify_inference_endpoint(std::string_view comment, const EndpointConfig& cfg, Transport& transport) {
  if (trim(comment).empty()) throw Error(Errc::EmptyComment, "comment is empty");
  HttpRequest req;
  req.path = cfg.path;
  req.body = ordered_json{{"comment", comment}}.dump();
  req.timeout = cfg.timeout;
  req.headers.emplace_back("Content-Type", "application/json");
  const auto reply = send_with_retry(transport, req, cfg.retry);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(reply.body);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(Errc::MalformedResponse, "endpoint reply is not JSON");
  }
  if (!j.is_object()) throw Error(Errc::MalformedResponse, "endpoint reply is not an object");
  auto label_it = j.find("label");
  auto score_it = j.find("score");
  if (label_it == j.end() || !label_it->is_string()) throw Error(Errc::MalformedResponse, "missing label");
  const auto label = parse_binary_label(label_it->get<std::string>());
  if (!label) throw Error(Errc::MalformedResponse, "label must be genuine or fraud");
  if (score_it == j.end() || !score_it->is_number()) throw Error(Errc::MalformedResponse, "missing score");
  const double score = score_it->get<double>();
  if (!(score >= 0.0 && score <= 1.0)) throw Error(Errc::MalformedResponse, "score outside [0,1]");
  return {*label, score};
}

RemoteChatBackend::RemoteChatBackend(LlmConfig cfg, std::shared_ptr<Transport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {
  cfg_.validate();
}

Prediction RemoteChatBackend::classify(std::string_view text) const {
  return classify_remote(text, cfg_, *transport_);
}

InferenceEndpointBackend::InferenceEndpointBackend(EndpointConfig cfg, std::shared_ptr<Transport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {}

Prediction InferenceEndpointBackend::classify(std::string_view text) const {
  return classify_inference_endpoint(text, cfg_, *transport_);
}

ClassifierModel make_remote_model(const LlmConfig& cfg, std::optional<std::string> replay_fixture) {
  cfg.validate();
  ClassifierModel m;
  m.kind = ModelKind::remote;
  m.name = cfg.model_name;
  RemoteParams p;
  p.config["backend"] = "chat";
  p.config["llm"] = cfg.to_json();
  if (replay_fixture) p.config["replay_fixture"] = *replay_fixture;
  m.parameters = std::move(p);
  return m;
}

ClassifierModel make_remote_model(const EndpointConfig& cfg, std::optional<std::string> replay_fixture) {
  ClassifierModel m;
  m.kind = ModelKind::remote;
  m.name = cfg.name;
  RemoteParams p;
  p.config["backend"] = "endpoint";
  p.config["endpoint"] = cfg.to_json();
  if (replay_fixture) p.config["replay_fixture"] = *replay_fixture;
  m.parameters = std::move(p);
  return m;
}

std::unique_ptr<Backend> open_backend(const ClassifierModel& model, std::shared_ptr<Transport> transport) {
  if (is_native(model.kind)) return std::make_unique<NativeBackend>(model);
  const auto* params = std::get_if<RemoteParams>(&model.parameters);
  if (!params) throw Error(Errc::KindMismatch, "remote model without remote parameters");
  const auto& c = params->config;
  const std::string backend = c.value("backend", "");
  if (!transport) {
    if (auto it = c.find("replay_fixture"); it != c.end() && it->is_string()) {
      transport = ReplayTransport::from_file(it->get<std::string>());
    }
  }
  if (backend == "chat") {
    auto cfg = LlmConfig::from_json(c.value("llm", nlohmann::json::object()));
    if (!transport) transport = std::make_shared<HttpTransport>(cfg.api_base_url);
    return std::make_unique<RemoteChatBackend>(std::move(cfg), std::move(transport));
  }
  if (backend == "endpoint") {
    auto cfg = EndpointConfig::from_json(c.value("endpoint", nlohmann::json::object()));
    if (!transport) transport = std::make_shared<HttpTransport>(cfg.base_url);
    return std::make_unique<InferenceEndpointBackend>(std::move(cfg), std::move(transport));
  }
  throw Error(Errc::CorruptModel, "unknown remote backend '" + backend + "'");
}

// ---------------------------------------------------------------------------

std::vector<LlmRunResult> evaluate_llm(const std::vector<LabeledComment>& items, const LlmConfig& cfg,
                                       Transport& transport, std::uint32_t runs) {
  if (items.empty()) throw Error(Errc::EmptyInput, "nothing to evaluate");
  if (runs == 0) throw Error(Errc::InvalidArgument, "runs must be positive");
  std::vector<BinaryLabel> gold;
  gold.reserve(items.size());
  for (const auto& it : items) gold.push_back(it.binary());

  std::vector<LlmRunResult> results;
  for (std::uint32_t run = 0; run < runs; ++run) {
    LlmRunResult r;
    std::vector<BinaryLabel> pred;
    std::vector<double> scores;
    pred.reserve(items.size());
    for (const auto& it : items) {
      BinaryLabel label = BinaryLabel::genuine;
      try {
        label = collapse_label(classify_remote_label(it.comment.text, cfg, transport));
      } catch (const Error& e) {
        if (e.code() != Errc::UnmappableReply) throw;
        ++r.unmappable;
      }
      pred.push_back(label);
      scores.push_back(label == BinaryLabel::fraud ? 1.0 : 0.0);
    }
    r.matrix = confusion(pred, gold);
    r.metrics = derive_metrics(r.matrix);
    if (r.matrix.positives() > 0 && r.matrix.negatives() > 0) r.metrics.roc_auc = roc_auc(scores, gold);
    results.push_back(r);
  }
  return results;
}

}  // namespace fraudlens
