#include <httplib.h>

#include "fraudlens/error.hpp"
#include "fraudlens/llm_backend.hpp"

namespace fraudlens {

HttpTransport::HttpTransport(std::string base_url) : base_url_(std::move(base_url)) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

HttpReply HttpTransport::send(const HttpRequest& request) {
  // httplib::Client is not safe for concurrent use; one per request.
  httplib::Client client(base_url_);
  if (!client.is_valid()) throw Error(Errc::RemoteUnavailable, "unsupported URL '" + base_url_ + "'");
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  std::string content_type = "application/json";
  for (const auto& [k, v] : request.headers) {
    if (k == "Content-Type") {
      content_type = v;
    } else {
      headers.emplace(k, v);
    }
  }
  auto res = client.Post(request.path, headers, request.body, content_type);
  HttpReply reply;
  if (!res) {
    reply.error = httplib::to_string(res.error());
    return reply;
  }
  reply.status = res->status;
  reply.body = res->body;
  return reply;
}

}  // namespace fraudlens
