#include "cer/http_json.hpp"

#include <thread>

#include <httplib.h>

#include "cer/core.hpp"
#include "cer/util.hpp"

namespace cer {

nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body,
                         const std::vector<std::pair<std::string, std::string>>& headers) {
  const auto url = parse_url(endpoint.url);
  if (!url) throw Error(ErrorCode::ConfigError, "bad endpoint url '" + endpoint.url + "'");

  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
  const std::string payload = body.dump();
  httplib::Headers extra;
  for (const auto& [k, v] : headers) extra.emplace(k, v);

  std::string last_error;
  auto delay = endpoint.backoff;
  for (int attempt = 0; attempt <= endpoint.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client cli(url->origin());
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    auto res = cli.Post(url->path, extra, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300)
      throw Error(ErrorCode::UpstreamError, endpoint.url + " returned " + std::to_string(res->status), res->status);
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidBackendOutput, endpoint.url + ": " + e.what());
    }
  }
  throw Error(ErrorCode::BackendUnavailable, endpoint.url + ": " + last_error);
}

}  // namespace cer
