#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace cer {

struct HttpEndpoint {
  std::string url;
  std::chrono::milliseconds timeout{10000};
  int retries = 2;
  std::chrono::milliseconds backoff{200};
};

/// POSTs a JSON body and parses a JSON reply. Transport failures and 5xx are
/// retried `retries` times with exponential backoff, then reported as
/// BackendUnavailable. Other non-2xx replies raise UpstreamError(status).
nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body,
                         const std::vector<std::pair<std::string, std::string>>& headers = {});

}  // namespace cer
