#include "cer/llm.hpp"

#include <mutex>

#include "cer/core.hpp"
#include "cer/util.hpp"

namespace cer::llm {

std::string prompt_hash(const Request& req) { return sha256_hex(req.system_prompt + "\n" + req.user_prompt); }

void MockBackend::load_canned(const std::string& path) {
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    for (auto it = j.begin(); it != j.end(); ++it) canned_[it.key()] = it.value().get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

Response MockBackend::complete(const Request& req) {
  ++calls_;
  if (const auto it = canned_.find(prompt_hash(req)); it != canned_.end()) return {it->second};
  if (responder_) return {responder_(req)};
  throw Error(ErrorCode::BackendUnavailable, "mock LLM has no response for prompt " + prompt_hash(req));
}

Response HttpBackend::complete(const Request& req) {
  nlohmann::json body{{"model", req.model_id},
                      {"temperature", req.temperature},
                      {"max_tokens", req.max_tokens},
                      {"messages", nlohmann::json::array()}};
  if (req.seed) body["seed"] = *req.seed;
  if (!req.system_prompt.empty()) body["messages"].push_back({{"role", "system"}, {"content", req.system_prompt}});
  body["messages"].push_back({{"role", "user"}, {"content", req.user_prompt}});
  std::vector<std::pair<std::string, std::string>> headers;
  if (api_key_) headers.emplace_back("Authorization", "Bearer " + *api_key_);
  const auto res = post_json(endpoint_, body, headers);
  try {
    return {res.at("choices").at(0).at("message").at("content").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidBackendOutput, std::string("chat completion reply: ") + e.what());
  }
}

Response LimitedBackend::complete(const Request& req) {
  InFlightLimit::Slot slot(*limit_);
  return inner_->complete(req);
}

std::string response_cache_key(const Request& req) {
  return sha256_hex(req.system_prompt + "\n" + req.user_prompt + req.model_id);
}

Response CachingBackend::complete(const Request& req) {
  const auto key = response_cache_key(req);
  if (auto hit = store_->get(key)) return {std::move(*hit)};
  auto res = inner_->complete(req);
  store_->put(key, res.text);
  return res;
}

}  // namespace cer::llm
