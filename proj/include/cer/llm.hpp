#pragma once

// Chat-completion backends shared by claim detection and reasoning.

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>

#include "cer/http_json.hpp"
#include "cer/kvlog.hpp"

namespace cer::llm {

struct Request {
  std::string model_id;
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<int> seed = 0;
};

struct Response {
  std::string text;
};

class Backend {
 public:
  virtual ~Backend() = default;
  /// Throws BackendUnavailable when the model cannot be reached.
  virtual Response complete(const Request& req) = 0;
};

/// Key used by the mock's canned table: SHA-256 of system prompt, a newline, and user prompt.
std::string prompt_hash(const Request& req);

/// Deterministic backend: prompt hash -> canned text, falling back to a responder.
/// With neither a canned entry nor a responder, calls fail with BackendUnavailable.
class MockBackend final : public Backend {
 public:
  using Responder = std::function<std::string(const Request&)>;

  MockBackend() = default;
  explicit MockBackend(Responder responder) : responder_(std::move(responder)) {}

  void add_canned(const std::string& hash, std::string text) { canned_[hash] = std::move(text); }
  /// Fixture file: JSON object {"<prompt sha256>": "<response text>", ...}.
  void load_canned(const std::string& path);

  Response complete(const Request& req) override;

  int calls() const { return calls_.load(); }

 private:
  std::map<std::string, std::string> canned_;
  Responder responder_;
  std::atomic<int> calls_{0};
};

/// OpenAI-style chat completions:
/// POST {"model","messages":[{"role":"system"},{"role":"user"}],"temperature","max_tokens","seed"}
/// reply choices[0].message.content.
class HttpBackend final : public Backend {
 public:
  HttpBackend(HttpEndpoint endpoint, std::optional<std::string> api_key = std::nullopt)
      : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)) {}
  Response complete(const Request& req) override;

 private:
  HttpEndpoint endpoint_;
  std::optional<std::string> api_key_;
};

/// In-flight request budget, shareable across backends.
class InFlightLimit {
 public:
  explicit InFlightLimit(int max_in_flight) : slots_(max_in_flight < 1 ? 1 : max_in_flight) {}

  class Slot {
   public:
    explicit Slot(InFlightLimit& l) : l_(l) { l_.slots_.acquire(); }
    ~Slot() { l_.slots_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    InFlightLimit& l_;
  };

 private:
  std::counting_semaphore<1024> slots_;
};

/// Bounds the number of in-flight requests to an inner backend.
class LimitedBackend final : public Backend {
 public:
  LimitedBackend(std::shared_ptr<Backend> inner, std::shared_ptr<InFlightLimit> limit)
      : inner_(std::move(inner)), limit_(std::move(limit)) {}
  LimitedBackend(std::shared_ptr<Backend> inner, int max_in_flight)
      : LimitedBackend(std::move(inner), std::make_shared<InFlightLimit>(max_in_flight)) {}
  Response complete(const Request& req) override;

 private:
  std::shared_ptr<Backend> inner_;
  std::shared_ptr<InFlightLimit> limit_;
};

/// Response cache key: SHA-256 of the prompt text (system, newline, user) followed by the model id.
std::string response_cache_key(const Request& req);

/// Serves repeated prompts from a persistent store; failures are not cached.
class CachingBackend final : public Backend {
 public:
  CachingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<KvLog> store)
      : inner_(std::move(inner)), store_(std::move(store)) {}
  Response complete(const Request& req) override;

 private:
  std::shared_ptr<Backend> inner_;
  std::shared_ptr<KvLog> store_;
};

}  // namespace cer::llm
