#pragma once

// Asynchronous verification jobs and the /v1 HTTP API.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cer/core.hpp"
#include "cer/pipeline.hpp"

namespace cer::service {

enum class JobKind { Claim, Url, Video };
enum class JobState { Queued, Running, Done, Failed };
std::string_view to_string(JobKind k);
std::string_view to_string(JobState s);

/// queued -> running -> {done, failed}; nothing else.
bool is_valid_transition(JobState from, JobState to);

struct VerificationJob {
  std::string job_id;
  JobKind kind = JobKind::Claim;
  JobState state = JobState::Queued;
  std::string input_ref;
  std::vector<ClaimAssessment> results;
  std::optional<std::string> error;
  std::chrono::system_clock::time_point created_at{};
  std::chrono::system_clock::time_point updated_at{};
};

nlohmann::json to_json(const VerificationJob& job, const std::string& fingerprint);

/// Runs submitted work on a fixed set of worker threads in FIFO order.
class JobManager {
 public:
  using Work = std::function<std::vector<ClaimAssessment>()>;
  /// Observes every state change (for tests and logging); called with the lock released.
  using Observer = std::function<void(const std::string& job_id, JobState from, JobState to)>;

  explicit JobManager(std::size_t workers = 2, Observer observer = nullptr);
  ~JobManager();
  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;

  std::string submit(JobKind kind, std::string input_ref, Work work);
  std::optional<VerificationJob> get(const std::string& job_id) const;
  /// Blocks until the job is done or failed, or the timeout passes.
  std::optional<VerificationJob> wait(const std::string& job_id, std::chrono::milliseconds timeout) const;

 private:
  void run();
  void advance(VerificationJob& job, JobState to);

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::map<std::string, VerificationJob> jobs_;
  std::deque<std::pair<std::string, Work>> queue_;
  std::uint64_t next_id_ = 1;
  bool stopping_ = false;
  Observer observer_;
  std::vector<std::thread> workers_;
};

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::string> static_dir;
  std::size_t job_workers = 2;
};

/// Routes:
///   POST /v1/verify/claim   {"text"} -> 200 {"assessment","cached","config_fingerprint"}
///   POST /v1/verify/url     {"url"} -> 202 job
///   POST /v1/verify/video   multipart "file" [+ "lang_hint"] -> 202 job
///   GET  /v1/jobs/{id}      -> job
///   GET  /v1/health, GET /v1/config
/// Errors are {"error":{"code","message"},"config_fingerprint"} with 400
/// (bad input), 404, 413 (upload too large), 502 (backend failure).
class Service {
 public:
  Service(std::shared_ptr<pipeline::Pipeline> pipeline, ServiceOptions opts);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the socket; returns the bound port. Throws IoError.
  int bind();
  /// Serves on the calling thread until stop().
  void serve();
  /// bind() + serve() on a background thread; returns once accepting.
  int start();
  void stop();
  int port() const;

  JobManager& jobs();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cer::service
