#include "cer/service.hpp"

#include <cstdio>
#include <iostream>

#include <httplib.h>

#include "cer/util.hpp"

namespace cer::service {

namespace {

using nlohmann::json;

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::ParseError:
    case ErrorCode::FormatError:
    case ErrorCode::UnknownLabel:
      return 400;
    case ErrorCode::TooLarge:
      return 413;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::InvalidBackendOutput:
    case ErrorCode::UpstreamError:
    case ErrorCode::UnparseableResponse:
    case ErrorCode::LabelSpaceMismatch:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::FetchTimeout:
    case ErrorCode::HttpError:
    case ErrorCode::RateLimited:
      return 502;
    default:
      return 500;
  }
}

}  // namespace

std::string_view to_string(JobKind k) {
  switch (k) {
    case JobKind::Claim: return "claim";
    case JobKind::Url: return "url";
    case JobKind::Video: return "video";
  }
  return "claim";
}

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
  }
  return "queued";
}

bool is_valid_transition(JobState from, JobState to) {
  if (from == JobState::Queued) return to == JobState::Running;
  if (from == JobState::Running) return to == JobState::Done || to == JobState::Failed;
  return false;
}

nlohmann::json to_json(const VerificationJob& job, const std::string& fingerprint) {
  json results = json::array();
  for (const auto& a : job.results) results.push_back(a);
  return {{"job_id", job.job_id},
          {"kind", std::string(to_string(job.kind))},
          {"state", std::string(to_string(job.state))},
          {"input_ref", job.input_ref},
          {"results", std::move(results)},
          {"error", job.error ? json(*job.error) : json(nullptr)},
          {"created_at", format_utc(job.created_at)},
          {"updated_at", format_utc(job.updated_at)},
          {"config_fingerprint", fingerprint}};
}

JobManager::JobManager(std::size_t workers, Observer observer) : observer_(std::move(observer)) {
  if (workers == 0) workers = 1;
  for (std::size_t i = 0; i < workers; ++i) workers_.emplace_back([this] { run(); });
}

JobManager::~JobManager() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : workers_) t.join();
}

void JobManager::advance(VerificationJob& job, JobState to) {
  if (!is_valid_transition(job.state, to))
    throw std::logic_error("job " + job.job_id + ": illegal transition " + std::string(to_string(job.state)) + " -> " +
                           std::string(to_string(to)));
  job.state = to;
  job.updated_at = std::chrono::system_clock::now();
}

std::string JobManager::submit(JobKind kind, std::string input_ref, Work work) {
  std::string id;
  {
    std::lock_guard lock(mu_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "job-%06llu", static_cast<unsigned long long>(next_id_++));
    id = buf;
    VerificationJob job;
    job.job_id = id;
    job.kind = kind;
    job.input_ref = std::move(input_ref);
    job.created_at = job.updated_at = std::chrono::system_clock::now();
    jobs_.emplace(id, std::move(job));
    queue_.emplace_back(id, std::move(work));
  }
  cv_.notify_all();
  return id;
}

std::optional<VerificationJob> JobManager::get(const std::string& job_id) const {
  std::lock_guard lock(mu_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::optional<VerificationJob> JobManager::wait(const std::string& job_id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] {
    const auto it = jobs_.find(job_id);
    return it == jobs_.end() || it->second.state == JobState::Done || it->second.state == JobState::Failed;
  });
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

void JobManager::run() {
  for (;;) {
    std::pair<std::string, Work> item;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      item = std::move(queue_.front());
      queue_.pop_front();
      advance(jobs_.at(item.first), JobState::Running);
    }
    if (observer_) observer_(item.first, JobState::Queued, JobState::Running);

    std::vector<ClaimAssessment> results;
    std::optional<std::string> error;
    try {
      results = item.second();
    } catch (const std::exception& e) {
      error = e.what();
    } catch (...) {
      error = "unknown error";
    }
    const JobState final_state = error ? JobState::Failed : JobState::Done;
    {
      std::lock_guard lock(mu_);
      auto& job = jobs_.at(item.first);
      advance(job, final_state);
      if (error)
        job.error = std::move(error);
      else
        job.results = std::move(results);
    }
    cv_.notify_all();
    if (observer_) observer_(item.first, JobState::Running, final_state);
  }
}

struct Service::Impl {
  std::shared_ptr<pipeline::Pipeline> pipeline;
  ServiceOptions opts;
  httplib::Server server;
  JobManager jobs;
  std::thread thread;
  int port = 0;

  Impl(std::shared_ptr<pipeline::Pipeline> p, ServiceOptions o)
      : pipeline(std::move(p)), opts(std::move(o)), jobs(opts.job_workers) {}

  const std::string& fp() const { return pipeline->fingerprint(); }

  void send(httplib::Response& res, int status, json body) const {
    body["config_fingerprint"] = fp();
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) const {
    send(res, status, json{{"error", {{"code", std::string(code)}, {"message", message}}}});
  }

  void send_error(httplib::Response& res, const Error& e) const {
    send_error(res, status_for(e.code()), to_string(e.code()), e.what());
  }

  std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) const {
    try {
      auto j = json::parse(req.body);
      if (!j.is_object()) throw std::invalid_argument("body must be a JSON object");
      return j;
    } catch (const std::exception& e) {
      send_error(res, 400, "InvalidArgument", std::string("request body: ") + e.what());
      return std::nullopt;
    }
  }

  void job_accepted(httplib::Response& res, const std::string& id) const {
    res.set_header("Location", "/v1/jobs/" + id);
    send(res, 202, to_json(*jobs.get(id), fp()));
  }

  void routes() {
    server.Post("/v1/verify/claim", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req, res);
      if (!body) return;
      if (!body->contains("text") || !(*body)["text"].is_string())
        return send_error(res, 400, "InvalidArgument", "\"text\" must be a string");
      try {
        const auto out = pipeline->verify_text((*body)["text"].get<std::string>());
        send(res, 200, json{{"assessment", out.assessment}, {"cached", out.cached}});
      } catch (const Error& e) {
        send_error(res, e);
      }
    });

    server.Post("/v1/verify/url", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req, res);
      if (!body) return;
      if (!body->contains("url") || !(*body)["url"].is_string())
        return send_error(res, 400, "InvalidArgument", "\"url\" must be a string");
      const std::string url = trim((*body)["url"].get<std::string>());
      if (!parse_url(url)) return send_error(res, 400, "InvalidArgument", "not an absolute http(s) URL: " + url);
      auto p = pipeline;
      const auto id = jobs.submit(JobKind::Url, url, [p, url] { return p->verify_document(p->load_url(url)); });
      job_accepted(res, id);
    });

    server.Post("/v1/verify/video", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.is_multipart_form_data() || !req.has_file("file"))
        return send_error(res, 400, "InvalidArgument", "expected multipart/form-data with a \"file\" part");
      const auto file = req.get_file_value("file");
      if (file.content.empty()) return send_error(res, 400, "InvalidArgument", "uploaded file is empty");
      if (file.content.size() > pipeline->config().max_upload_bytes)
        return send_error(res, 413, "TooLarge",
                          "upload exceeds " + std::to_string(pipeline->config().max_upload_bytes) + " bytes");
      std::optional<std::string> lang;
      if (req.has_file("lang_hint")) lang = trim(req.get_file_value("lang_hint").content);
      if (lang && lang->empty()) lang.reset();
      auto media = std::make_shared<const std::string>(file.content);
      const std::string ref = "sha256:" + sha256_hex(*media) + (file.filename.empty() ? "" : " " + file.filename);
      std::optional<std::string> uri;
      if (!file.filename.empty()) uri = "upload:" + file.filename;
      auto p = pipeline;
      const auto id = jobs.submit(JobKind::Video, ref, [p, media, uri, lang] {
        const auto bytes = std::as_bytes(std::span(media->data(), media->size()));
        return p->verify_document(p->load_video(bytes, uri, lang));
      });
      job_accepted(res, id);
    });

    server.Get("/v1/jobs/:id", [this](const httplib::Request& req, httplib::Response& res) {
      const auto job = jobs.get(req.path_params.at("id"));
      if (!job) return send_error(res, 404, "NotFound", "no job " + req.path_params.at("id"));
      send(res, 200, to_json(*job, fp()));
    });

    server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      json j{{"status", "ok"},
             {"corpus_docs", pipeline->corpus_size()},
             {"mock_backends", pipeline->config().mock_backends}};
      if (auto* c = pipeline->cache()) j["cache_entries"] = c->size();
      send(res, 200, std::move(j));
    });

    server.Get("/v1/config", [this](const httplib::Request&, httplib::Response& res) {
      send(res, 200, json{{"config", pipeline::to_json(pipeline->config())}});
    });

    server.set_exception_handler([this](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const std::exception& e) {
        send_error(res, 500, "InternalError", e.what());
      }
    });

    server.set_error_handler([this](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 413)
        send_error(res, 413, "TooLarge", "request body too large");
      else if (res.status == 404)
        send_error(res, 404, "NotFound", "no such route");
    });

    // Multipart framing overhead on top of the media limit.
    server.set_payload_max_length(pipeline->config().max_upload_bytes + 64 * 1024);

    if (opts.static_dir && !server.set_mount_point("/", *opts.static_dir))
      throw Error(ErrorCode::IoError, "static directory not found: " + *opts.static_dir);
  }
};

Service::Service(std::shared_ptr<pipeline::Pipeline> pipeline, ServiceOptions opts)
    : impl_(std::make_unique<Impl>(std::move(pipeline), std::move(opts))) {
  impl_->routes();
}

Service::~Service() { stop(); }

int Service::bind() {
  auto& s = impl_->server;
  if (impl_->opts.port == 0) {
    impl_->port = s.bind_to_any_port(impl_->opts.host);
  } else {
    impl_->port = s.bind_to_port(impl_->opts.host, impl_->opts.port) ? impl_->opts.port : -1;
  }
  if (impl_->port <= 0)
    throw Error(ErrorCode::IoError, "cannot bind " + impl_->opts.host + ":" + std::to_string(impl_->opts.port));
  return impl_->port;
}

void Service::serve() { impl_->server.listen_after_bind(); }

int Service::start() {
  const int p = bind();
  impl_->thread = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
  return p;
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int Service::port() const { return impl_->port; }

JobManager& Service::jobs() { return impl_->jobs; }

}  // namespace cer::service
