#pragma once

// Pipeline configuration, backend wiring, and per-claim orchestration.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cer/claim_detection.hpp"
#include "cer/core.hpp"
#include "cer/corpus.hpp"
#include "cer/ingest.hpp"
#include "cer/kvlog.hpp"
#include "cer/llm.hpp"
#include "cer/reasoning.hpp"
#include "cer/retrieval.hpp"
#include "cer/veracity.hpp"

namespace cer::pipeline {

struct EndpointConfig {
  std::string url;
  std::chrono::milliseconds timeout{10000};
  int retries = 2;
  std::chrono::milliseconds backoff{200};

  HttpEndpoint to_http() const { return {url, timeout, retries, backoff}; }
};

struct EmbeddingConfig {
  std::string model_id = "sentence-transformers/all-MiniLM-L6-v2";
  std::size_t dim = retrieval::kDefaultDim;
  std::uint64_t seed = 0;
};

struct PipelineConfig {
  retrieval::RetrievalConfig retrieval;
  retrieval::DenseMode dense_mode = retrieval::DenseMode::ApproxHnsw;
  retrieval::HnswParams hnsw;
  retrieval::Bm25Params bm25;
  EmbeddingConfig embedding;
  detection::DetectionConfig detection;
  reasoning::PromptConfig prompt;
  veracity::ClassifierBackendSpec classifier;

  std::string corpus_path;
  std::string index_path;
  std::string cache_path;
  std::size_t cache_max_entries = 10000;
  std::string llm_cache_path;

  EndpointConfig llm{"", std::chrono::milliseconds{60000}};
  EndpointConfig embed{"", std::chrono::milliseconds{10000}};
  EndpointConfig classifier_endpoint{"", std::chrono::milliseconds{60000}};
  EndpointConfig stt{"", std::chrono::milliseconds{60000}};
  ingest::FetchOptions fetch;
  std::string audio_decoder;  // command template with {in} and {out}; empty = send media as-is

  bool mock_backends = false;
  std::string mock_llm_fixture;
  std::string mock_stt_fixture;

  int backend_concurrency = 4;
  std::size_t max_claim_chars = 2000;
  std::size_t max_upload_bytes = 50 * 1024 * 1024;
};

/// Throws Error{ConfigError}.
void validate(const PipelineConfig& cfg);

/// Full serialization (every field, defaults included).
nlohmann::json to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected. Throws ConfigError.
PipelineConfig config_from_json(const nlohmann::json& j);

/// Reads a JSON config file (or defaults when path is empty) and applies the
/// CER_LLM_ENDPOINT / CER_EMBED_ENDPOINT / CER_CLASSIFIER_ENDPOINT overrides.
PipelineConfig load_config(const std::string& path);
void apply_env_overrides(PipelineConfig& cfg);

/// SHA-256 of the canonical (sorted-key, compact) serialization, leaving out
/// operational settings that cannot change a verdict: cache locations and
/// bounds, concurrency, and request size limits.
std::string fingerprint(const PipelineConfig& cfg);

/// Collapses whitespace runs to one space and trims.
std::string normalize_claim_text(std::string_view text);

/// Persistent assessment store keyed by SHA-256(normalized claim text + fingerprint).
class AssessmentCache {
 public:
  AssessmentCache(std::string path, std::size_t max_entries) : log_(std::move(path), max_entries) {}

  static std::string key(std::string_view claim_text, std::string_view fingerprint);

  /// Undecodable entries are dropped and reported as a miss.
  std::optional<ClaimAssessment> get(const std::string& key);
  void put(const std::string& key, const ClaimAssessment& a);

  std::size_t size() const { return log_.size(); }
  const KvLog& log() const { return log_; }

 private:
  KvLog log_;
};

struct Backends {
  std::shared_ptr<llm::Backend> llm;
  std::shared_ptr<retrieval::EmbeddingBackend> embedder;
  std::shared_ptr<veracity::Classifier> classifier;
  std::shared_ptr<ingest::SpeechToText> stt;
};

/// Mock backends: a prompt-routing mock LLM (detection or reasoning reply,
/// canned fixture entries first), hash-projection embeddings, the seeded mock
/// classifier, and the fixture-table speech-to-text.
Backends make_mock_backends(const PipelineConfig& cfg);
/// HTTP adapters for every endpoint in the config; the classifier falls back
/// to the mock when its kind is mock.
Backends make_http_backends(const PipelineConfig& cfg);

struct VerifyOutcome {
  ClaimAssessment assessment;
  bool cached = false;
};

class Pipeline {
 public:
  /// Builds backends (mock or HTTP per config), opens caches, and loads the
  /// corpus and index from their configured paths when present.
  explicit Pipeline(PipelineConfig cfg);
  Pipeline(PipelineConfig cfg, Backends backends);

  const PipelineConfig& config() const { return cfg_; }
  const std::string& fingerprint() const { return fingerprint_; }
  const Backends& backends() const { return raw_; }
  AssessmentCache* cache() { return cache_.get(); }

  /// Builds fresh indexes for the corpus and publishes them atomically.
  void set_corpus(corpus::Corpus corpus);
  void set_snapshot(std::shared_ptr<const corpus::Corpus> corpus,
                    std::shared_ptr<const retrieval::IndexBundle> indexes);
  std::size_t corpus_size() const;

  /// retrieve -> reason -> assess for one claim. Retrieval or reasoning
  /// failures degrade (no evidence / empty justification, degraded = true);
  /// classifier failures propagate. Degraded results are never cached.
  VerifyOutcome verify_claim(const Claim& claim, bool use_cache = true);

  /// Direct claim from user text. Throws InvalidArgument when the text is
  /// empty or longer than max_claim_chars code points.
  VerifyOutcome verify_text(std::string_view text);

  /// detect_claims, then verify_claim for each claim, results in claim order.
  std::vector<ClaimAssessment> verify_document(const ingest::SourceDocument& doc);

  ingest::SourceDocument load_url(const std::string& url) const;
  ingest::SourceDocument load_video(std::span<const std::byte> media, std::optional<std::string> uri,
                                    std::optional<std::string> lang_hint) const;

 private:
  struct Snapshot {
    std::shared_ptr<const corpus::Corpus> corpus;
    std::shared_ptr<const retrieval::IndexBundle> indexes;
  };

  void wire();
  void load_corpus_from_config();
  std::shared_ptr<const Snapshot> snapshot() const { return std::atomic_load(&snapshot_); }

  PipelineConfig cfg_;
  std::string fingerprint_;
  Backends raw_;
  std::shared_ptr<llm::InFlightLimit> limit_;
  std::shared_ptr<llm::Backend> llm_;
  std::unique_ptr<AssessmentCache> cache_;
  std::shared_ptr<const Snapshot> snapshot_;
};

}  // namespace cer::pipeline
