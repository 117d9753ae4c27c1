#include "cer/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <thread>

#include "cer/util.hpp"

namespace cer::pipeline {

namespace {

using nlohmann::json;

// Reads an object's keys into typed fields and rejects anything it did not consume.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorCode::ConfigError, where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, where(key) + ": " + e.what());
    }
  }

  void get_ms(const char* key, std::chrono::milliseconds& out) {
    long long ms = out.count();
    get(key, ms);
    if (ms < 0) throw Error(ErrorCode::ConfigError, where(key) + " must be non-negative");
    out = std::chrono::milliseconds(ms);
  }

  template <typename F>
  void get_with(const char* key, F&& parse) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      parse(j_.at(key));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, where(key) + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigError) throw;
      throw Error(ErrorCode::ConfigError, where(key) + ": " + e.what());
    }
  }

  std::optional<ObjectReader> child(const char* key) {
    if (!j_.contains(key)) return std::nullopt;
    seen_.insert(key);
    return ObjectReader(j_.at(key), where(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw Error(ErrorCode::ConfigError, "unknown key " + where(it.key()));
  }

 private:
  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json endpoint_json(const EndpointConfig& e, bool with_url = true) {
  json j{{"timeout_ms", e.timeout.count()}, {"retries", e.retries}, {"backoff_ms", e.backoff.count()}};
  if (with_url) j["url"] = e.url;
  return j;
}

void read_endpoint(ObjectReader& r, EndpointConfig& e, bool with_url = true) {
  if (with_url) r.get("url", e.url);
  r.get_ms("timeout_ms", e.timeout);
  r.get("retries", e.retries);
  r.get_ms("backoff_ms", e.backoff);
  r.finish();
}

json label_space_json(std::span<const VerdictLabel> space) {
  json a = json::array();
  for (const auto l : space) a.push_back(std::string(to_string(l)));
  return a;
}

void check_endpoint(const EndpointConfig& e, const char* name) {
  if (e.retries < 0 || e.retries > 10) throw Error(ErrorCode::ConfigError, std::string(name) + ".retries out of range");
  if (e.timeout.count() <= 0) throw Error(ErrorCode::ConfigError, std::string(name) + ".timeout_ms must be positive");
  if (!e.url.empty() && !parse_url(e.url)) throw Error(ErrorCode::ConfigError, std::string(name) + ".url is not http(s)");
}

// Mock LLM: detection prompts carry the numbered sentence list, anything else is a reasoning prompt.
std::string mock_llm_reply(const llm::Request& req) {
  if (req.user_prompt.find(std::string(detection::kSentenceListHeader) + "\n") != std::string::npos)
    return detection::mock_detection_reply(req);
  return reasoning::mock_reasoning_reply(req);
}

class LimitedClassifier final : public veracity::Classifier {
 public:
  LimitedClassifier(std::shared_ptr<veracity::Classifier> inner, std::shared_ptr<llm::InFlightLimit> limit)
      : inner_(std::move(inner)), limit_(std::move(limit)) {}
  veracity::ClassifierOutput classify(const veracity::ClassifierInput& input) override {
    llm::InFlightLimit::Slot slot(*limit_);
    return inner_->classify(input);
  }
  const veracity::ClassifierBackendSpec& spec() const override { return inner_->spec(); }

 private:
  std::shared_ptr<veracity::Classifier> inner_;
  std::shared_ptr<llm::InFlightLimit> limit_;
};

std::size_t count_code_points(std::string_view s) {
  std::size_t n = 0;
  for (const unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

}  // namespace

void validate(const PipelineConfig& cfg) {
  retrieval::validate(cfg.retrieval);
  detection::validate(cfg.detection);
  reasoning::validate(cfg.prompt);
  try {
    veracity::validate(cfg.classifier);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  if (cfg.embedding.dim == 0) throw Error(ErrorCode::ConfigError, "embedding.dim must be positive");
  if (cfg.hnsw.M < 2) throw Error(ErrorCode::ConfigError, "hnsw.M must be >= 2");
  if (cfg.hnsw.ef_construction < 1 || cfg.hnsw.ef_search < 1)
    throw Error(ErrorCode::ConfigError, "hnsw ef parameters must be positive");
  if (!(cfg.bm25.k1 >= 0.0) || !(cfg.bm25.b >= 0.0 && cfg.bm25.b <= 1.0))
    throw Error(ErrorCode::ConfigError, "bm25 requires k1 >= 0 and b in [0, 1]");
  check_endpoint(cfg.llm, "endpoints.llm");
  check_endpoint(cfg.embed, "endpoints.embed");
  check_endpoint(cfg.classifier_endpoint, "endpoints.classifier");
  check_endpoint(cfg.stt, "endpoints.stt");
  if (cfg.classifier.endpoint && !parse_url(*cfg.classifier.endpoint))
    throw Error(ErrorCode::ConfigError, "classifier.endpoint is not http(s)");
  if (cfg.backend_concurrency < 1 || cfg.backend_concurrency > 1024)
    throw Error(ErrorCode::ConfigError, "backend_concurrency must be in [1, 1024]");
  if (cfg.max_claim_chars < 1) throw Error(ErrorCode::ConfigError, "max_claim_chars must be positive");
  if (cfg.max_upload_bytes < 1) throw Error(ErrorCode::ConfigError, "max_upload_bytes must be positive");
  if (cfg.fetch.timeout.count() <= 0 || cfg.fetch.max_bytes < 1 || cfg.fetch.max_redirects < 0)
    throw Error(ErrorCode::ConfigError, "invalid fetch settings");
}

nlohmann::json to_json(const PipelineConfig& c) {
  json j;
  j["retrieval"] = {{"top_k", c.retrieval.top_k},
                    {"evidence_m", c.retrieval.evidence_m},
                    {"retriever", std::string(to_string(c.retrieval.retriever))},
                    {"separator", c.retrieval.separator},
                    {"dense_mode", std::string(retrieval::to_string(c.dense_mode))},
                    {"hnsw",
                     {{"M", c.hnsw.M},
                      {"ef_construction", c.hnsw.ef_construction},
                      {"ef_search", c.hnsw.ef_search},
                      {"seed", c.hnsw.seed}}},
                    {"bm25", {{"k1", c.bm25.k1}, {"b", c.bm25.b}}}};
  j["embedding"] = {{"model_id", c.embedding.model_id}, {"dim", c.embedding.dim}, {"seed", c.embedding.seed}};
  json shots = json::array();
  for (const auto& e : c.detection.few_shot_examples) shots.push_back({{"sentence", e.sentence}, {"is_claim", e.is_claim}});
  j["detection"] = {{"mode", std::string(detection::to_string(c.detection.mode))},
                    {"few_shot_examples", shots},
                    {"max_claims", c.detection.max_claims},
                    {"model_id", c.detection.model_id}};
  j["prompt"] = {{"include_role", c.prompt.include_role},
                 {"include_evidence", c.prompt.include_evidence},
                 {"require_justification", c.prompt.require_justification},
                 {"role_text", c.prompt.role_text},
                 {"temperature", c.prompt.temperature},
                 {"max_tokens", c.prompt.max_tokens},
                 {"model_id", c.prompt.model_id}};
  j["classifier"] = {{"kind", std::string(veracity::to_string(c.classifier.kind))},
                     {"endpoint", c.classifier.endpoint ? json(*c.classifier.endpoint) : json(nullptr)},
                     {"label_space", label_space_json(c.classifier.label_space)},
                     {"seed", c.classifier.seed}};
  j["corpus_path"] = c.corpus_path;
  j["index_path"] = c.index_path;
  j["cache_path"] = c.cache_path;
  j["cache_max_entries"] = c.cache_max_entries;
  j["llm_cache_path"] = c.llm_cache_path;
  j["endpoints"] = {{"llm", endpoint_json(c.llm)},
                    {"embed", endpoint_json(c.embed)},
                    {"classifier", endpoint_json(c.classifier_endpoint, false)},
                    {"stt", endpoint_json(c.stt)}};
  j["fetch"] = {{"timeout_ms", c.fetch.timeout.count()},
                {"max_bytes", c.fetch.max_bytes},
                {"max_redirects", c.fetch.max_redirects}};
  j["audio_decoder"] = c.audio_decoder;
  j["mock_backends"] = c.mock_backends;
  j["mock"] = {{"llm_fixture", c.mock_llm_fixture}, {"stt_fixture", c.mock_stt_fixture}};
  j["backend_concurrency"] = c.backend_concurrency;
  j["limits"] = {{"max_claim_chars", c.max_claim_chars}, {"max_upload_bytes", c.max_upload_bytes}};
  return j;
}

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  ObjectReader root(j, "");
  if (auto r = root.child("retrieval")) {
    r->get("top_k", c.retrieval.top_k);
    r->get("evidence_m", c.retrieval.evidence_m);
    r->get_with("retriever", [&](const json& v) { c.retrieval.retriever = parse_retriever(v.get<std::string>()); });
    r->get("separator", c.retrieval.separator);
    r->get_with("dense_mode", [&](const json& v) { c.dense_mode = retrieval::parse_dense_mode(v.get<std::string>()); });
    if (auto h = r->child("hnsw")) {
      h->get("M", c.hnsw.M);
      h->get("ef_construction", c.hnsw.ef_construction);
      h->get("ef_search", c.hnsw.ef_search);
      h->get("seed", c.hnsw.seed);
      h->finish();
    }
    if (auto b = r->child("bm25")) {
      b->get("k1", c.bm25.k1);
      b->get("b", c.bm25.b);
      b->finish();
    }
    r->finish();
  }
  if (auto r = root.child("embedding")) {
    r->get("model_id", c.embedding.model_id);
    r->get("dim", c.embedding.dim);
    r->get("seed", c.embedding.seed);
    r->finish();
  }
  if (auto r = root.child("detection")) {
    r->get_with("mode", [&](const json& v) { c.detection.mode = detection::parse_mode(v.get<std::string>()); });
    r->get_with("few_shot_examples", [&](const json& v) {
      c.detection.few_shot_examples.clear();
      for (const auto& e : v)
        c.detection.few_shot_examples.push_back({e.at("sentence").get<std::string>(), e.at("is_claim").get<bool>()});
    });
    r->get("max_claims", c.detection.max_claims);
    r->get("model_id", c.detection.model_id);
    r->finish();
  }
  if (auto r = root.child("prompt")) {
    r->get("include_role", c.prompt.include_role);
    r->get("include_evidence", c.prompt.include_evidence);
    r->get("require_justification", c.prompt.require_justification);
    r->get("role_text", c.prompt.role_text);
    r->get("temperature", c.prompt.temperature);
    r->get("max_tokens", c.prompt.max_tokens);
    r->get("model_id", c.prompt.model_id);
    r->finish();
  }
  if (auto r = root.child("classifier")) {
    r->get_with("kind", [&](const json& v) { c.classifier.kind = veracity::parse_backend_kind(v.get<std::string>()); });
    r->get_with("endpoint", [&](const json& v) {
      if (v.is_null() || (v.is_string() && v.get<std::string>().empty()))
        c.classifier.endpoint.reset();
      else
        c.classifier.endpoint = v.get<std::string>();
    });
    r->get_with("label_space", [&](const json& v) {
      c.classifier.label_space.clear();
      for (const auto& l : v) c.classifier.label_space.push_back(parse_label(l.get<std::string>()));
    });
    r->get("seed", c.classifier.seed);
    r->finish();
  }
  root.get("corpus_path", c.corpus_path);
  root.get("index_path", c.index_path);
  root.get("cache_path", c.cache_path);
  root.get("cache_max_entries", c.cache_max_entries);
  root.get("llm_cache_path", c.llm_cache_path);
  if (auto r = root.child("endpoints")) {
    if (auto e = r->child("llm")) read_endpoint(*e, c.llm);
    if (auto e = r->child("embed")) read_endpoint(*e, c.embed);
    if (auto e = r->child("classifier")) read_endpoint(*e, c.classifier_endpoint, false);
    if (auto e = r->child("stt")) read_endpoint(*e, c.stt);
    r->finish();
  }
  if (auto r = root.child("fetch")) {
    r->get_ms("timeout_ms", c.fetch.timeout);
    r->get("max_bytes", c.fetch.max_bytes);
    r->get("max_redirects", c.fetch.max_redirects);
    r->finish();
  }
  root.get("audio_decoder", c.audio_decoder);
  root.get("mock_backends", c.mock_backends);
  if (auto r = root.child("mock")) {
    r->get("llm_fixture", c.mock_llm_fixture);
    r->get("stt_fixture", c.mock_stt_fixture);
    r->finish();
  }
  root.get("backend_concurrency", c.backend_concurrency);
  if (auto r = root.child("limits")) {
    r->get("max_claim_chars", c.max_claim_chars);
    r->get("max_upload_bytes", c.max_upload_bytes);
    r->finish();
  }
  root.finish();
  validate(c);
  return c;
}

void apply_env_overrides(PipelineConfig& cfg) {
  if (const char* v = std::getenv("CER_LLM_ENDPOINT"); v && *v) cfg.llm.url = v;
  if (const char* v = std::getenv("CER_EMBED_ENDPOINT"); v && *v) cfg.embed.url = v;
  if (const char* v = std::getenv("CER_CLASSIFIER_ENDPOINT"); v && *v) cfg.classifier.endpoint = std::string(v);
}

PipelineConfig load_config(const std::string& path) {
  PipelineConfig cfg;
  if (!path.empty()) {
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, path + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, e.what());
    }
    cfg = config_from_json(j);
    // Relative data paths resolve against the config file's directory.
    const auto base = std::filesystem::path(path).parent_path();
    for (std::string* p : {&cfg.corpus_path, &cfg.index_path, &cfg.cache_path, &cfg.llm_cache_path,
                           &cfg.mock_llm_fixture, &cfg.mock_stt_fixture})
      if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  apply_env_overrides(cfg);
  validate(cfg);
  return cfg;
}

std::string fingerprint(const PipelineConfig& cfg) {
  json j = to_json(cfg);
  for (const char* k : {"cache_path", "cache_max_entries", "llm_cache_path", "backend_concurrency", "limits"}) j.erase(k);
  return sha256_hex(j.dump());
}

std::string normalize_claim_text(std::string_view text) {
  std::string out;
  bool space = false;
  for (const char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

std::string AssessmentCache::key(std::string_view claim_text, std::string_view fingerprint) {
  return sha256_hex(normalize_claim_text(claim_text) + std::string(fingerprint));
}

std::optional<ClaimAssessment> AssessmentCache::get(const std::string& key) {
  auto raw = log_.get(key);
  if (!raw) return std::nullopt;
  try {
    return json::parse(*raw).get<ClaimAssessment>();
  } catch (const std::exception& e) {
    std::cerr << "cache: dropping undecodable entry " << key << ": " << e.what() << "\n";
    log_.erase(key);
    return std::nullopt;
  }
}

void AssessmentCache::put(const std::string& key, const ClaimAssessment& a) { log_.put(key, json(a).dump()); }

Backends make_mock_backends(const PipelineConfig& cfg) {
  Backends b;
  auto llm = std::make_shared<llm::MockBackend>(mock_llm_reply);
  if (!cfg.mock_llm_fixture.empty()) llm->load_canned(cfg.mock_llm_fixture);
  b.llm = llm;
  b.embedder = std::make_shared<retrieval::MockEmbedding>(cfg.embedding.dim, cfg.embedding.seed);
  auto spec = cfg.classifier;
  spec.kind = veracity::BackendKind::Mock;
  b.classifier = std::make_shared<veracity::MockClassifier>(spec);
  b.stt = cfg.mock_stt_fixture.empty()
              ? std::make_shared<ingest::MockSpeechToText>()
              : std::make_shared<ingest::MockSpeechToText>(ingest::MockSpeechToText::from_file(cfg.mock_stt_fixture));
  return b;
}

Backends make_http_backends(const PipelineConfig& cfg) {
  Backends b;
  auto mock = make_mock_backends(cfg);
  if (cfg.llm.url.empty()) throw Error(ErrorCode::ConfigError, "endpoints.llm.url is required without mock backends");
  if (cfg.embed.url.empty()) throw Error(ErrorCode::ConfigError, "endpoints.embed.url is required without mock backends");
  b.llm = std::make_shared<llm::HttpBackend>(cfg.llm.to_http());
  b.embedder = std::make_shared<retrieval::HttpEmbedding>(cfg.embed.to_http(), cfg.embedding.model_id, cfg.embedding.dim);
  if (cfg.classifier.kind == veracity::BackendKind::Mock) {
    b.classifier = mock.classifier;
  } else {
    auto ep = cfg.classifier_endpoint;
    ep.url = *cfg.classifier.endpoint;
    b.classifier = std::make_shared<veracity::HttpClassifier>(cfg.classifier, ep.to_http());
  }
  if (cfg.stt.url.empty()) {
    b.stt = mock.stt;
  } else {
    std::optional<ingest::AudioDecoder> decoder;
    if (!cfg.audio_decoder.empty()) decoder.emplace(cfg.audio_decoder);
    b.stt = std::make_shared<ingest::HttpSpeechToText>(cfg.stt.to_http(), std::move(decoder));
  }
  return b;
}

Pipeline::Pipeline(PipelineConfig cfg)
    : Pipeline(cfg, cfg.mock_backends ? make_mock_backends(cfg) : make_http_backends(cfg)) {
  load_corpus_from_config();
}

Pipeline::Pipeline(PipelineConfig cfg, Backends backends) : cfg_(std::move(cfg)), raw_(std::move(backends)) {
  validate(cfg_);
  fingerprint_ = pipeline::fingerprint(cfg_);
  wire();
  auto empty = std::make_shared<Snapshot>();
  empty->corpus = std::make_shared<const corpus::Corpus>();
  std::atomic_store(&snapshot_, std::shared_ptr<const Snapshot>(std::move(empty)));
}

void Pipeline::wire() {
  limit_ = std::make_shared<llm::InFlightLimit>(cfg_.backend_concurrency);
  std::shared_ptr<llm::Backend> llm = raw_.llm;
  if (!cfg_.llm_cache_path.empty())
    llm = std::make_shared<llm::CachingBackend>(llm, std::make_shared<KvLog>(cfg_.llm_cache_path, cfg_.cache_max_entries));
  llm_ = std::make_shared<llm::LimitedBackend>(llm, limit_);
  raw_.classifier = std::make_shared<LimitedClassifier>(raw_.classifier, limit_);
  if (!cfg_.cache_path.empty()) cache_ = std::make_unique<AssessmentCache>(cfg_.cache_path, cfg_.cache_max_entries);
}

void Pipeline::load_corpus_from_config() {
  if (cfg_.corpus_path.empty()) return;
  if (!std::filesystem::exists(cfg_.corpus_path)) {
    std::cerr << "corpus " << cfg_.corpus_path << " not found; starting with an empty corpus\n";
    return;
  }
  auto corpus = std::make_shared<const corpus::Corpus>(corpus::corpus_load(cfg_.corpus_path));
  if (!cfg_.index_path.empty() && std::filesystem::exists(std::filesystem::path(cfg_.index_path) / "meta.json")) {
    auto bundle = std::make_shared<const retrieval::IndexBundle>(retrieval::load_indexes(cfg_.index_path));
    if (bundle->corpus_hash == corpus->content_hash()) {
      set_snapshot(std::move(corpus), std::move(bundle));
      return;
    }
    std::cerr << "index at " << cfg_.index_path << " was built for a different corpus; rebuilding in memory\n";
  }
  set_corpus(*corpus);
}

void Pipeline::set_corpus(corpus::Corpus c) {
  auto corpus = std::make_shared<const corpus::Corpus>(std::move(c));
  auto bundle = std::make_shared<const retrieval::IndexBundle>(
      retrieval::build_indexes(*corpus, *raw_.embedder, cfg_.dense_mode, cfg_.hnsw, cfg_.bm25));
  set_snapshot(std::move(corpus), std::move(bundle));
}

void Pipeline::set_snapshot(std::shared_ptr<const corpus::Corpus> corpus,
                            std::shared_ptr<const retrieval::IndexBundle> indexes) {
  auto s = std::make_shared<Snapshot>();
  s->corpus = std::move(corpus);
  s->indexes = std::move(indexes);
  std::atomic_store(&snapshot_, std::shared_ptr<const Snapshot>(std::move(s)));
}

std::size_t Pipeline::corpus_size() const { return snapshot()->corpus->size(); }

VerifyOutcome Pipeline::verify_claim(const Claim& claim, bool use_cache) {
  validate(claim);
  std::string key;
  if (use_cache && cache_) {
    key = AssessmentCache::key(claim.text, fingerprint_);
    if (auto hit = cache_->get(key)) {
      hit->claim = claim;
      return {std::move(*hit), true};
    }
  }

  bool degraded = false;
  std::vector<EvidencePassage> evidence;
  const auto snap = snapshot();
  if (snap->indexes && !snap->corpus->empty()) {
    try {
      retrieval::EvidenceRetriever retriever(snap->corpus, snap->indexes, raw_.embedder, cfg_.retrieval);
      evidence = retriever.retrieve(claim.text);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigError) throw;
      std::cerr << "retrieval failed for " << claim.id << ": " << e.what() << "\n";
      degraded = true;
    }
  }

  Justification justification;
  justification.model_id = cfg_.prompt.model_id;
  try {
    justification = reasoning::reason(claim, evidence, cfg_.prompt, *llm_).justification;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    std::cerr << "reasoning failed for " << claim.id << ": " << e.what() << "\n";
    degraded = true;
  }

  auto a = veracity::assess(claim, std::move(evidence), justification, *raw_.classifier, fingerprint_, degraded);
  if (use_cache && cache_ && !a.degraded) cache_->put(key, a);
  return {std::move(a), false};
}

VerifyOutcome Pipeline::verify_text(std::string_view text) {
  const std::string norm = normalize_claim_text(text);
  if (norm.empty()) throw Error(ErrorCode::InvalidArgument, "claim text is empty");
  if (count_code_points(norm) > cfg_.max_claim_chars)
    throw Error(ErrorCode::InvalidArgument,
                "claim text exceeds " + std::to_string(cfg_.max_claim_chars) + " characters");
  Claim c;
  c.id = "claim:" + sha256_hex(norm).substr(0, 16);
  c.text = norm;
  c.source = ClaimSource::Direct;
  return verify_claim(c);
}

std::vector<ClaimAssessment> Pipeline::verify_document(const ingest::SourceDocument& doc) {
  const auto claims = detection::detect_claims(doc, cfg_.detection, llm_.get());
  std::vector<ClaimAssessment> out(claims.size());
  std::vector<std::exception_ptr> errors(claims.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < claims.size(); i = next++) {
      try {
        out[i] = verify_claim(claims[i]).assessment;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(cfg_.backend_concurrency), claims.size());
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

ingest::SourceDocument Pipeline::load_url(const std::string& url) const {
  const auto html = ingest::fetch_url(url, cfg_.fetch);
  return ingest::make_web_document(url, ingest::extract_web_text(html));
}

ingest::SourceDocument Pipeline::load_video(std::span<const std::byte> media, std::optional<std::string> uri,
                                            std::optional<std::string> lang_hint) const {
  if (media.size() > cfg_.max_upload_bytes)
    throw Error(ErrorCode::TooLarge, "upload exceeds " + std::to_string(cfg_.max_upload_bytes) + " bytes");
  if (!lang_hint) lang_hint = std::string(ingest::kDefaultLangHint);
  auto segments = raw_.stt->transcribe(media, lang_hint);
  if (!uri) uri = "upload:" + sha256_hex(media).substr(0, 16);
  return ingest::make_video_document(std::move(uri), std::move(segments));
}

}  // namespace cer::pipeline
