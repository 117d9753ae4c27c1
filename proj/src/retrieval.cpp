#include "cer/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cer/util.hpp"

namespace cer::retrieval {

namespace fs = std::filesystem;

namespace {

template <typename T>
EmbeddingVector normalize_impl(std::span<const T> v) {
  double sq = 0.0;
  for (const T x : v) {
    if (!std::isfinite(static_cast<double>(x))) throw Error(ErrorCode::InvalidBackendOutput, "non-finite embedding");
    sq += static_cast<double>(x) * static_cast<double>(x);
  }
  if (sq == 0.0) throw Error(ErrorCode::InvalidBackendOutput, "zero embedding");
  const double inv = 1.0 / std::sqrt(sq);
  EmbeddingVector out;
  out.values.reserve(v.size());
  for (const T x : v) out.values.push_back(static_cast<float>(static_cast<double>(x) * inv));
  return out;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

}  // namespace

EmbeddingVector normalize(std::span<const double> v) { return normalize_impl(v); }
EmbeddingVector normalize(std::span<const float> v) { return normalize_impl(v); }

double l2_norm(std::span<const float> v) { return std::sqrt(dot(v, v)); }

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) throw Error(ErrorCode::DimensionMismatch, "cosine of different dimensions");
  return dot(a.values, b.values);
}

EmbeddingVector EmbeddingBackend::embed(const std::string& text) {
  auto out = embed_batch(std::span<const std::string>(&text, 1));
  if (out.size() != 1) throw Error(ErrorCode::InvalidBackendOutput, "embedding backend returned wrong count");
  return std::move(out.front());
}

std::vector<EmbeddingVector> MockEmbedding::embed_batch(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  std::vector<double> acc(dim_);
  for (const auto& text : texts) {
    std::fill(acc.begin(), acc.end(), 0.0);
    auto tokens = corpus::preprocess(text).tokens;
    if (tokens.empty()) tokens.push_back("\x01empty");
    for (const auto& tok : tokens) {
      std::uint64_t state = stable_hash64(std::to_string(seed_) + ":" + tok);
      for (std::size_t i = 0; i < dim_; ++i) {
        const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
        acc[i] += 2.0 * u - 1.0;
      }
    }
    out.push_back(normalize(std::span<const double>(acc)));
  }
  return out;
}

std::vector<EmbeddingVector> HttpEmbedding::embed_batch(std::span<const std::string> texts) {
  const nlohmann::json req{{"model_id", model_id_}, {"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  const auto res = post_json(endpoint_, req);
  std::vector<std::vector<double>> raw;
  try {
    raw = res.at("vectors").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidBackendOutput, std::string("embedding reply: ") + e.what());
  }
  if (raw.size() != texts.size()) throw Error(ErrorCode::InvalidBackendOutput, "embedding reply has wrong count");
  std::vector<EmbeddingVector> out;
  for (const auto& v : raw) {
    if (v.size() != dim_)
      throw Error(ErrorCode::DimensionMismatch,
                  "expected dim " + std::to_string(dim_) + ", got " + std::to_string(v.size()));
    out.push_back(normalize(std::span<const double>(v)));
  }
  return out;
}

bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

std::string_view to_string(DenseMode m) { return m == DenseMode::ExactFlat ? "exact_flat" : "approx_hnsw"; }

DenseMode parse_dense_mode(std::string_view s) {
  if (s == "exact_flat") return DenseMode::ExactFlat;
  if (s == "approx_hnsw") return DenseMode::ApproxHnsw;
  throw Error(ErrorCode::ConfigError, "unknown dense index mode '" + std::string(s) + "'");
}

DenseIndex DenseIndex::build(std::size_t dim, std::vector<std::pair<std::string, EmbeddingVector>> entries,
                             DenseMode mode, HnswParams params) {
  if (dim == 0) throw Error(ErrorCode::InvalidArgument, "dimension must be positive");
  DenseIndex idx;
  idx.dim_ = dim;
  idx.mode_ = mode;
  idx.params_ = params;
  idx.doc_ids_.reserve(entries.size());
  idx.data_.reserve(entries.size() * dim);
  std::unordered_map<std::string, std::size_t> seen;
  for (auto& [id, vec] : entries) {
    if (vec.dim() != dim)
      throw Error(ErrorCode::DimensionMismatch, id + " has dim " + std::to_string(vec.dim()));
    if (std::abs(l2_norm(vec.values) - 1.0) > 1e-5) throw Error(ErrorCode::InvalidArgument, id + " is not unit norm");
    if (!seen.emplace(id, idx.doc_ids_.size()).second) throw Error(ErrorCode::DuplicateDocId, id);
    idx.doc_ids_.push_back(std::move(id));
    idx.data_.insert(idx.data_.end(), vec.values.begin(), vec.values.end());
  }
  if (mode == DenseMode::ApproxHnsw) {
    idx.graph_.emplace(dim, params);
    idx.graph_->build(idx.data_, idx.doc_ids_.size());
  }
  return idx;
}

void DenseIndex::check_query(const EmbeddingVector& query, std::size_t k) const {
  if (doc_ids_.empty()) throw Error(ErrorCode::EmptyIndex, "dense index is empty");
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (query.dim() != dim_)
    throw Error(ErrorCode::DimensionMismatch,
                "query dim " + std::to_string(query.dim()) + " vs index dim " + std::to_string(dim_));
}

std::vector<ScoredDoc> DenseIndex::finish(std::vector<ScoredDoc> hits, std::size_t k) const {
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), ranks_before);
  hits.resize(keep);
  return hits;
}

std::vector<ScoredDoc> DenseIndex::search_exact(const EmbeddingVector& query, std::size_t k) const {
  check_query(query, k);
  std::vector<ScoredDoc> hits;
  hits.reserve(doc_ids_.size());
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) hits.push_back({doc_ids_[i], dot(row(i), query.values)});
  return finish(std::move(hits), k);
}

std::vector<ScoredDoc> DenseIndex::search(const EmbeddingVector& query, std::size_t k) const {
  if (mode_ == DenseMode::ExactFlat || !graph_) return search_exact(query, k);
  check_query(query, k);
  std::vector<ScoredDoc> hits;
  for (const auto& [row_id, s] : graph_->search(data_, query.values, k, params_.ef_search))
    hits.push_back({doc_ids_[row_id], s});
  return finish(std::move(hits), k);
}

std::vector<ScoredDoc> dense_search(const DenseIndex& index, const EmbeddingVector& query, std::size_t k) {
  return index.search(query, k);
}

nlohmann::json DenseIndex::save(const std::string& dir) const {
  fs::create_directories(dir);
  write_file_atomic((fs::path(dir) / "doc_ids.json").string(), nlohmann::json(doc_ids_).dump());
  write_file_atomic((fs::path(dir) / "vectors.bin").string(),
                    std::string_view(reinterpret_cast<const char*>(data_.data()), data_.size() * sizeof(float)));
  if (graph_) {
    std::ostringstream g;
    graph_->write(g);
    write_file_atomic((fs::path(dir) / "hnsw.bin").string(), g.str());
  }
  return {{"dim", dim_},
          {"mode", to_string(mode_)},
          {"doc_count", doc_ids_.size()},
          {"hnsw", {{"M", params_.M}, {"ef_construction", params_.ef_construction}, {"ef_search", params_.ef_search},
                    {"seed", params_.seed}}}};
}

DenseIndex DenseIndex::load(const std::string& dir, const nlohmann::json& meta) {
  DenseIndex idx;
  try {
    idx.dim_ = meta.at("dim").get<std::size_t>();
    idx.mode_ = parse_dense_mode(meta.at("mode").get<std::string>());
    const auto& h = meta.at("hnsw");
    idx.params_ = {h.at("M").get<int>(), h.at("ef_construction").get<int>(), h.at("ef_search").get<int>(),
                   h.at("seed").get<std::uint64_t>()};
    idx.doc_ids_ = nlohmann::json::parse(read_file((fs::path(dir) / "doc_ids.json").string()))
                       .get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, "dense index meta: " + std::string(e.what()));
  }
  const std::string raw = read_file((fs::path(dir) / "vectors.bin").string());
  if (raw.size() != idx.doc_ids_.size() * idx.dim_ * sizeof(float))
    throw Error(ErrorCode::FormatError, "vectors.bin size does not match doc count and dim");
  idx.data_.resize(idx.doc_ids_.size() * idx.dim_);
  std::memcpy(idx.data_.data(), raw.data(), raw.size());
  if (idx.mode_ == DenseMode::ApproxHnsw) {
    std::ifstream g(fs::path(dir) / "hnsw.bin", std::ios::binary);
    if (!g) throw Error(ErrorCode::IoError, "missing hnsw.bin");
    idx.graph_ = HnswGraph::read(g, idx.dim_);
    if (idx.graph_->size() != idx.doc_ids_.size()) throw Error(ErrorCode::FormatError, "hnsw graph size mismatch");
  }
  return idx;
}

SparseIndex SparseIndex::build(const std::vector<corpus::ProcessedDoc>& docs, Bm25Params params) {
  SparseIndex idx;
  idx.params_ = params;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& d : docs) {
    if (!seen.emplace(d.doc_id, idx.doc_ids_.size()).second) throw Error(ErrorCode::DuplicateDocId, d.doc_id);
    const auto doc = static_cast<std::uint32_t>(idx.doc_ids_.size());
    idx.doc_ids_.push_back(d.doc_id);
    idx.doc_lengths_.push_back(static_cast<std::uint32_t>(d.tokens.size()));
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : d.tokens) ++tf[t];
    for (const auto& [t, n] : tf) idx.postings_[t].push_back({doc, n});
  }
  idx.finalize();
  return idx;
}

void SparseIndex::finalize() {
  const double total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), 0.0);
  avg_doc_len_ = doc_lengths_.empty() ? 0.0 : total / static_cast<double>(doc_lengths_.size());
}

double SparseIndex::idf(std::size_t df) const {
  const double n = static_cast<double>(doc_ids_.size());
  const double d = static_cast<double>(df);
  return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
}

std::vector<ScoredDoc> SparseIndex::search(std::span<const std::string> query_tokens, std::size_t k) const {
  if (doc_ids_.empty()) throw Error(ErrorCode::EmptyIndex, "sparse index is empty");
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  std::vector<double> scores(doc_ids_.size(), 0.0);
  const double avgdl = avg_doc_len_ > 0.0 ? avg_doc_len_ : 1.0;
  for (const auto& tok : query_tokens) {
    const auto it = postings_.find(tok);
    if (it == postings_.end()) continue;
    const double w = idf(it->second.size());
    for (const auto& p : it->second) {
      const double tf = p.tf;
      const double norm = params_.k1 * (1.0 - params_.b + params_.b * doc_lengths_[p.doc] / avgdl);
      scores[p.doc] += w * tf * (params_.k1 + 1.0) / (tf + norm);
    }
  }
  std::vector<ScoredDoc> hits;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] > 0.0) hits.push_back({doc_ids_[i], scores[i]});
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), ranks_before);
  hits.resize(keep);
  return hits;
}

std::vector<ScoredDoc> sparse_search(const SparseIndex& index, std::span<const std::string> query_tokens,
                                     std::size_t k) {
  return index.search(query_tokens, k);
}

nlohmann::json SparseIndex::save(const std::string& dir) const {
  fs::create_directories(dir);
  std::string lines;
  for (const auto& [tok, list] : postings_) {
    auto arr = nlohmann::json::array();
    for (const auto& p : list) arr.push_back({doc_ids_[p.doc], p.tf});
    lines += nlohmann::json{{"token", tok}, {"postings", arr}}.dump();
    lines.push_back('\n');
  }
  write_file_atomic((fs::path(dir) / "postings.jsonl").string(), lines);
  auto lengths = nlohmann::json::array();
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) lengths.push_back({doc_ids_[i], doc_lengths_[i]});
  write_file_atomic((fs::path(dir) / "doc_lengths.json").string(), lengths.dump());
  return {{"k1", params_.k1}, {"b", params_.b}, {"doc_count", doc_ids_.size()}, {"avg_doc_len", avg_doc_len_}};
}

SparseIndex SparseIndex::load(const std::string& dir, const nlohmann::json& meta) {
  SparseIndex idx;
  try {
    idx.params_ = {meta.at("k1").get<double>(), meta.at("b").get<double>()};
    std::unordered_map<std::string, std::uint32_t> row;
    for (const auto& e : nlohmann::json::parse(read_file((fs::path(dir) / "doc_lengths.json").string()))) {
      row[e.at(0).get<std::string>()] = static_cast<std::uint32_t>(idx.doc_ids_.size());
      idx.doc_ids_.push_back(e.at(0).get<std::string>());
      idx.doc_lengths_.push_back(e.at(1).get<std::uint32_t>());
    }
    std::istringstream in(read_file((fs::path(dir) / "postings.jsonl").string()));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      auto& list = idx.postings_[j.at("token").get<std::string>()];
      for (const auto& p : j.at("postings")) {
        const auto it = row.find(p.at(0).get<std::string>());
        if (it == row.end()) throw Error(ErrorCode::FormatError, "posting for unknown doc");
        list.push_back({it->second, p.at(1).get<std::uint32_t>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, "sparse index: " + std::string(e.what()));
  }
  idx.finalize();
  return idx;
}

void validate(const RetrievalConfig& cfg) {
  if (cfg.top_k < 1) throw Error(ErrorCode::ConfigError, "top_k must be positive");
  if (cfg.evidence_m < 1 || cfg.evidence_m > cfg.top_k || cfg.evidence_m > kMaxEvidence)
    throw Error(ErrorCode::ConfigError, "evidence_m must be in [1, min(top_k, 3)]");
  if (cfg.separator.empty()) throw Error(ErrorCode::ConfigError, "separator must be non-empty");
}

std::vector<EvidencePassage> select_evidence(std::span<const ScoredDoc> ranked, const corpus::Corpus& corpus,
                                             const RetrievalConfig& cfg, RetrieverKind retriever) {
  std::vector<EvidencePassage> out;
  for (const auto& hit : ranked) {
    if (out.size() >= cfg.evidence_m) break;
    const auto* doc = corpus.find(hit.doc_id);
    if (!doc) continue;
    out.push_back({doc->doc_id, doc->title, doc->abstract, hit.score, retriever});
  }
  return out;
}

std::string strip_separator(std::string_view text, std::string_view sep) {
  std::string out(text);
  if (sep.empty()) return out;
  for (auto pos = out.find(sep); pos != std::string::npos; pos = out.find(sep, pos + 1)) out.replace(pos, sep.size(), " ");
  return out;
}

std::string format_claim_evidence(std::string_view claim_text, std::span<const EvidencePassage> evidence,
                                  std::string_view sep) {
  if (sep.empty()) throw Error(ErrorCode::InvalidArgument, "separator must be non-empty");
  std::string out = strip_separator(claim_text, sep);
  for (const auto& e : evidence) {
    out += " ";
    out += sep;
    out += " ";
    out += strip_separator(e.text, sep);
  }
  return out;
}

std::string dense_text(const corpus::CorpusDoc& doc) { return doc.title + " " + doc.abstract; }

IndexBundle build_indexes(const corpus::Corpus& corpus, EmbeddingBackend& embedder, DenseMode mode,
                          HnswParams params, Bm25Params bm25) {
  IndexBundle bundle;
  bundle.corpus_hash = corpus.content_hash();
  std::vector<std::pair<std::string, EmbeddingVector>> entries;
  std::vector<corpus::ProcessedDoc> processed;
  constexpr std::size_t kBatch = 64;
  const auto& docs = corpus.docs();
  for (std::size_t b = 0; b < docs.size(); b += kBatch) {
    std::vector<std::string> texts;
    for (std::size_t i = b; i < std::min(docs.size(), b + kBatch); ++i) texts.push_back(dense_text(docs[i]));
    auto vecs = embedder.embed_batch(texts);
    for (std::size_t i = 0; i < vecs.size(); ++i) entries.emplace_back(docs[b + i].doc_id, std::move(vecs[i]));
  }
  for (const auto& d : docs) processed.push_back(corpus::process(d));
  bundle.dense = DenseIndex::build(embedder.dim(), std::move(entries), mode, params);
  bundle.sparse = SparseIndex::build(processed, bm25);
  return bundle;
}

void save_indexes(const IndexBundle& bundle, const std::string& dir) {
  fs::create_directories(dir);
  nlohmann::json meta = bundle.dense.save(dir);
  meta["bm25"] = bundle.sparse.save(dir);
  meta["corpus_hash"] = bundle.corpus_hash;
  meta["format_version"] = 1;
  write_file_atomic((fs::path(dir) / "meta.json").string(), meta.dump(2));
}

IndexBundle load_indexes(const std::string& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file((fs::path(dir) / "meta.json").string()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, "meta.json: " + std::string(e.what()));
  }
  IndexBundle bundle;
  bundle.dense = DenseIndex::load(dir, meta);
  bundle.sparse = SparseIndex::load(dir, meta.at("bm25"));
  bundle.corpus_hash = meta.value("corpus_hash", "");
  return bundle;
}

EvidenceRetriever::EvidenceRetriever(std::shared_ptr<const corpus::Corpus> corpus,
                                     std::shared_ptr<const IndexBundle> indexes,
                                     std::shared_ptr<EmbeddingBackend> embedder, RetrievalConfig cfg)
    : corpus_(std::move(corpus)), indexes_(std::move(indexes)), embedder_(std::move(embedder)), cfg_(std::move(cfg)) {
  validate(cfg_);
}

std::vector<ScoredDoc> EvidenceRetriever::rank(const std::string& claim_text) const {
  if (!indexes_ || !corpus_ || corpus_->empty()) return {};
  if (cfg_.retriever == RetrieverKind::Dense) {
    if (indexes_->dense.size() == 0) return {};
    return indexes_->dense.search(embedder_->embed(claim_text), cfg_.top_k);
  }
  if (indexes_->sparse.size() == 0) return {};
  const auto tokens = corpus::preprocess(claim_text).tokens;
  return indexes_->sparse.search(tokens, cfg_.top_k);
}

std::vector<EvidencePassage> EvidenceRetriever::retrieve(const std::string& claim_text) const {
  const auto ranked = rank(claim_text);
  return select_evidence(ranked, *corpus_, cfg_, cfg_.retriever);
}

}  // namespace cer::retrieval
