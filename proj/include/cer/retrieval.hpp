#pragma once

// Dense (embedding cosine) and sparse (Okapi BM25) evidence retrieval.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cer/core.hpp"
#include "cer/corpus.hpp"
#include "cer/hnsw.hpp"
#include "cer/http_json.hpp"

namespace cer::retrieval {

inline constexpr std::size_t kDefaultDim = 384;
inline constexpr double kUnitNormTolerance = 1e-6;

/// Unit-norm embedding.
struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

/// L2-normalizes; throws InvalidBackendOutput for zero or non-finite input.
EmbeddingVector normalize(std::span<const double> v);
EmbeddingVector normalize(std::span<const float> v);
double l2_norm(std::span<const float> v);
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) = 0;
  EmbeddingVector embed(const std::string& text);
};

/// Seeded pseudo-random projection of the text's token multiset: each token
/// maps to a fixed vector derived from hash(seed, token); the sum is normalized.
class MockEmbedding final : public EmbeddingBackend {
 public:
  explicit MockEmbedding(std::size_t dim = kDefaultDim, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}
  std::size_t dim() const override { return dim_; }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// HTTP adapter: POST {"model_id","texts":[...]} -> {"vectors":[[...]]}.
class HttpEmbedding final : public EmbeddingBackend {
 public:
  HttpEmbedding(HttpEndpoint endpoint, std::string model_id, std::size_t dim)
      : endpoint_(std::move(endpoint)), model_id_(std::move(model_id)), dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

 private:
  HttpEndpoint endpoint_;
  std::string model_id_;
  std::size_t dim_;
};

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;
  bool operator==(const ScoredDoc&) const = default;
};

/// Descending score, ascending doc_id within ties.
bool ranks_before(const ScoredDoc& a, const ScoredDoc& b);

enum class DenseMode { ExactFlat, ApproxHnsw };
std::string_view to_string(DenseMode m);
DenseMode parse_dense_mode(std::string_view s);

class DenseIndex {
 public:
  DenseIndex() = default;

  /// Throws DimensionMismatch, DuplicateDocId, or InvalidArgument (non-unit vector).
  static DenseIndex build(std::size_t dim, std::vector<std::pair<std::string, EmbeddingVector>> entries,
                          DenseMode mode, HnswParams params = {});

  /// Top-min(k, N) by inner product. Exact in ExactFlat mode; HNSW in ApproxHnsw mode.
  /// Throws EmptyIndex, DimensionMismatch, or InvalidArgument (k < 1).
  std::vector<ScoredDoc> search(const EmbeddingVector& query, std::size_t k) const;
  /// Brute-force scan regardless of mode.
  std::vector<ScoredDoc> search_exact(const EmbeddingVector& query, std::size_t k) const;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return doc_ids_.size(); }
  DenseMode mode() const { return mode_; }
  const HnswParams& hnsw_params() const { return params_; }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  /// Writes doc_ids.json, vectors.bin and hnsw.bin; returns the meta fields.
  nlohmann::json save(const std::string& dir) const;
  static DenseIndex load(const std::string& dir, const nlohmann::json& meta);

 private:
  void check_query(const EmbeddingVector& query, std::size_t k) const;
  std::vector<ScoredDoc> finish(std::vector<ScoredDoc> hits, std::size_t k) const;

  std::size_t dim_ = 0;
  DenseMode mode_ = DenseMode::ExactFlat;
  HnswParams params_;
  std::vector<std::string> doc_ids_;
  std::vector<float> data_;
  std::optional<HnswGraph> graph_;
};

std::vector<ScoredDoc> dense_search(const DenseIndex& index, const EmbeddingVector& query, std::size_t k);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

class SparseIndex {
 public:
  struct Posting {
    std::uint32_t doc = 0;  // index into doc_ids()
    std::uint32_t tf = 0;
  };

  SparseIndex() = default;
  static SparseIndex build(const std::vector<corpus::ProcessedDoc>& docs, Bm25Params params = {});

  /// BM25 over the query tokens (repeated tokens count repeatedly). Zero-score
  /// docs are omitted. Throws EmptyIndex or InvalidArgument (k < 1).
  std::vector<ScoredDoc> search(std::span<const std::string> query_tokens, std::size_t k) const;

  /// ln((N - df + 0.5) / (df + 0.5) + 1)
  double idf(std::size_t df) const;

  std::size_t size() const { return doc_ids_.size(); }
  double avg_doc_len() const { return avg_doc_len_; }
  const Bm25Params& params() const { return params_; }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }
  const std::map<std::string, std::vector<Posting>>& postings() const { return postings_; }

  /// Writes postings.jsonl and doc_lengths.json; returns the meta fields.
  nlohmann::json save(const std::string& dir) const;
  static SparseIndex load(const std::string& dir, const nlohmann::json& meta);

 private:
  void finalize();

  Bm25Params params_;
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_lengths_;
  std::map<std::string, std::vector<Posting>> postings_;
  double avg_doc_len_ = 0.0;
};

std::vector<ScoredDoc> sparse_search(const SparseIndex& index, std::span<const std::string> query_tokens,
                                     std::size_t k);

struct RetrievalConfig {
  std::size_t top_k = 20;
  std::size_t evidence_m = 3;
  RetrieverKind retriever = RetrieverKind::Dense;
  std::string separator = "[SEP]";
};

/// Throws ConfigError unless 1 <= evidence_m <= min(top_k, 3) and separator is non-empty.
void validate(const RetrievalConfig& cfg);

/// First min(evidence_m, |ranked|) hits materialized from the corpus. Hits
/// whose doc is missing from the corpus are skipped.
std::vector<EvidencePassage> select_evidence(std::span<const ScoredDoc> ranked, const corpus::Corpus& corpus,
                                             const RetrievalConfig& cfg, RetrieverKind retriever);

/// claim + " <sep> " + e1 + " <sep> " + ... with no trailing separator.
/// Separator occurrences inside the parts are blanked so the output holds
/// exactly |evidence| separators.
std::string format_claim_evidence(std::string_view claim_text, std::span<const EvidencePassage> evidence,
                                  std::string_view sep = "[SEP]");

/// Replaces every occurrence of `sep` in `text` with a single space.
std::string strip_separator(std::string_view text, std::string_view sep);

/// Text embedded for a corpus doc: title + " " + abstract.
std::string dense_text(const corpus::CorpusDoc& doc);

/// Dense and sparse indexes built from one corpus snapshot.
struct IndexBundle {
  DenseIndex dense;
  SparseIndex sparse;
  std::string corpus_hash;
};

IndexBundle build_indexes(const corpus::Corpus& corpus, EmbeddingBackend& embedder, DenseMode mode,
                          HnswParams params = {}, Bm25Params bm25 = {});

/// Directory layout: meta.json, doc_ids.json, vectors.bin (LE float32 row-major),
/// hnsw.bin (approx mode), postings.jsonl, doc_lengths.json.
void save_indexes(const IndexBundle& bundle, const std::string& dir);
IndexBundle load_indexes(const std::string& dir);

/// Ranks the corpus for a claim and selects evidence.
class EvidenceRetriever {
 public:
  EvidenceRetriever(std::shared_ptr<const corpus::Corpus> corpus, std::shared_ptr<const IndexBundle> indexes,
                    std::shared_ptr<EmbeddingBackend> embedder, RetrievalConfig cfg);

  std::vector<ScoredDoc> rank(const std::string& claim_text) const;
  std::vector<EvidencePassage> retrieve(const std::string& claim_text) const;

  const RetrievalConfig& config() const { return cfg_; }

 private:
  std::shared_ptr<const corpus::Corpus> corpus_;
  std::shared_ptr<const IndexBundle> indexes_;
  std::shared_ptr<EmbeddingBackend> embedder_;
  RetrievalConfig cfg_;
};

}  // namespace cer::retrieval
