#pragma once

// Scientific abstract corpus: preprocessing, JSON-Lines storage, and PubMed ingestion.

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cer/core.hpp"

namespace cer::corpus {

struct CorpusDoc {
  std::string doc_id;
  std::string title;
  std::string abstract;
  std::chrono::system_clock::time_point fetched_at{};

  bool operator==(const CorpusDoc&) const = default;
};

struct Preprocessed {
  std::vector<std::string> tokens;
  std::string norm_text;
};

struct ProcessedDoc {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::string norm_text;
};

const std::unordered_set<std::string>& stopwords();

/// NFKC -> lowercase -> split on non-alphanumeric code points -> drop stopwords
/// -> drop tokens shorter than 2 bytes. norm_text is the surviving tokens
/// joined by single spaces.
Preprocessed preprocess(std::string_view text);

ProcessedDoc process(const CorpusDoc& doc);

/// Immutable collection with unique doc ids, in insertion order.
class Corpus {
 public:
  Corpus() = default;
  /// Throws DuplicateDocId or InvalidArgument (empty abstract / id).
  explicit Corpus(std::vector<CorpusDoc> docs);

  const std::vector<CorpusDoc>& docs() const { return docs_; }
  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }
  const CorpusDoc* find(std::string_view doc_id) const;

  /// SHA-256 of the canonical JSON-Lines serialization.
  std::string content_hash() const;

 private:
  std::vector<CorpusDoc> docs_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

std::string to_jsonl_line(const CorpusDoc& doc);
std::string serialize(const Corpus& corpus);
Corpus parse_jsonl(std::string_view contents, std::string_view origin = "<memory>");

Corpus corpus_load(const std::string& path);
void corpus_save(const Corpus& corpus, const std::string& path);

/// Holder for the current corpus snapshot. Readers get a complete snapshot;
/// publishing a new one is an atomic pointer swap.
class CorpusStore {
 public:
  std::shared_ptr<const Corpus> snapshot() const { return std::atomic_load(&current_); }
  void publish(std::shared_ptr<const Corpus> next) { std::atomic_store(&current_, std::move(next)); }

 private:
  std::shared_ptr<const Corpus> current_ = std::make_shared<const Corpus>();
};

/// Spaces requests at least 1/rate apart. Thread safe.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_second);
  void acquire();

 private:
  std::mutex mu_;
  std::chrono::steady_clock::duration interval_;
  std::chrono::steady_clock::time_point next_{};
};

struct PubMedConfig {
  std::string base_url = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";
  std::optional<std::string> api_key;  // defaults from CER_PUBMED_API_KEY
  double requests_per_second = 3.0;
  int retries = 2;
  std::chrono::milliseconds backoff{500};
  std::chrono::milliseconds timeout{15000};
};

/// NCBI E-utilities client: esearch.fcgi (JSON id list) then efetch.fcgi (XML abstracts).
class PubMedClient {
 public:
  explicit PubMedClient(PubMedConfig cfg);

  /// Up to max_docs abstracts for the query, in esearch rank order. Articles
  /// without an abstract are skipped. Throws RateLimited (HTTP 429),
  /// UpstreamError(status), ParseError, or InvalidArgument.
  std::vector<CorpusDoc> search_fetch(const std::string& query, int max_docs);

  std::vector<std::string> esearch(const std::string& query, int max_docs);
  std::vector<CorpusDoc> efetch(const std::vector<std::string>& pmids);

 private:
  std::string get(const std::string& path_and_query);

  PubMedConfig cfg_;
  RateLimiter limiter_;
};

/// Parses an efetch PubmedArticleSet document.
std::vector<CorpusDoc> parse_efetch_xml(std::string_view xml);

}  // namespace cer::corpus
