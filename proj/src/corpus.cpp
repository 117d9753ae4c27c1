#include "cer/corpus.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "cer/data_files.hpp"
#include "cer/util.hpp"
#include "xml.hpp"

namespace cer::corpus {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = [] {
    std::unordered_set<std::string> out;
    std::istringstream in{std::string(data::stopwords_en())};
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      if (!line.empty() && line[0] != '#') out.insert(line);
    }
    return out;
  }();
  return words;
}

Preprocessed preprocess(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw Error(ErrorCode::ConfigError, "ICU NFKC normalizer unavailable");
  icu::UnicodeString normalized =
      nfkc->normalize(icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size()))),
                      status);
  if (U_FAILURE(status)) throw Error(ErrorCode::InvalidArgument, "NFKC normalization failed");
  normalized.toLower(icu::Locale::getRoot());

  Preprocessed out;
  const auto& stop = stopwords();
  icu::UnicodeString current;
  auto flush = [&] {
    if (current.isEmpty()) return;
    std::string token;
    current.toUTF8String(token);
    current.remove();
    if (token.size() < 2 || stop.contains(token)) return;
    out.tokens.push_back(std::move(token));
  };
  for (int32_t i = 0; i < normalized.length();) {
    const UChar32 cp = normalized.char32At(i);
    if (u_isalnum(cp)) {
      current.append(cp);
    } else {
      flush();
    }
    i += U16_LENGTH(cp);
  }
  flush();
  for (const auto& t : out.tokens) {
    if (!out.norm_text.empty()) out.norm_text.push_back(' ');
    out.norm_text += t;
  }
  return out;
}

ProcessedDoc process(const CorpusDoc& doc) {
  auto p = preprocess(doc.title + " " + doc.abstract);
  return {doc.doc_id, std::move(p.tokens), std::move(p.norm_text)};
}

Corpus::Corpus(std::vector<CorpusDoc> docs) : docs_(std::move(docs)) {
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    const auto& d = docs_[i];
    if (d.doc_id.empty()) throw Error(ErrorCode::InvalidArgument, "empty doc_id");
    if (trim(d.abstract).empty()) throw Error(ErrorCode::InvalidArgument, "empty abstract for " + d.doc_id);
    if (!by_id_.emplace(d.doc_id, i).second) throw Error(ErrorCode::DuplicateDocId, d.doc_id);
  }
}

const CorpusDoc* Corpus::find(std::string_view doc_id) const {
  const auto it = by_id_.find(std::string(doc_id));
  return it == by_id_.end() ? nullptr : &docs_[it->second];
}

std::string Corpus::content_hash() const { return sha256_hex(serialize(*this)); }

std::string to_jsonl_line(const CorpusDoc& doc) {
  nlohmann::ordered_json j;
  j["doc_id"] = doc.doc_id;
  j["title"] = doc.title;
  j["abstract"] = doc.abstract;
  j["fetched_at"] = format_utc(doc.fetched_at);
  try {
    return j.dump();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, doc.doc_id + ": " + e.what());
  }
}

std::string serialize(const Corpus& corpus) {
  std::string out;
  for (const auto& d : corpus.docs()) {
    out += to_jsonl_line(d);
    out.push_back('\n');
  }
  return out;
}

Corpus parse_jsonl(std::string_view contents, std::string_view origin) {
  if (contents.starts_with("\xEF\xBB\xBF")) throw Error(ErrorCode::FormatError, std::string(origin) + ": BOM not allowed");
  std::vector<CorpusDoc> docs;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    const auto nl = contents.find('\n', pos);
    const std::string_view line = contents.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? contents.size() : nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CorpusDoc d;
      d.doc_id = j.at("doc_id").get<std::string>();
      d.title = j.at("title").get<std::string>();
      d.abstract = j.at("abstract").get<std::string>();
      d.fetched_at = parse_utc(j.at("fetched_at").get<std::string>());
      docs.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::FormatError, std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Corpus(std::move(docs));
}

Corpus corpus_load(const std::string& path) { return parse_jsonl(read_file(path), path); }

void corpus_save(const Corpus& corpus, const std::string& path) { write_file_atomic(path, serialize(corpus)); }

RateLimiter::RateLimiter(double requests_per_second)
    : interval_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(1.0 / (requests_per_second > 0 ? requests_per_second : 1.0)))) {}

void RateLimiter::acquire() {
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mu_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

namespace {

std::optional<std::string> env(const char* name) {
  if (const char* v = std::getenv(name); v && *v) return std::string(v);
  return std::nullopt;
}

}  // namespace

PubMedClient::PubMedClient(PubMedConfig cfg) : cfg_(std::move(cfg)), limiter_(cfg_.requests_per_second) {
  if (!cfg_.api_key) cfg_.api_key = env("CER_PUBMED_API_KEY");
  while (!cfg_.base_url.empty() && cfg_.base_url.back() == '/') cfg_.base_url.pop_back();
  if (!parse_url(cfg_.base_url)) throw Error(ErrorCode::ConfigError, "bad E-utilities base url " + cfg_.base_url);
}

std::string PubMedClient::get(const std::string& path_and_query) {
  const auto base = *parse_url(cfg_.base_url);
  std::string target = base.path == "/" ? path_and_query : base.path + path_and_query;
  if (cfg_.api_key) target += "&api_key=" + url_encode(*cfg_.api_key);

  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
  auto delay = cfg_.backoff;
  int last_status = 0;
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    limiter_.acquire();
    httplib::Client cli(base.origin());
    cli.set_connection_timeout(secs.count(), 0);
    cli.set_read_timeout(secs.count(), 0);
    auto res = cli.Get(target);
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429) throw Error(ErrorCode::RateLimited, "E-utilities returned 429", 429);
    if (res->status >= 500) {
      last_status = res->status;
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300)
      throw Error(ErrorCode::UpstreamError, "E-utilities returned " + std::to_string(res->status), res->status);
    return res->body;
  }
  throw Error(ErrorCode::UpstreamError, "E-utilities: " + last_error, last_status);
}

std::vector<std::string> PubMedClient::esearch(const std::string& query, int max_docs) {
  if (trim(query).empty()) throw Error(ErrorCode::InvalidArgument, "empty PubMed query");
  if (max_docs < 1) throw Error(ErrorCode::InvalidArgument, "max_docs must be positive");
  const std::string body = get("/esearch.fcgi?db=pubmed&retmode=json&retmax=" + std::to_string(max_docs) +
                               "&term=" + url_encode(query));
  try {
    const auto j = nlohmann::json::parse(body);
    auto ids = j.at("esearchresult").at("idlist").get<std::vector<std::string>>();
    if (ids.size() > static_cast<std::size_t>(max_docs)) ids.resize(static_cast<std::size_t>(max_docs));
    return ids;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("esearch reply: ") + e.what());
  }
}

std::vector<CorpusDoc> PubMedClient::efetch(const std::vector<std::string>& pmids) {
  if (pmids.empty()) return {};
  std::string ids;
  for (const auto& id : pmids) {
    if (!ids.empty()) ids += ",";
    ids += url_encode(id);
  }
  return parse_efetch_xml(get("/efetch.fcgi?db=pubmed&rettype=abstract&retmode=xml&id=" + ids));
}

std::vector<CorpusDoc> PubMedClient::search_fetch(const std::string& query, int max_docs) {
  auto docs = efetch(esearch(query, max_docs));
  if (docs.size() > static_cast<std::size_t>(max_docs)) docs.resize(static_cast<std::size_t>(max_docs));
  return docs;
}

std::vector<CorpusDoc> parse_efetch_xml(std::string_view xml_text) {
  const auto root = xml::parse(xml_text);
  if (root.name != "PubmedArticleSet") throw Error(ErrorCode::ParseError, "efetch root is <" + root.name + ">");
  // Second precision, matching the on-disk timestamp format.
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  std::vector<CorpusDoc> out;
  for (const auto* article : root.children_named("PubmedArticle")) {
    const auto* citation = article->child("MedlineCitation");
    if (!citation) throw Error(ErrorCode::ParseError, "PubmedArticle without MedlineCitation");
    const auto* pmid = citation->child("PMID");
    const auto* art = citation->child("Article");
    if (!pmid || !art) throw Error(ErrorCode::ParseError, "MedlineCitation without PMID/Article");
    const auto* abstract = art->child("Abstract");
    if (!abstract) continue;
    std::string text;
    for (const auto* part : abstract->children_named("AbstractText")) {
      std::string piece = trim(part->text_content());
      if (piece.empty()) continue;
      if (const auto label = part->attr("Label"); !label.empty()) piece = label + ": " + piece;
      if (!text.empty()) text.push_back(' ');
      text += piece;
    }
    if (text.empty()) continue;
    CorpusDoc d;
    d.doc_id = trim(pmid->text_content());
    if (const auto* title = art->child("ArticleTitle")) d.title = trim(title->text_content());
    d.abstract = std::move(text);
    d.fetched_at = now;
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace cer::corpus
