#include "cer/core.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

namespace cer {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::MediaDecodeError: return "MediaDecodeError";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::InvalidBackendOutput: return "InvalidBackendOutput";
    case ErrorCode::FetchTimeout: return "FetchTimeout";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::HttpError: return "HttpError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::UpstreamError: return "UpstreamError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DuplicateDocId: return "DuplicateDocId";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::UnparseableResponse: return "UnparseableResponse";
    case ErrorCode::LabelSpaceMismatch: return "LabelSpaceMismatch";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidForLabelSpace: return "InvalidForLabelSpace";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view to_string(VerdictLabel label) {
  switch (label) {
    case VerdictLabel::True: return "true";
    case VerdictLabel::False: return "false";
    case VerdictLabel::Nei: return "nei";
  }
  return "nei";
}

namespace {

struct LabelAlias {
  std::string_view name;
  VerdictLabel label;
};

// Dataset vocabularies normalized at load time: SciFact (support / contradict / NEI),
// HealthFC (supported / refuted / not enough information), BioASQ (yes / no).
constexpr std::array<LabelAlias, 19> kLabelAliases{{
    {"true", VerdictLabel::True},
    {"supports", VerdictLabel::True},
    {"support", VerdictLabel::True},
    {"supported", VerdictLabel::True},
    {"yes", VerdictLabel::True},
    {"false", VerdictLabel::False},
    {"refutes", VerdictLabel::False},
    {"refuted", VerdictLabel::False},
    {"contradict", VerdictLabel::False},
    {"contradicts", VerdictLabel::False},
    {"contradicted", VerdictLabel::False},
    {"confute", VerdictLabel::False},
    {"confutes", VerdictLabel::False},
    {"no", VerdictLabel::False},
    {"nei", VerdictLabel::Nei},
    {"not enough info", VerdictLabel::Nei},
    {"not enough information", VerdictLabel::Nei},
    {"not_enough_info", VerdictLabel::Nei},
    {"notenoughinfo", VerdictLabel::Nei},
}};

}  // namespace

VerdictLabel parse_label(std::string_view s) {
  const std::string key = to_lower_ascii(trim(s));
  for (const auto& alias : kLabelAliases) {
    if (alias.name == key) return alias.label;
  }
  throw Error(ErrorCode::UnknownLabel, "'" + std::string(s) + "'");
}

std::string_view to_string(ClaimSource s) {
  switch (s) {
    case ClaimSource::Direct: return "direct";
    case ClaimSource::WebPage: return "web_page";
    case ClaimSource::Video: return "video";
  }
  return "direct";
}

ClaimSource parse_claim_source(std::string_view s) {
  if (s == "direct") return ClaimSource::Direct;
  if (s == "web_page") return ClaimSource::WebPage;
  if (s == "video") return ClaimSource::Video;
  throw Error(ErrorCode::FormatError, "unknown claim source '" + std::string(s) + "'");
}

std::string_view to_string(RetrieverKind r) {
  return r == RetrieverKind::Dense ? "dense" : "sparse";
}

RetrieverKind parse_retriever(std::string_view s) {
  if (s == "dense") return RetrieverKind::Dense;
  if (s == "sparse") return RetrieverKind::Sparse;
  throw Error(ErrorCode::FormatError, "unknown retriever '" + std::string(s) + "'");
}

void validate(const Claim& claim, std::optional<std::string_view> source_text) {
  if (trim(claim.text).empty()) throw Error(ErrorCode::InvalidArgument, "claim text is empty");
  if (claim.span) {
    if (claim.span->start > claim.span->end) throw Error(ErrorCode::InvalidArgument, "claim span is inverted");
    if (source_text) {
      if (claim.span->end > source_text->size())
        throw Error(ErrorCode::InvalidArgument, "claim span exceeds source text");
      if (source_text->substr(claim.span->start, claim.span->end - claim.span->start) != claim.text)
        throw Error(ErrorCode::InvalidArgument, "claim span does not address claim text");
    }
  }
  if (claim.timestamp && claim.source != ClaimSource::Video)
    throw Error(ErrorCode::InvalidArgument, "timestamp only allowed on video claims");
}

void validate(const ClaimAssessment& a) {
  validate(a.claim);
  if (!(a.confidence >= 0.0 && a.confidence <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "confidence outside [0,1]");
  if (a.evidence.size() > kMaxEvidence) throw Error(ErrorCode::InvalidArgument, "more than 3 evidence passages");
  for (const auto& e : a.evidence) {
    if (!std::isfinite(e.score)) throw Error(ErrorCode::InvalidArgument, "non-finite evidence score");
  }
}

void to_json(nlohmann::json& j, const CharSpan& s) { j = nlohmann::json::array({s.start, s.end}); }
void from_json(const nlohmann::json& j, CharSpan& s) {
  s.start = j.at(0).get<std::size_t>();
  s.end = j.at(1).get<std::size_t>();
}
void to_json(nlohmann::json& j, const TimeSpan& s) { j = nlohmann::json::array({s.start_sec, s.end_sec}); }
void from_json(const nlohmann::json& j, TimeSpan& s) {
  s.start_sec = j.at(0).get<double>();
  s.end_sec = j.at(1).get<double>();
}

void to_json(nlohmann::json& j, const Claim& c) {
  j = nlohmann::json{{"id", c.id}, {"text", c.text}, {"source", to_string(c.source)}};
  j["origin_ref"] = c.origin_ref ? nlohmann::json(*c.origin_ref) : nlohmann::json(nullptr);
  j["span"] = c.span ? nlohmann::json(*c.span) : nlohmann::json(nullptr);
  j["timestamp"] = c.timestamp ? nlohmann::json(*c.timestamp) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, Claim& c) {
  c.id = j.at("id").get<std::string>();
  c.text = j.at("text").get<std::string>();
  c.source = parse_claim_source(j.at("source").get<std::string>());
  c.origin_ref.reset();
  c.span.reset();
  c.timestamp.reset();
  if (j.contains("origin_ref") && !j["origin_ref"].is_null()) c.origin_ref = j["origin_ref"].get<std::string>();
  if (j.contains("span") && !j["span"].is_null()) c.span = j["span"].get<CharSpan>();
  if (j.contains("timestamp") && !j["timestamp"].is_null()) c.timestamp = j["timestamp"].get<TimeSpan>();
}

void to_json(nlohmann::json& j, const EvidencePassage& e) {
  j = nlohmann::json{{"doc_id", e.doc_id},
                     {"title", e.title},
                     {"text", e.text},
                     {"score", e.score},
                     {"retriever", to_string(e.retriever)}};
}

void from_json(const nlohmann::json& j, EvidencePassage& e) {
  e.doc_id = j.at("doc_id").get<std::string>();
  e.title = j.at("title").get<std::string>();
  e.text = j.at("text").get<std::string>();
  e.score = j.at("score").get<double>();
  e.retriever = parse_retriever(j.at("retriever").get<std::string>());
}

void to_json(nlohmann::json& j, const Justification& x) {
  j = nlohmann::json{{"text", x.text}, {"model_id", x.model_id}, {"raw_response", x.raw_response}};
  if (x.preliminary_judgment)
    j["preliminary_judgment"] = *x.preliminary_judgment ? "true" : "false";
  else
    j["preliminary_judgment"] = nullptr;
}

void from_json(const nlohmann::json& j, Justification& x) {
  x.text = j.at("text").get<std::string>();
  x.model_id = j.at("model_id").get<std::string>();
  x.raw_response = j.at("raw_response").get<std::string>();
  x.preliminary_judgment.reset();
  if (j.contains("preliminary_judgment") && !j["preliminary_judgment"].is_null())
    x.preliminary_judgment = j["preliminary_judgment"].get<std::string>() == "true";
}

void to_json(nlohmann::json& j, const ClaimAssessment& a) {
  j = nlohmann::json{{"claim", a.claim},
                     {"label", to_string(a.label)},
                     {"confidence", a.confidence},
                     {"evidence", a.evidence},
                     {"justification", a.justification},
                     {"config_fingerprint", a.config_fingerprint},
                     {"degraded", a.degraded}};
}

void from_json(const nlohmann::json& j, ClaimAssessment& a) {
  a.claim = j.at("claim").get<Claim>();
  a.label = parse_label(j.at("label").get<std::string>());
  a.confidence = j.at("confidence").get<double>();
  a.evidence = j.at("evidence").get<std::vector<EvidencePassage>>();
  a.justification = j.at("justification").get<Justification>();
  a.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  a.degraded = j.value("degraded", false);
}

}  // namespace cer
