#pragma once

// Shared domain types for the fact-checking engine.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace cer {

enum class ErrorCode {
  InvalidArgument,
  UnknownLabel,
  EmptyDocument,
  MediaDecodeError,
  BackendUnavailable,
  InvalidBackendOutput,
  FetchTimeout,
  TooLarge,
  HttpError,
  RateLimited,
  UpstreamError,
  ParseError,
  IoError,
  DuplicateDocId,
  DimensionMismatch,
  EmptyIndex,
  UnparseableResponse,
  LabelSpaceMismatch,
  FormatError,
  LengthMismatch,
  InvalidForLabelSpace,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, int status = 0)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), status_(status) {}

  ErrorCode code() const noexcept { return code_; }
  // HTTP status for HttpError / UpstreamError, 0 otherwise.
  int status() const noexcept { return status_; }

 private:
  ErrorCode code_;
  int status_;
};

enum class VerdictLabel { True, False, Nei };

inline constexpr VerdictLabel kAllLabels[] = {VerdictLabel::True, VerdictLabel::False, VerdictLabel::Nei};

std::string_view to_string(VerdictLabel label);

/// Maps a label string from any supported vocabulary onto VerdictLabel.
///
/// Accepted (case-insensitive, surrounding whitespace ignored):
///   true, supports, support, supported, yes          -> True
///   false, refutes, refuted, contradict, contradicts,
///   contradicted, confute, confutes, no             -> False
///   nei, not enough info, not enough information,
///   not_enough_info, notenoughinfo                   -> Nei
/// Anything else throws Error{UnknownLabel}.
VerdictLabel parse_label(std::string_view s);

enum class ClaimSource { Direct, WebPage, Video };
std::string_view to_string(ClaimSource s);
ClaimSource parse_claim_source(std::string_view s);

struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const CharSpan&) const = default;
};

struct TimeSpan {
  double start_sec = 0.0;
  double end_sec = 0.0;
  bool operator==(const TimeSpan&) const = default;
};

struct Claim {
  std::string id;
  std::string text;
  ClaimSource source = ClaimSource::Direct;
  std::optional<std::string> origin_ref;
  std::optional<CharSpan> span;
  std::optional<TimeSpan> timestamp;

  bool operator==(const Claim&) const = default;
};

/// Checks the Claim invariants; throws Error{InvalidArgument}.
/// `source_text`, when given, is used to validate the span.
void validate(const Claim& claim, std::optional<std::string_view> source_text = std::nullopt);

enum class RetrieverKind { Dense, Sparse };
std::string_view to_string(RetrieverKind r);
RetrieverKind parse_retriever(std::string_view s);

struct EvidencePassage {
  std::string doc_id;
  std::string title;
  std::string text;
  double score = 0.0;
  RetrieverKind retriever = RetrieverKind::Dense;

  bool operator==(const EvidencePassage&) const = default;
};

struct Justification {
  std::string text;
  // Advisory only. Nothing downstream of reasoning reads this.
  std::optional<bool> preliminary_judgment;
  std::string model_id;
  std::string raw_response;

  bool operator==(const Justification&) const = default;
};

inline constexpr std::size_t kMaxEvidence = 3;

struct ClaimAssessment {
  Claim claim;
  VerdictLabel label = VerdictLabel::Nei;
  double confidence = 0.0;
  std::vector<EvidencePassage> evidence;
  Justification justification;
  std::string config_fingerprint;
  bool degraded = false;

  bool operator==(const ClaimAssessment&) const = default;
};

void validate(const ClaimAssessment& a);

// JSON (flat objects, field names as in the data model).
void to_json(nlohmann::json& j, const CharSpan& s);
void from_json(const nlohmann::json& j, CharSpan& s);
void to_json(nlohmann::json& j, const TimeSpan& s);
void from_json(const nlohmann::json& j, TimeSpan& s);
void to_json(nlohmann::json& j, const Claim& c);
void from_json(const nlohmann::json& j, Claim& c);
void to_json(nlohmann::json& j, const EvidencePassage& e);
void from_json(const nlohmann::json& j, EvidencePassage& e);
void to_json(nlohmann::json& j, const Justification& x);
void from_json(const nlohmann::json& j, Justification& x);
void to_json(nlohmann::json& j, const ClaimAssessment& a);
void from_json(const nlohmann::json& j, ClaimAssessment& a);

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

}  // namespace cer
