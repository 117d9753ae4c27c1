#pragma once

// Input modalities: plain text, web pages, and video transcripts.

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cer/core.hpp"
#include "cer/http_json.hpp"

namespace cer::ingest {

struct TranscriptSegment {
  double start_sec = 0.0;
  double end_sec = 0.0;
  std::string text;

  bool operator==(const TranscriptSegment&) const = default;
};

/// Throws InvalidArgument unless segments are well formed, sorted and non-overlapping.
void validate_segments(std::span<const TranscriptSegment> segments);

enum class SourceKind { Text, WebPage, Video };

struct SourceDocument {
  std::string id;
  SourceKind kind = SourceKind::Text;
  std::optional<std::string> uri;
  std::string raw_text;
  std::vector<TranscriptSegment> segments;
  // Byte offset of each segment's text inside raw_text (parallel to segments).
  std::vector<CharSpan> segment_spans;
  std::chrono::system_clock::time_point fetched_at{};
};

SourceDocument make_text_document(std::string text);
SourceDocument make_web_document(std::string uri, std::string text);
/// raw_text is the segment texts joined by single spaces.
SourceDocument make_video_document(std::optional<std::string> uri, std::vector<TranscriptSegment> segments);

ClaimSource claim_source_for(SourceKind kind);

/// Visible text of an HTML document in document order.
///
/// Content of script, style, noscript, template, head, nav, header and footer
/// elements and of comments is dropped. Block-level element boundaries become
/// '\n'; whitespace runs inside a line collapse to one space; blank lines are
/// removed. Malformed markup never aborts extraction.
/// Throws EmptyDocument when nothing visible remains.
std::string extract_web_text(std::string_view html);

struct FetchOptions {
  std::chrono::milliseconds timeout{15000};
  std::size_t max_bytes = 5 * 1024 * 1024;
  int max_redirects = 5;
};

/// GET with redirect following. The timeout bounds the whole call including
/// redirects. Throws FetchTimeout, TooLarge, HttpError(status) or InvalidArgument.
std::string fetch_url(const std::string& url, const FetchOptions& opts = {});

/// Speech-to-text backend. Media is the original upload; backends that need
/// PCM run it through an AudioDecoder first.
class SpeechToText {
 public:
  virtual ~SpeechToText() = default;
  virtual std::vector<TranscriptSegment> transcribe(std::span<const std::byte> media,
                                                    const std::optional<std::string>& lang_hint) = 0;
};

inline constexpr std::string_view kDefaultLangHint = "en";

/// Deterministic backend: a fixture table from SHA-256(media) to segments.
/// Empty media transcribes to no segments; unregistered media is a MediaDecodeError.
class MockSpeechToText final : public SpeechToText {
 public:
  MockSpeechToText() = default;
  explicit MockSpeechToText(std::map<std::string, std::vector<TranscriptSegment>> table);

  /// Fixture file: JSON object {"<sha256>": [{"start","end","text"}, ...], ...}.
  static MockSpeechToText from_file(const std::string& path);

  void register_media(std::span<const std::byte> media, std::vector<TranscriptSegment> segments);
  std::vector<TranscriptSegment> transcribe(std::span<const std::byte> media,
                                            const std::optional<std::string>& lang_hint) override;

 private:
  std::map<std::string, std::vector<TranscriptSegment>> table_;
};

/// Converts a media container to mono 16 kHz signed 16-bit little-endian PCM by
/// running an external command. The command template must contain {in} and
/// {out} placeholders, e.g. "ffmpeg -loglevel error -y -i {in} -ac 1 -ar 16000 -f s16le {out}".
class AudioDecoder {
 public:
  explicit AudioDecoder(std::string command_template);
  std::string to_pcm16k(std::span<const std::byte> media) const;

 private:
  std::string command_template_;
};

/// HTTP adapter: POST {"audio": base64 PCM, "lang_hint"} -> {"segments": [{"start","end","text"}]}.
class HttpSpeechToText final : public SpeechToText {
 public:
  HttpSpeechToText(HttpEndpoint endpoint, std::optional<AudioDecoder> decoder);
  std::vector<TranscriptSegment> transcribe(std::span<const std::byte> media,
                                            const std::optional<std::string>& lang_hint) override;

 private:
  HttpEndpoint endpoint_;
  std::optional<AudioDecoder> decoder_;
};

std::vector<TranscriptSegment> parse_segments_json(const nlohmann::json& j);
nlohmann::json segments_to_json(std::span<const TranscriptSegment> segments);

}  // namespace cer::ingest
