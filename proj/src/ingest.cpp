#include "cer/ingest.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <httplib.h>
#include <unistd.h>

#include "cer/util.hpp"

namespace cer::ingest {

void validate_segments(std::span<const TranscriptSegment> segments) {
  double prev_end = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (!(s.start_sec >= 0.0) || !(s.end_sec > s.start_sec))
      throw Error(ErrorCode::InvalidArgument, "segment " + std::to_string(i) + " has an invalid time range");
    if (i > 0 && s.start_sec < prev_end)
      throw Error(ErrorCode::InvalidArgument, "segment " + std::to_string(i) + " overlaps its predecessor");
    prev_end = s.end_sec;
  }
}

namespace {

std::string document_id(std::string_view kind, std::string_view text) {
  return std::string(kind) + ":" + sha256_hex(text).substr(0, 16);
}

}  // namespace

SourceDocument make_text_document(std::string text) {
  SourceDocument doc;
  doc.kind = SourceKind::Text;
  doc.id = document_id("text", text);
  doc.raw_text = std::move(text);
  doc.fetched_at = std::chrono::system_clock::now();
  return doc;
}

SourceDocument make_web_document(std::string uri, std::string text) {
  if (trim(uri).empty()) throw Error(ErrorCode::InvalidArgument, "web page document without a uri");
  SourceDocument doc;
  doc.kind = SourceKind::WebPage;
  doc.id = document_id("web", uri + "\n" + text);
  doc.uri = std::move(uri);
  doc.raw_text = std::move(text);
  doc.fetched_at = std::chrono::system_clock::now();
  return doc;
}

SourceDocument make_video_document(std::optional<std::string> uri, std::vector<TranscriptSegment> segments) {
  validate_segments(segments);
  SourceDocument doc;
  doc.kind = SourceKind::Video;
  doc.uri = std::move(uri);
  for (const auto& s : segments) {
    if (!doc.raw_text.empty()) doc.raw_text.push_back(' ');
    const std::size_t start = doc.raw_text.size();
    doc.raw_text += s.text;
    doc.segment_spans.push_back({start, doc.raw_text.size()});
  }
  doc.segments = std::move(segments);
  doc.id = document_id("video", doc.raw_text);
  doc.fetched_at = std::chrono::system_clock::now();
  return doc;
}

ClaimSource claim_source_for(SourceKind kind) {
  switch (kind) {
    case SourceKind::Text: return ClaimSource::Direct;
    case SourceKind::WebPage: return ClaimSource::WebPage;
    case SourceKind::Video: return ClaimSource::Video;
  }
  return ClaimSource::Direct;
}

std::string fetch_url(const std::string& url, const FetchOptions& opts) {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + opts.timeout;
  std::string current = url;

  for (int hop = 0;; ++hop) {
    const auto parsed = parse_url(current);
    if (!parsed) throw Error(ErrorCode::InvalidArgument, "not an http(s) url: '" + current + "'");
    const auto remaining = std::chrono::duration_cast<std::chrono::microseconds>(deadline - clock::now());
    if (remaining.count() <= 0) throw Error(ErrorCode::FetchTimeout, current);

    httplib::Client cli(parsed->origin());
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(remaining);
    const auto usecs = remaining - secs;
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    cli.set_follow_location(false);

    std::string body;
    bool too_large = false;
    bool timed_out = false;
    auto res = cli.Get(
        parsed->path, httplib::Headers{{"User-Agent", "cer-fetch/1.0"}},
        [&](const httplib::Response&) { return true; },
        [&](const char* data, std::size_t len) {
          if (clock::now() > deadline) {
            timed_out = true;
            return false;
          }
          if (body.size() + len > opts.max_bytes) {
            too_large = true;
            return false;
          }
          body.append(data, len);
          return true;
        });
    if (too_large) throw Error(ErrorCode::TooLarge, current + " exceeds " + std::to_string(opts.max_bytes) + " bytes");
    if (timed_out || clock::now() > deadline) throw Error(ErrorCode::FetchTimeout, current);
    if (!res) {
      // Unreachable hosts surface as FetchTimeout: the caller cannot tell a
      // dead host from a slow one within the deadline.
      throw Error(ErrorCode::FetchTimeout, current + " (" + httplib::to_string(res.error()) + ")");
    }
    const int status = res->status;
    if (status >= 300 && status < 400 && res->has_header("Location")) {
      if (hop >= opts.max_redirects)
        throw Error(ErrorCode::HttpError, "too many redirects from " + url, status);
      current = resolve_location(*parsed, res->get_header_value("Location"));
      continue;
    }
    if (status < 200 || status >= 300) throw Error(ErrorCode::HttpError, current, status);
    return body;
  }
}

std::vector<TranscriptSegment> parse_segments_json(const nlohmann::json& j) {
  std::vector<TranscriptSegment> out;
  try {
    for (const auto& s : j) {
      out.push_back({s.at("start").get<double>(), s.at("end").get<double>(), s.at("text").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidBackendOutput, std::string("bad segments: ") + e.what());
  }
  validate_segments(out);
  return out;
}

nlohmann::json segments_to_json(std::span<const TranscriptSegment> segments) {
  auto arr = nlohmann::json::array();
  for (const auto& s : segments) arr.push_back({{"start", s.start_sec}, {"end", s.end_sec}, {"text", s.text}});
  return arr;
}

MockSpeechToText::MockSpeechToText(std::map<std::string, std::vector<TranscriptSegment>> table)
    : table_(std::move(table)) {
  for (const auto& [_, segs] : table_) validate_segments(segs);
}

MockSpeechToText MockSpeechToText::from_file(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
  std::map<std::string, std::vector<TranscriptSegment>> table;
  for (auto it = j.begin(); it != j.end(); ++it) table[it.key()] = parse_segments_json(it.value());
  return MockSpeechToText(std::move(table));
}

void MockSpeechToText::register_media(std::span<const std::byte> media, std::vector<TranscriptSegment> segments) {
  validate_segments(segments);
  table_[sha256_hex(media)] = std::move(segments);
}

std::vector<TranscriptSegment> MockSpeechToText::transcribe(std::span<const std::byte> media,
                                                            const std::optional<std::string>&) {
  if (media.empty()) return {};
  const auto it = table_.find(sha256_hex(media));
  if (it == table_.end()) throw Error(ErrorCode::MediaDecodeError, "media not registered with mock transcriber");
  return it->second;
}

AudioDecoder::AudioDecoder(std::string command_template) : command_template_(std::move(command_template)) {
  if (command_template_.find("{in}") == std::string::npos || command_template_.find("{out}") == std::string::npos)
    throw Error(ErrorCode::ConfigError, "decoder command needs {in} and {out} placeholders");
}

std::string AudioDecoder::to_pcm16k(std::span<const std::byte> media) const {
  namespace fs = std::filesystem;
  char dir_template[] = "/tmp/cer-decode-XXXXXX";
  if (!mkdtemp(dir_template)) throw Error(ErrorCode::IoError, "mkdtemp failed");
  const fs::path dir(dir_template);
  const fs::path in = dir / "media.bin";
  const fs::path out = dir / "audio.pcm";
  {
    std::ofstream f(in, std::ios::binary);
    f.write(reinterpret_cast<const char*>(media.data()), static_cast<std::streamsize>(media.size()));
  }
  std::string cmd = command_template_;
  auto replace = [&](std::string_view key, const std::string& value) {
    for (auto pos = cmd.find(key); pos != std::string::npos; pos = cmd.find(key, pos + value.size()))
      cmd.replace(pos, key.size(), "'" + value + "'");
  };
  replace("{in}", in.string());
  replace("{out}", out.string());
  const int rc = std::system(cmd.c_str());
  std::string pcm;
  if (rc == 0 && fs::exists(out)) pcm = read_file(out.string());
  std::error_code ec;
  fs::remove_all(dir, ec);
  if (rc != 0) throw Error(ErrorCode::MediaDecodeError, "decoder exited with status " + std::to_string(rc));
  return pcm;
}

HttpSpeechToText::HttpSpeechToText(HttpEndpoint endpoint, std::optional<AudioDecoder> decoder)
    : endpoint_(std::move(endpoint)), decoder_(std::move(decoder)) {}

std::vector<TranscriptSegment> HttpSpeechToText::transcribe(std::span<const std::byte> media,
                                                            const std::optional<std::string>& lang_hint) {
  if (media.empty()) return {};
  std::string audio = decoder_ ? decoder_->to_pcm16k(media)
                               : std::string(reinterpret_cast<const char*>(media.data()), media.size());
  if (audio.empty()) return {};
  const nlohmann::json req{{"audio", base64_encode(audio)},
                           {"lang_hint", lang_hint.value_or(std::string(kDefaultLangHint))}};
  const auto res = post_json(endpoint_, req);
  if (!res.contains("segments")) throw Error(ErrorCode::InvalidBackendOutput, "transcriber reply lacks segments");
  return parse_segments_json(res["segments"]);
}

}  // namespace cer::ingest
