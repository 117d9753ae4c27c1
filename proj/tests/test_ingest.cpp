#include <doctest.h>

#include <chrono>
#include <random>

#include "cer/ingest.hpp"
#include "cer/util.hpp"
#include "test_support.hpp"

using namespace cer;
using namespace cer::ingest;
using testing::error_code_of;

namespace {

std::span<const std::byte> bytes_of(const std::string& s) { return std::as_bytes(std::span(s.data(), s.size())); }

std::string random_html(std::mt19937_64& rng) {
  static const char* words[] = {"aspirin", "reduces", "fever", "in", "adults", "Vitamin", "D", "helps",
                                "bones", "COVID-19", "is", "deadly", "α-synuclein", "5%", "(n=12)", "dose."};
  static const char* blocks[] = {"p", "div", "li", "h2", "section", "td"};
  static const char* inline_tags[] = {"b", "i", "span", "a", "em"};
  static const char* skipped[] = {"script", "style", "nav", "footer"};
  std::string html = "<html><body>";
  const int n = 1 + static_cast<int>(rng() % 12);
  for (int i = 0; i < n; ++i) {
    const auto roll = rng() % 10;
    if (roll == 0) {
      const char* t = skipped[rng() % 4];
      html += std::string("<") + t + ">hidden payload</" + t + ">";
      continue;
    }
    if (roll == 1) {
      html += "<!-- note -->";
      continue;
    }
    const char* b = blocks[rng() % 6];
    html += std::string("<") + b + ">";
    const int w = static_cast<int>(rng() % 6);
    for (int k = 0; k < w; ++k) {
      if (rng() % 4 == 0) {
        const char* t = inline_tags[rng() % 5];
        html += std::string("<") + t + ">" + words[rng() % 16] + "</" + t + ">";
      } else {
        html += words[rng() % 16];
      }
      html += (rng() % 3 == 0) ? "  \t" : " ";
      if (rng() % 7 == 0) html += "&nbsp;";
    }
    if (rng() % 5) html += std::string("</") + b + ">";
  }
  html += "</body></html>";
  return html;
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("extract_web_text examples") {
  CHECK(extract_web_text("<p>Vitamin D helps.</p><script>x()</script>") == "Vitamin D helps.");
  CHECK(extract_web_text("<div>A</div><div>B</div>") == "A\nB");
  CHECK(extract_web_text("<p>a   b\t\tc</p>") == "a b c");
  CHECK(error_code_of([] { extract_web_text("<script>only()</script><!-- x -->"); }) == ErrorCode::EmptyDocument);
  CHECK(error_code_of([] { extract_web_text(""); }) == ErrorCode::EmptyDocument);
}

TEST_CASE("news article keeps every paragraph and drops boilerplate") {
  const auto text = extract_web_text(read_file(testing::fixture("news_article.html")));
  for (const char* sentence :
       {"Vitamin D supplements reduce the risk of respiratory infections, according to a new pooled analysis.",
        "The effect was largest in people with low baseline levels & was modest overall.",
        "Experts say the MMR vaccine does not cause autism, a claim that still circulates online.",
        "Cold weather does not by itself cause the common cold.", "Vitamin D and winter colds",
        "Risk by baseline level"})
    CHECK_MESSAGE(text.find(sentence) != std::string::npos, sentence);
  for (const char* marker : {"STYLE-PAYLOAD-MARKER", "SCRIPT-PAYLOAD-MARKER", "COMMENT-PAYLOAD-MARKER",
                             "NOSCRIPT-PAYLOAD-MARKER", "FOOTER-PAYLOAD-MARKER", "Subscribe", "Opinion",
                             "not visible", "font-family"})
    CHECK_MESSAGE(text.find(marker) == std::string::npos, marker);
  CHECK(text.find("  ") == std::string::npos);
}

TEST_CASE("extract_web_text is idempotent on generated pages") {
  std::mt19937_64 rng(1234);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const auto html = random_html(rng);
    std::string once;
    try {
      once = extract_web_text(html);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyDocument);
      continue;
    }
    ++checked;
    CHECK_MESSAGE(extract_web_text(once) == once, html);
  }
  CHECK(checked > 300);
}

TEST_CASE("mock speech-to-text") {
  MockSpeechToText stt;
  const std::string media = "media-H";
  stt.register_media(bytes_of(media), {{0.0, 2.0, "COVID-19 is deadly."}});
  const auto segs = stt.transcribe(bytes_of(media), std::nullopt);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0] == TranscriptSegment{0.0, 2.0, "COVID-19 is deadly."});

  CHECK(stt.transcribe({}, std::nullopt).empty());
  CHECK(error_code_of([&] { stt.transcribe(bytes_of(std::string("unknown")), std::nullopt); }) ==
        ErrorCode::MediaDecodeError);

  const auto table = MockSpeechToText::from_file(testing::fixture("stt_fixture.json"));
  auto fixture_stt = table;
  const auto clip = read_file(testing::fixture("video_two_claims.bin"));
  const auto two = fixture_stt.transcribe(bytes_of(clip), std::string("en"));
  REQUIRE(two.size() >= 2);
  for (std::size_t i = 1; i < two.size(); ++i) CHECK(two[i - 1].end_sec <= two[i].start_sec);

  CHECK(error_code_of([&] { stt.register_media(bytes_of(std::string("x")), {{1.0, 1.0, "bad"}}); }) ==
        ErrorCode::InvalidArgument);
  CHECK(error_code_of([&] {
          stt.register_media(bytes_of(std::string("y")), {{0.0, 2.0, "a"}, {1.5, 3.0, "b"}});
        }) == ErrorCode::InvalidArgument);
}

TEST_CASE("video documents satisfy the concatenation invariant") {
  const std::vector<TranscriptSegment> segs{{0.0, 1.5, "Vitamin D helps."}, {1.5, 3.0, "It is cheap."}};
  const auto doc = make_video_document("upload:x", segs);
  CHECK(doc.kind == SourceKind::Video);
  CHECK(doc.raw_text == "Vitamin D helps. It is cheap.");
  REQUIRE(doc.segment_spans.size() == 2);
  for (std::size_t i = 0; i < segs.size(); ++i)
    CHECK(doc.raw_text.substr(doc.segment_spans[i].start, doc.segment_spans[i].end - doc.segment_spans[i].start) ==
          segs[i].text);
  CHECK(error_code_of([] { make_web_document("", "text"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("fetch_url against a local server") {
  testing::LocalServer srv;
  srv.server().Get("/page", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("<p>x</p>", "text/html");
  });
  srv.server().Get(R"(/r/(\d+))", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = std::stoi(req.matches[1]);
    if (n == 0) {
      res.set_content("<p>final</p>", "text/html");
    } else {
      res.status = 301;
      res.set_header("Location", "/r/" + std::to_string(n - 1));
    }
  });
  srv.server().Get("/slow", [](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content("late", "text/plain");
  });
  srv.server().Get("/big", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(std::string(4096, 'a'), "text/plain");
  });
  srv.server().Get("/missing", [](const httplib::Request&, httplib::Response& res) { res.status = 404; });
  srv.start();

  CHECK(fetch_url(srv.url("/page")) == "<p>x</p>");
  CHECK(fetch_url(srv.url("/r/2")) == "<p>final</p>");
  CHECK(fetch_url(srv.url("/r/5")) == "<p>final</p>");
  CHECK(error_code_of([&] { fetch_url(srv.url("/r/6")); }) == ErrorCode::HttpError);
  CHECK(error_code_of([&] { fetch_url(srv.url("/missing")); }) == ErrorCode::HttpError);

  FetchOptions small;
  small.max_bytes = 1024;
  CHECK(error_code_of([&] { fetch_url(srv.url("/big"), small); }) == ErrorCode::TooLarge);

  FetchOptions quick;
  quick.timeout = std::chrono::milliseconds(300);
  const auto t0 = std::chrono::steady_clock::now();
  CHECK(error_code_of([&] { fetch_url(srv.url("/slow"), quick); }) == ErrorCode::FetchTimeout);
  const auto waited = std::chrono::steady_clock::now() - t0;
  CHECK(waited < std::chrono::milliseconds(1200));

  CHECK(error_code_of([&] { fetch_url("http://127.0.0.1:" + std::to_string(testing::closed_port()) + "/"); }) ==
        ErrorCode::FetchTimeout);
  CHECK(error_code_of([] { fetch_url("ftp://example.org/"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("http speech-to-text adapter") {
  testing::LocalServer srv;
  std::string seen_lang, seen_audio;
  srv.server().Post("/stt", [&](const httplib::Request& req, httplib::Response& res) {
    const auto j = nlohmann::json::parse(req.body);
    seen_lang = j.at("lang_hint").get<std::string>();
    seen_audio = base64_decode(j.at("audio").get<std::string>());
    res.set_content(R"({"segments":[{"start":0.0,"end":1.0,"text":"Zinc shortens colds."}]})", "application/json");
  });
  srv.start();
  HttpSpeechToText stt({srv.url("/stt"), std::chrono::milliseconds(2000), 0, std::chrono::milliseconds(10)},
                       std::nullopt);
  const std::string media = "pcm-bytes";
  const auto segs = stt.transcribe(bytes_of(media), std::nullopt);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].text == "Zinc shortens colds.");
  CHECK(seen_lang == "en");
  CHECK(seen_audio == media);
}

}
