#include <doctest.h>

#include <set>

#include "cer/claim_detection.hpp"
#include "cer/llm.hpp"
#include "test_support.hpp"

using namespace cer;
using namespace cer::detection;
using testing::error_code_of;

namespace {

std::vector<std::string> texts(const std::vector<Sentence>& s) {
  std::vector<std::string> out;
  for (const auto& x : s) out.push_back(x.text);
  return out;
}

std::vector<std::string> texts(const std::vector<Claim>& s) {
  std::vector<std::string> out;
  for (const auto& x : s) out.push_back(x.text);
  return out;
}

DetectionConfig llm_config() {
  DetectionConfig cfg;
  cfg.mode = Mode::ZeroShot;
  return cfg;
}

}  // namespace

TEST_SUITE("claim_detection") {

TEST_CASE("segmentation examples") {
  CHECK(texts(segment("A is true. B is false.")) == std::vector<std::string>{"A is true.", "B is false."});
  CHECK(texts(segment("Dr. Smith said X.")) == std::vector<std::string>{"Dr. Smith said X."});
  CHECK(segment("").empty());
  CHECK(segment("   \n ").empty());
  CHECK(texts(segment("Is it safe? Yes! (It works.) Done")) ==
        std::vector<std::string>{"Is it safe?", "Yes!", "(It works.)", "Done"});
  CHECK(texts(segment("Doses, e.g. 5 mg, were given. Fig. 2 shows it.")) ==
        std::vector<std::string>{"Doses, e.g. 5 mg, were given.", "Fig. 2 shows it."});
}

TEST_CASE("sentence spans address the document text") {
  const std::string doc = "  First claim is here.\n\nSecond one reduces pain!  Third?";
  for (const auto& s : segment(doc, "d1")) {
    CHECK(doc.substr(s.span.start, s.span.end - s.span.start) == s.text);
    CHECK(s.doc_ref == "d1");
  }
}

TEST_CASE("rule-based detection example") {
  const auto doc = ingest::make_text_document("COVID-19 is deadly. Hello there!");
  CHECK(texts(detect_claims(doc, DetectionConfig{})) == std::vector<std::string>{"COVID-19 is deadly."});
  CHECK(detect_claims(ingest::make_text_document(" "), DetectionConfig{}).empty());
  CHECK_FALSE(rule_based_is_claim("Please click here now."));
  CHECK_FALSE(rule_based_is_claim("It is."));
  CHECK(rule_based_is_claim("Vaccines cause autism in children."));
}

TEST_CASE("LLM detection truncates to max_claims in document order") {
  llm::MockBackend backend([](const llm::Request& req) {
    std::string out;
    const auto n = std::count(req.user_prompt.begin(), req.user_prompt.end(), '\n');
    for (int i = 1; i <= n; ++i) out += std::to_string(i) + ": claim\n";
    return out;
  });
  auto cfg = llm_config();
  cfg.max_claims = 2;
  const auto doc = ingest::make_text_document("Aspirin thins blood. Zinc shortens colds. Sugar causes hyperactivity.");
  CHECK(texts(detect_claims(doc, cfg, &backend)) ==
        std::vector<std::string>{"Aspirin thins blood.", "Zinc shortens colds."});
}

TEST_CASE("LLM detection batches at most 20 sentences per call") {
  std::vector<std::size_t> sizes;
  llm::MockBackend backend([&](const llm::Request& req) {
    const auto n = parse_detection_reply(mock_detection_reply(req), 64);
    std::size_t lines = 0;
    bool in_list = false;
    std::istringstream in(req.user_prompt);
    for (std::string line; std::getline(in, line);) {
      if (line == kSentenceListHeader) in_list = true;
      else if (in_list && line.empty()) break;
      else if (in_list) ++lines;
    }
    sizes.push_back(lines);
    (void)n;
    return mock_detection_reply(req);
  });
  std::string text;
  for (int i = 0; i < 45; ++i) text += "Drug " + std::to_string(i) + " reduces pain. ";
  auto cfg = llm_config();
  cfg.max_claims = 100;
  const auto claims = detect_claims(ingest::make_text_document(text), cfg, &backend);
  CHECK(sizes == std::vector<std::size_t>{20, 20, 5});
  CHECK(claims.size() == 45);
}

TEST_CASE("anaphoric follow-ups merge in LLM modes only") {
  llm::MockBackend all_claims([](const llm::Request&) { return "1: CLAIM\n2: CLAIM\n3: CLAIM"; });
  const auto doc = ingest::make_text_document("Vitamin D helps bones. This is well established. Zinc helps colds.");
  const auto merged = detect_claims(doc, llm_config(), &all_claims);
  CHECK(texts(merged) ==
        std::vector<std::string>{"Vitamin D helps bones. This is well established.", "Zinc helps colds."});
  const auto rule = detect_claims(doc, DetectionConfig{});
  CHECK(rule.size() == 3);
}

TEST_CASE("detection reply parsing tolerates formatting") {
  CHECK(parse_detection_reply("1: CLAIM\n2: other\n3. Claim", 3) == std::vector<bool>{true, false, true});
  CHECK(parse_detection_reply("**1**: CLAIM\n- 2) OTHER", 2) == std::vector<bool>{true, false});
  CHECK(parse_detection_reply("CLAIM OTHER CLAIM", 3) == std::vector<bool>{true, false, true});
  CHECK(parse_detection_reply("nothing useful", 2) == std::vector<bool>{false, false});
  CHECK(parse_detection_reply("7: CLAIM", 2) == std::vector<bool>{false, false});
}

TEST_CASE("claims are substrings at their spans with no duplicate spans") {
  const std::string text =
      "Experts met today. Vaccines cause autism. It is false. Vitamin C cures cancer. Click here. "
      "Garlic lowers blood pressure. Garlic lowers blood pressure.";
  const auto doc = ingest::make_web_document("http://example.test/a", text);
  llm::MockBackend mock(mock_detection_reply);
  for (auto cfg : {DetectionConfig{}, llm_config()}) {
    const auto claims = detect_claims(doc, cfg, &mock);
    CHECK(claims.size() >= 3);
    std::set<std::pair<std::size_t, std::size_t>> spans;
    for (const auto& c : claims) {
      REQUIRE(c.span);
      CHECK(doc.raw_text.substr(c.span->start, c.span->end - c.span->start) == c.text);
      CHECK(spans.insert({c.span->start, c.span->end}).second);
      CHECK(c.source == ClaimSource::WebPage);
      CHECK(c.origin_ref == std::optional<std::string>("http://example.test/a"));
      CHECK_NOTHROW(validate(c, std::string_view(doc.raw_text)));
    }
    CHECK(texts(detect_claims(doc, cfg, &mock)) == texts(claims));
  }
}

TEST_CASE("video claims carry the covering segment times") {
  const auto doc = ingest::make_video_document(
      "upload:v", {{0.0, 2.0, "Hello everyone."}, {2.0, 4.5, "Vitamin D supplements reduce infections."},
                   {4.5, 7.0, "Antibiotics cure colds."}});
  const auto claims = detect_claims(doc, DetectionConfig{});
  REQUIRE(claims.size() == 2);
  CHECK(claims[0].timestamp == std::optional<TimeSpan>(TimeSpan{2.0, 4.5}));
  CHECK(claims[1].timestamp == std::optional<TimeSpan>(TimeSpan{4.5, 7.0}));
  CHECK(claims[0].source == ClaimSource::Video);
}

TEST_CASE("config validation") {
  DetectionConfig cfg;
  cfg.max_claims = 0;
  CHECK(error_code_of([&] { validate(cfg); }) == ErrorCode::ConfigError);
  cfg = DetectionConfig{};
  cfg.mode = Mode::FewShot;
  CHECK(error_code_of([&] { validate(cfg); }) == ErrorCode::ConfigError);
  cfg.few_shot_examples = {{"Vaccines cause autism.", true}, {"Good morning.", false}};
  CHECK_NOTHROW(validate(cfg));
  cfg.mode = Mode::ZeroShot;
  CHECK(error_code_of([&] { validate(cfg); }) == ErrorCode::ConfigError);
  CHECK(error_code_of([] { detect_claims(ingest::make_text_document("Aspirin thins blood."), llm_config()); }) ==
        ErrorCode::ConfigError);
}

TEST_CASE("few-shot prompt includes the examples") {
  DetectionConfig cfg;
  cfg.mode = Mode::FewShot;
  cfg.few_shot_examples = {{"Vaccines cause autism.", true}, {"Good morning.", false}};
  const std::vector<Sentence> batch{{"Zinc helps.", {0, 11}, "d"}};
  const auto req = build_detection_request(batch, cfg);
  CHECK(req.user_prompt.find("Vaccines cause autism.") != std::string::npos);
  CHECK(req.user_prompt.find("Good morning.") != std::string::npos);
  CHECK(req.user_prompt.find("1. Zinc helps.") != std::string::npos);
  CHECK(req.model_id == cfg.model_id);
  CHECK(req.temperature == 0.0);
}

}
