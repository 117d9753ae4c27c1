#include <doctest.h>

#include <cmath>

#include "cer/core.hpp"
#include "test_support.hpp"

using namespace cer;
using testing::error_code_of;

TEST_SUITE("core") {

TEST_CASE("label parsing examples") {
  CHECK(parse_label("TRUE") == VerdictLabel::True);
  CHECK(parse_label("supports") == VerdictLabel::True);
  CHECK(error_code_of([] { parse_label("maybe"); }) == ErrorCode::UnknownLabel);
}

TEST_CASE("every accepted label round-trips to the canonical vocabulary") {
  const char* accepted[] = {"true",  "True",       "supports",  "SUPPORT", "supported", "yes",
                            "false", "refutes",    "REFUTED",   "contradict", "CONTRADICT", "contradicts",
                            "no",    "nei",        "NEI",       "not enough info", "Not Enough Information",
                            "NOT_ENOUGH_INFO", " nei "};
  for (const char* s : accepted) {
    const auto l = parse_label(s);
    const auto back = std::string(to_string(l));
    CHECK((back == "true" || back == "false" || back == "nei"));
    CHECK(parse_label(back) == l);
  }
  CHECK(parse_label("SUPPORT") == VerdictLabel::True);
  CHECK(parse_label("CONTRADICT") == VerdictLabel::False);
  CHECK(parse_label("NOT_ENOUGH_INFO") == VerdictLabel::Nei);
  for (const char* s : {"", "truth", "unknown", "mixed", "nope"})
    CHECK(error_code_of([&] { parse_label(s); }) == ErrorCode::UnknownLabel);
}

TEST_CASE("claim invariants") {
  Claim c{"c1", "   ", ClaimSource::Direct, {}, {}, {}};
  CHECK(error_code_of([&] { validate(c); }) == ErrorCode::InvalidArgument);

  c.text = "Aspirin reduces fever.";
  c.timestamp = TimeSpan{0.0, 1.0};
  CHECK(error_code_of([&] { validate(c); }) == ErrorCode::InvalidArgument);
  c.source = ClaimSource::Video;
  CHECK_NOTHROW(validate(c));

  const std::string source = "Intro. Aspirin reduces fever.";
  c.span = CharSpan{7, 29};
  CHECK_NOTHROW(validate(c, std::string_view(source)));
  c.span = CharSpan{6, 29};
  CHECK(error_code_of([&] { validate(c, std::string_view(source)); }) == ErrorCode::InvalidArgument);
  c.span = CharSpan{7, 40};
  CHECK(error_code_of([&] { validate(c, std::string_view(source)); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("assessment invariants") {
  ClaimAssessment a;
  a.claim = {"c", "Statins lower LDL.", ClaimSource::Direct, {}, {}, {}};
  a.confidence = 1.2;
  CHECK(error_code_of([&] { validate(a); }) == ErrorCode::InvalidArgument);
  a.confidence = 0.5;
  a.evidence.assign(4, EvidencePassage{"1", "t", "x", 0.1, RetrieverKind::Dense});
  CHECK(error_code_of([&] { validate(a); }) == ErrorCode::InvalidArgument);
  a.evidence.resize(3);
  CHECK_NOTHROW(validate(a));
  a.evidence[0].score = std::nan("");
  CHECK(error_code_of([&] { validate(a); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("assessment serialization is lossless") {
  ClaimAssessment a;
  a.claim = {"doc#3-20", "COVID-19 is deadly.", ClaimSource::Video, "upload:clip.mp4", CharSpan{3, 22},
             TimeSpan{1.25, 4.0}};
  a.label = VerdictLabel::False;
  a.confidence = 0.1 + 0.2;  // not representable in short decimal form
  a.evidence = {{"31000004", "Mortality", "In-hospital mortality was 21 percent.", 0.391191694233692,
                 RetrieverKind::Dense},
                {"31000015", "Ivermectin", "No effect.", -1e-300, RetrieverKind::Sparse}};
  a.justification = {"Consistent with [1].", false, "m", "JUDGMENT: false\nJUSTIFICATION: Consistent with [1]."};
  a.config_fingerprint = std::string(64, 'a');
  a.degraded = true;

  const nlohmann::json j = a;
  const auto back = j.get<ClaimAssessment>();
  CHECK(back == a);
  CHECK(nlohmann::json(back).dump() == j.dump());
  CHECK(j["label"] == "false");
  CHECK(j["claim"]["source"] == "video");

  a.justification.preliminary_judgment.reset();
  a.claim.origin_ref.reset();
  a.claim.span.reset();
  CHECK(nlohmann::json(a).get<ClaimAssessment>() == a);
}

TEST_CASE("error messages carry the code name") {
  const Error e(ErrorCode::FetchTimeout, "slow host");
  CHECK(std::string(e.what()) == "FetchTimeout: slow host");
}

}
