#include <doctest.h>

#include <atomic>

#include "cer/reasoning.hpp"
#include "cer/util.hpp"
#include "test_support.hpp"

using namespace cer;
using namespace cer::reasoning;
using testing::error_code_of;

namespace {

Claim claim(std::string text) { return {"c1", std::move(text), ClaimSource::Direct, {}, {}, {}}; }

std::vector<EvidencePassage> two_passages() {
  return {{"1", "Aspirin trial", "Aspirin lowered fever.", 2.0, RetrieverKind::Dense},
          {"2", "Fever review", "Antipyretics work.", 1.0, RetrieverKind::Dense}};
}

std::shared_ptr<llm::MockBackend> fixed(std::string reply) {
  return std::make_shared<llm::MockBackend>([reply](const llm::Request&) { return reply; });
}

}  // namespace

TEST_SUITE("reasoning") {

TEST_CASE("prompt sections appear in order") {
  const auto ev = two_passages();
  const auto p = build_prompt(claim("Aspirin reduces fever."), ev, {});
  const auto role = p.find(std::string(default_role_text()).substr(0, 30));
  const auto e1 = p.find("[1] Aspirin trial. Aspirin lowered fever.");
  const auto e2 = p.find("[2] Fever review. Antipyretics work.");
  const auto c = p.find("Aspirin reduces fever.");
  const auto fmt = p.find("JUDGMENT:");
  REQUIRE(role != std::string::npos);
  REQUIRE(e1 != std::string::npos);
  REQUIRE(e2 != std::string::npos);
  REQUIRE(fmt != std::string::npos);
  CHECK(role < e1);
  CHECK(e1 < e2);
  CHECK(e2 < c);
  CHECK(c < fmt);
  CHECK(p.find("JUSTIFICATION:") != std::string::npos);
  CHECK(p == build_prompt(claim("Aspirin reduces fever."), ev, {}));
}

TEST_CASE("prompt toggles") {
  const auto ev = two_passages();
  PromptConfig cfg;
  cfg.include_evidence = false;
  CHECK(build_prompt(claim("X"), ev, cfg).find("[1]") == std::string::npos);
  cfg = {};
  cfg.include_role = false;
  CHECK(build_prompt(claim("X"), ev, cfg).find(std::string(default_role_text()).substr(0, 30)) == std::string::npos);
  cfg = {};
  cfg.require_justification = false;
  const auto p = build_prompt(claim("X"), ev, cfg);
  CHECK(p.find("JUDGMENT:") != std::string::npos);
  CHECK(p.find("JUSTIFICATION:") == std::string::npos);
  cfg = {};
  cfg.role_text = "You are a careful reviewer.";
  CHECK(build_prompt(claim("X"), {}, cfg).starts_with("You are a careful reviewer."));
  CHECK(build_prompt(claim("X"), {}, {}).find("[1]") == std::string::npos);
}

TEST_CASE("prompt config validation") {
  PromptConfig cfg;
  cfg.temperature = 2.5;
  CHECK(error_code_of([&] { validate(cfg); }) == ErrorCode::ConfigError);
  cfg = {};
  cfg.max_tokens = 63;
  CHECK(error_code_of([&] { validate(cfg); }) == ErrorCode::ConfigError);
}

TEST_CASE("parse response examples") {
  auto r = parse_response("judgment: TRUE\njustification: x");
  CHECK(r.judgment);
  CHECK(r.justification == "x");
  r = parse_response("```\nJUDGMENT: false\nJUSTIFICATION: y\n```");
  CHECK(!r.judgment);
  CHECK(r.justification == "y");
  r = parse_response("  **JUDGMENT:** true\n**JUSTIFICATION:** first line\nsecond line\n");
  CHECK(r.judgment);
  CHECK(r.justification == "first line\nsecond line");
  CHECK(parse_response("JUDGMENT: false").justification.empty());
  CHECK(error_code_of([] { parse_response("I think maybe"); }) == ErrorCode::UnparseableResponse);
  CHECK(error_code_of([] { parse_response("JUDGMENT: perhaps"); }) == ErrorCode::UnparseableResponse);
}

TEST_CASE("reason parses a well-formed reply") {
  auto be = fixed("JUDGMENT: true\nJUSTIFICATION: Supported by [1].");
  const auto ev = two_passages();
  const auto r = reason(claim("Aspirin reduces fever."), ev, {}, *be);
  CHECK(r.justification.preliminary_judgment == true);
  CHECK(r.justification.text == "Supported by [1].");
  CHECK(r.attempts == 1);
  CHECK(r.prompt_text == build_prompt(claim("Aspirin reduces fever."), ev, {}));
  CHECK(r.justification.model_id == PromptConfig{}.model_id);

  auto be_false = fixed("JUDGMENT: false\nJUSTIFICATION: Contradicted.");
  CHECK(reason(claim("X"), {}, {}, *be_false).justification.preliminary_judgment == false);
}

TEST_CASE("reason retries once then gives up") {
  auto prose = fixed("Free prose with no fields.");
  try {
    reason(claim("X"), {}, {}, *prose);
    FAIL("expected UnparseableResponse");
  } catch (const UnparseableReplyError& e) {
    CHECK(e.code() == ErrorCode::UnparseableResponse);
    CHECK(e.attempts() == 2);
  }
  CHECK(prose->calls() == 2);

  std::atomic<int> n{0};
  std::string second_prompt;
  llm::MockBackend repair([&](const llm::Request& req) -> std::string {
    if (n++ == 0) return "no idea";
    second_prompt = req.user_prompt;
    return "JUDGMENT: true\nJUSTIFICATION: ok";
  });
  const auto r = reason(claim("X"), {}, {}, repair);
  CHECK(r.attempts == 2);
  CHECK(second_prompt.find(kRepairInstruction) != std::string::npos);
}

TEST_CASE("backend failure propagates") {
  llm::MockBackend none;
  CHECK(error_code_of([&] { reason(claim("X"), {}, {}, none); }) == ErrorCode::BackendUnavailable);
}

TEST_CASE("mock reasoning reply is deterministic and parseable") {
  llm::Request req;
  req.user_prompt = build_prompt(claim("Zinc shortens colds."), two_passages(), {});
  const auto a = mock_reasoning_reply(req);
  CHECK(a == mock_reasoning_reply(req));
  CHECK_NOTHROW(parse_response(a));
  CHECK(a.find("[1]") != std::string::npos);
}

TEST_CASE("canned mock table") {
  llm::MockBackend be;
  llm::Request req;
  req.user_prompt = "hello";
  be.add_canned(llm::prompt_hash(req), "canned");
  CHECK(be.complete(req).text == "canned");
  req.user_prompt = "other";
  CHECK(error_code_of([&] { be.complete(req); }) == ErrorCode::BackendUnavailable);
}

TEST_CASE("response cache persists across restarts") {
  testing::TempDir tmp;
  const auto path = tmp.file("llm.log");
  llm::Request req;
  req.model_id = "m";
  req.user_prompt = "prompt";
  {
    auto inner = fixed("JUDGMENT: true");
    llm::CachingBackend cache(inner, std::make_shared<KvLog>(path, 100));
    CHECK(cache.complete(req).text == "JUDGMENT: true");
    CHECK(cache.complete(req).text == "JUDGMENT: true");
    CHECK(inner->calls() == 1);
  }
  auto inner = fixed("different");
  llm::CachingBackend cache(inner, std::make_shared<KvLog>(path, 100));
  CHECK(cache.complete(req).text == "JUDGMENT: true");
  CHECK(inner->calls() == 0);
  req.model_id = "other-model";
  CHECK(cache.complete(req).text == "different");
  CHECK(llm::response_cache_key(req) == sha256_hex("\nprompt" + std::string("other-model")));
}

TEST_CASE("failures are not cached") {
  std::atomic<int> n{0};
  auto inner = std::make_shared<llm::MockBackend>([&](const llm::Request&) -> std::string {
    if (n++ == 0) throw Error(ErrorCode::BackendUnavailable, "down");
    return "up";
  });
  llm::CachingBackend cache(inner, std::make_shared<KvLog>("", 10));
  llm::Request req;
  CHECK(error_code_of([&] { cache.complete(req); }) == ErrorCode::BackendUnavailable);
  CHECK(cache.complete(req).text == "up");
}

TEST_CASE("limited backend caps in-flight calls") {
  std::atomic<int> now{0}, peak{0};
  auto inner = std::make_shared<llm::MockBackend>([&](const llm::Request&) {
    const int v = ++now;
    int p = peak.load();
    while (v > p && !peak.compare_exchange_weak(p, v)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --now;
    return std::string("ok");
  });
  llm::LimitedBackend limited(inner, 2);
  std::vector<std::thread> ts;
  for (int i = 0; i < 8; ++i) ts.emplace_back([&] { limited.complete({}); });
  for (auto& t : ts) t.join();
  CHECK(peak.load() <= 2);
  CHECK(inner->calls() == 8);
}

TEST_CASE("http backend retries then reports unavailability") {
  testing::LocalServer srv;
  std::atomic<int> hits{0};
  std::string seen_model;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++hits;
    const auto body = nlohmann::json::parse(req.body);
    seen_model = body.at("model").get<std::string>();
    if (n == 1) {
      res.status = 503;
      return;
    }
    res.set_content(nlohmann::json{{"choices", {{{"message", {{"content", "JUDGMENT: true"}}}}}}}.dump(),
                    "application/json");
  });
  srv.start();
  llm::HttpBackend be({srv.url("/v1/chat/completions"), std::chrono::milliseconds(2000), 2,
                       std::chrono::milliseconds(10)});
  llm::Request req;
  req.model_id = "m1";
  req.user_prompt = "p";
  CHECK(be.complete(req).text == "JUDGMENT: true");
  CHECK(hits.load() == 2);
  CHECK(seen_model == "m1");

  llm::HttpBackend dead({"http://127.0.0.1:" + std::to_string(testing::closed_port()) + "/x",
                         std::chrono::milliseconds(300), 1, std::chrono::milliseconds(5)});
  CHECK(error_code_of([&] { dead.complete(req); }) == ErrorCode::BackendUnavailable);
}

}  // TEST_SUITE
