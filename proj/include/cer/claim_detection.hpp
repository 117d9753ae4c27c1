#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cer/core.hpp"
#include "cer/ingest.hpp"
#include "cer/llm.hpp"

namespace cer::detection {

struct Sentence {
  std::string text;
  CharSpan span;
  std::string doc_ref;
};

/// Splits on '.', '!' or '?' (plus trailing closing quotes/brackets) followed by
/// whitespace or end of input. A period ending a known abbreviation ("Dr.",
/// "e.g.", "et al.", ...) does not end a sentence. Inter-sentence whitespace is
/// excluded from spans, so spans and the gaps between them tile the input.
std::vector<Sentence> segment(std::string_view text, std::string_view doc_ref = {});

enum class Mode { ZeroShot, FewShot, RuleBased };
std::string_view to_string(Mode m);
Mode parse_mode(std::string_view s);

struct FewShotExample {
  std::string sentence;
  bool is_claim = false;
};

struct DetectionConfig {
  Mode mode = Mode::RuleBased;
  std::vector<FewShotExample> few_shot_examples;
  int max_claims = 25;
  std::string model_id = "meta/llama-3.1-405b-instruct";
};

void validate(const DetectionConfig& cfg);

inline constexpr std::size_t kSentencesPerCall = 20;
/// Line that introduces the numbered sentence list in detection prompts.
inline constexpr std::string_view kSentenceListHeader = "Sentences:";

/// Deterministic check-worthiness heuristic: at least 3 word tokens, at least
/// one assertive verb from the shipped lexicon, and not opening with a
/// greeting or imperative ("please", "click", "hello", ...).
bool rule_based_is_claim(std::string_view sentence);

/// Detection prompt for one batch of sentences.
llm::Request build_detection_request(std::span<const Sentence> batch, const DetectionConfig& cfg);

/// Parses "<n>: CLAIM|OTHER" lines (or a bare CLAIM/OTHER sequence) into one flag
/// per sentence; sentences the reply does not mention count as OTHER.
std::vector<bool> parse_detection_reply(std::string_view reply, std::size_t batch_size);

/// Check-worthy claims of `doc` in document order, at most cfg.max_claims.
/// LLM modes require a backend; rule-based mode ignores it.
std::vector<Claim> detect_claims(const ingest::SourceDocument& doc, const DetectionConfig& cfg,
                                 llm::Backend* backend = nullptr);

/// Responder for mock LLM backends: answers detection prompts with the
/// rule-based heuristic applied per numbered sentence.
std::string mock_detection_reply(const llm::Request& req);

}  // namespace cer::detection
