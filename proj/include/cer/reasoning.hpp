#pragma once

// Evidence-grounded LLM reasoning: prompt construction, the backend call with
// one format-repair retry, and reply parsing.

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "cer/core.hpp"
#include "cer/llm.hpp"

namespace cer::reasoning {

struct PromptConfig {
  bool include_role = true;
  bool include_evidence = true;
  bool require_justification = true;
  std::string role_text;  // empty -> shipped role text
  double temperature = 0.0;
  int max_tokens = 512;
  std::string model_id = "meta-llama/Meta-Llama-3.1-405B-Instruct";
};

/// Throws ConfigError unless temperature in [0, 2] and max_tokens >= 64.
void validate(const PromptConfig& cfg);

/// Role text used when PromptConfig::role_text is empty.
std::string_view default_role_text();

/// Sections, in order: role paragraph; numbered evidence "[n] <title>. <abstract>";
/// the claim; the answer-format instruction.
std::string build_prompt(const Claim& claim, std::span<const EvidencePassage> evidence, const PromptConfig& cfg);

inline constexpr std::string_view kRepairInstruction =
    "Respond only in the required format: a line starting with JUDGMENT: followed by true or false, then a line "
    "starting with JUSTIFICATION: followed by your explanation.";

struct ParsedReply {
  bool judgment = false;
  std::string justification;
};

/// Extracts the line-anchored "JUDGMENT:" (true/false) and "JUSTIFICATION:"
/// (rest of message) fields, case-insensitively, ignoring markdown fences and
/// emphasis. Throws UnparseableResponse if the judgment is missing or invalid.
ParsedReply parse_response(std::string_view text);

struct ReasoningResult {
  Justification justification;
  std::string prompt_text;
  long latency_ms = 0;
  int attempts = 0;
};

class UnparseableReplyError : public Error {
 public:
  UnparseableReplyError(const std::string& what, int attempts, std::string last_reply)
      : Error(ErrorCode::UnparseableResponse, what), attempts_(attempts), last_reply_(std::move(last_reply)) {}
  int attempts() const { return attempts_; }
  const std::string& last_reply() const { return last_reply_; }

 private:
  int attempts_;
  std::string last_reply_;
};

inline constexpr int kMaxAttempts = 2;

/// Calls the backend with build_prompt's output; on an unparseable reply,
/// retries once with the repair instruction appended. Throws
/// BackendUnavailable or UnparseableReplyError.
ReasoningResult reason(const Claim& claim, std::span<const EvidencePassage> evidence, const PromptConfig& cfg,
                       llm::Backend& backend);

/// Responder for mock LLM backends: answers reasoning prompts with a
/// well-formed, deterministic reply derived from the prompt hash.
std::string mock_reasoning_reply(const llm::Request& req);

}  // namespace cer::reasoning
