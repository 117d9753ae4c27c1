#include "cer/reasoning.hpp"

#include <chrono>
#include <regex>
#include <sstream>
#include <vector>

#include "cer/data_files.hpp"
#include "cer/util.hpp"

namespace cer::reasoning {

void validate(const PromptConfig& cfg) {
  if (!(cfg.temperature >= 0.0 && cfg.temperature <= 2.0))
    throw Error(ErrorCode::ConfigError, "temperature must be in [0, 2]");
  if (cfg.max_tokens < 64) throw Error(ErrorCode::ConfigError, "max_tokens must be >= 64");
}

std::string_view default_role_text() {
  static const std::string text = trim(data::role_text());
  return text;
}

std::string build_prompt(const Claim& claim, std::span<const EvidencePassage> evidence, const PromptConfig& cfg) {
  std::ostringstream p;
  if (cfg.include_role) {
    p << (cfg.role_text.empty() ? std::string(default_role_text()) : trim(cfg.role_text)) << "\n\n";
  }
  if (cfg.include_evidence && !evidence.empty()) {
    p << "Scientific evidence:\n";
    for (std::size_t i = 0; i < evidence.size(); ++i) {
      const auto& e = evidence[i];
      p << "[" << (i + 1) << "] ";
      if (!e.title.empty()) p << e.title << ". ";
      p << e.text << "\n";
    }
    p << "\n";
  }
  p << "Claim: " << claim.text << "\n\n";
  p << "Assess whether the claim is true or false";
  if (cfg.include_evidence && !evidence.empty()) p << " based on the scientific evidence above";
  p << ". Answer in exactly this format:\n";
  p << "JUDGMENT: true or false\n";
  if (cfg.require_justification)
    p << "JUSTIFICATION: a detailed explanation of your judgment"
      << (cfg.include_evidence && !evidence.empty() ? ", citing evidence passages by number such as [1]" : "") << "\n";
  return p.str();
}

namespace {

std::string strip_emphasis(std::string s) {
  std::string out;
  for (char c : s)
    if (c != '*' && c != '_' && c != '#') out.push_back(c);
  return out;
}

}  // namespace

ParsedReply parse_response(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).starts_with("```")) continue;
      lines.push_back(line);
    }
  }
  static const std::regex judgment_re(R"(^\s*judgment\s*:\s*([A-Za-z]+)\b.*$)", std::regex::icase);
  static const std::regex justification_re(R"(^\s*justification\s*:\s*(.*)$)", std::regex::icase);

  std::optional<bool> judgment;
  std::optional<std::size_t> just_line;
  std::string first_just;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string plain = strip_emphasis(lines[i]);
    std::smatch m;
    if (!judgment && std::regex_match(plain, m, judgment_re)) {
      std::string v = to_lower_ascii(m[1].str());
      while (!v.empty() && (v.back() == '.' || v.back() == ',')) v.pop_back();
      if (v == "true") judgment = true;
      else if (v == "false") judgment = false;
      else throw Error(ErrorCode::UnparseableResponse, "JUDGMENT must be true or false, got '" + m[1].str() + "'");
    } else if (!just_line && std::regex_match(plain, m, justification_re)) {
      just_line = i;
      // Keep the original line content after the field name.
      const auto colon = lines[i].find(':');
      first_just = trim(lines[i].substr(colon + 1));
    }
  }
  if (!judgment) throw Error(ErrorCode::UnparseableResponse, "no JUDGMENT field");

  ParsedReply out;
  out.judgment = *judgment;
  if (just_line) {
    std::string body = first_just;
    for (std::size_t i = *just_line + 1; i < lines.size(); ++i) {
      if (std::regex_match(strip_emphasis(lines[i]), judgment_re)) continue;
      body += "\n" + lines[i];
    }
    out.justification = trim(body);
    while (out.justification.starts_with("**")) out.justification = trim(out.justification.substr(2));
  }
  return out;
}

ReasoningResult reason(const Claim& claim, std::span<const EvidencePassage> evidence, const PromptConfig& cfg,
                       llm::Backend& backend) {
  validate(cfg);
  ReasoningResult result;
  result.prompt_text = build_prompt(claim, evidence, cfg);

  llm::Request req;
  req.model_id = cfg.model_id;
  req.user_prompt = result.prompt_text;
  req.temperature = cfg.temperature;
  req.max_tokens = cfg.max_tokens;

  const auto started = std::chrono::steady_clock::now();
  std::string last_reply;
  std::string last_error;
  for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
    if (attempt > 1) req.user_prompt = result.prompt_text + "\n" + std::string(kRepairInstruction) + "\n";
    result.attempts = attempt;
    last_reply = backend.complete(req).text;
    try {
      auto parsed = parse_response(last_reply);
      result.justification = {std::move(parsed.justification), parsed.judgment, cfg.model_id, last_reply};
      result.latency_ms = static_cast<long>(
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count());
      return result;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparseableResponse) throw;
      last_error = e.what();
    }
  }
  throw UnparseableReplyError(last_error + " after " + std::to_string(kMaxAttempts) + " attempts", kMaxAttempts,
                              last_reply);
}

std::string mock_reasoning_reply(const llm::Request& req) {
  const std::uint64_t h = stable_hash64(req.user_prompt);
  const bool verdict = (h & 1) == 0;
  const bool has_evidence = req.user_prompt.find("\n[1] ") != std::string::npos;
  std::string out = std::string("JUDGMENT: ") + (verdict ? "true" : "false") + "\nJUSTIFICATION: ";
  if (has_evidence)
    out += verdict ? "The retrieved abstracts, in particular [1], report findings consistent with the claim."
                   : "The retrieved abstracts, in particular [1], report findings that contradict the claim.";
  else
    out += verdict ? "General biomedical knowledge is consistent with the claim."
                   : "General biomedical knowledge does not support the claim.";
  return out;
}

}  // namespace cer::reasoning
