#include "cer/claim_detection.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <sstream>

namespace cer::detection {

namespace {

constexpr std::array<std::string_view, 24> kAbbreviations = {
    "dr.", "mr.", "mrs.", "ms.", "prof.", "e.g.", "i.e.", "fig.", "figs.", "vs.", "cf.", "approx.",
    "no.", "st.", "jr.", "sr.", "eq.", "vol.", "inc.", "ltd.", "co.", "u.s.", "ca.", "resp."};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

std::string word_ending_at(std::string_view text, std::size_t begin, std::size_t dot) {
  std::size_t w = dot;
  while (w > begin && !is_space(text[w - 1])) --w;
  std::string word = to_lower_ascii(text.substr(w, dot - w + 1));
  while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\'')) word.erase(0, 1);
  if (word == "al.") {
    // Only "et al." is protected.
    std::size_t p = w;
    while (p > begin && is_space(text[p - 1])) --p;
    if (p >= begin + 2 && to_lower_ascii(text.substr(p - 2, 2)) == "et" && (p == begin + 2 || is_space(text[p - 3])))
      return "et al.";
  }
  return word;
}

bool is_abbreviation(std::string_view text, std::size_t begin, std::size_t dot) {
  const std::string word = word_ending_at(text, begin, dot);
  if (word == "et al.") return true;
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
}

std::vector<std::string> word_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  auto word_byte = [](unsigned char c) { return std::isalnum(c) || c >= 0x80; };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    const bool inner_joiner = (c == '-' || c == '\'') && !cur.empty() && i + 1 < s.size() &&
                              word_byte(static_cast<unsigned char>(s[i + 1]));
    if (word_byte(c) || inner_joiner) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

constexpr std::array<std::string_view, 78> kAssertiveVerbs = {
    "is",        "are",        "was",        "were",      "be",         "been",      "causes",
    "cause",     "caused",     "prevents",   "prevent",   "prevented",  "reduces",   "reduce",
    "reduced",   "increases",  "increase",   "increased", "cures",      "cure",      "cured",
    "treats",    "treat",      "treated",    "kills",     "kill",       "killed",    "helps",
    "help",      "helped",     "protects",   "protect",   "lowers",     "lower",     "raises",
    "raise",     "improves",   "improve",    "boosts",    "boost",      "contains",  "contain",
    "has",       "have",       "had",        "can",       "cannot",     "may",       "does",
    "linked",    "associated", "leads",      "lead",      "shows",      "showed",    "shown",
    "proves",    "proven",     "works",      "affects",   "affect",     "triggers",  "blocks",
    "damages",   "weakens",    "strengthens", "spreads",  "transmits",  "heals",     "worsens",
    "decreases", "decrease",   "eliminates", "destroys",  "alters",     "changes",   "protected",
    "doesn't"};

constexpr std::array<std::string_view, 16> kNonClaimOpeners = {
    "please", "click", "hello", "hi",    "hey",  "thanks",   "thank", "welcome",
    "subscribe", "share", "follow", "sign", "watch", "like", "join", "download"};

bool starts_with_word(std::string_view text, std::string_view word) {
  if (text.size() < word.size() || text.substr(0, word.size()) != word) return false;
  return text.size() == word.size() || !std::isalnum(static_cast<unsigned char>(text[word.size()]));
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out.push_back('\n');
  }
  return out;
}

}  // namespace

std::vector<Sentence> segment(std::string_view text, std::string_view doc_ref) {
  std::vector<Sentence> out;
  const std::size_t n = text.size();
  auto skip_space = [&](std::size_t i) {
    while (i < n && is_space(text[i])) ++i;
    return i;
  };
  auto emit = [&](std::size_t b, std::size_t e) {
    out.push_back({std::string(text.substr(b, e - b)), {b, e}, std::string(doc_ref)});
  };

  std::size_t start = skip_space(0);
  std::size_t pos = start;
  while (pos < n) {
    const char c = text[pos];
    if (c != '.' && c != '!' && c != '?') {
      ++pos;
      continue;
    }
    std::size_t end = pos + 1;
    while (end < n && (text[end] == '.' || text[end] == '!' || text[end] == '?' || is_closer(text[end]))) ++end;
    const bool boundary = end == n || is_space(text[end]);
    const bool single_period = c == '.' && (end == pos + 1 || is_closer(text[pos + 1]));
    if (!boundary || (single_period && is_abbreviation(text, start, pos))) {
      pos = end;
      continue;
    }
    emit(start, end);
    start = skip_space(end);
    pos = start;
  }
  if (start < n) {
    std::size_t e = n;
    while (e > start && is_space(text[e - 1])) --e;
    emit(start, e);
  }
  return out;
}

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::ZeroShot: return "zero_shot";
    case Mode::FewShot: return "few_shot";
    case Mode::RuleBased: return "rule_based";
  }
  return "rule_based";
}

Mode parse_mode(std::string_view s) {
  if (s == "zero_shot") return Mode::ZeroShot;
  if (s == "few_shot") return Mode::FewShot;
  if (s == "rule_based") return Mode::RuleBased;
  throw Error(ErrorCode::ConfigError, "unknown detection mode '" + std::string(s) + "'");
}

void validate(const DetectionConfig& cfg) {
  if (cfg.max_claims < 1) throw Error(ErrorCode::ConfigError, "max_claims must be positive");
  if ((cfg.mode == Mode::FewShot) != !cfg.few_shot_examples.empty())
    throw Error(ErrorCode::ConfigError, "few_shot_examples must be non-empty exactly in few_shot mode");
}

bool rule_based_is_claim(std::string_view sentence) {
  const auto tokens = word_tokens(sentence);
  if (tokens.size() < 3) return false;
  if (std::find(kNonClaimOpeners.begin(), kNonClaimOpeners.end(), tokens.front()) != kNonClaimOpeners.end())
    return false;
  return std::any_of(tokens.begin(), tokens.end(), [](const std::string& t) {
    return std::find(kAssertiveVerbs.begin(), kAssertiveVerbs.end(), t) != kAssertiveVerbs.end();
  });
}

llm::Request build_detection_request(std::span<const Sentence> batch, const DetectionConfig& cfg) {
  std::vector<std::string> lines;
  lines.push_back(
      "Classify each numbered sentence. Answer CLAIM if it states a verifiable assertion about health, "
      "medicine or biology whose truth could affect clinical or public health decisions; otherwise answer OTHER.");
  if (cfg.mode == Mode::FewShot) {
    lines.push_back("");
    lines.push_back("Examples:");
    for (const auto& ex : cfg.few_shot_examples)
      lines.push_back("\"" + ex.sentence + "\" -> " + (ex.is_claim ? "CLAIM" : "OTHER"));
  }
  lines.push_back("");
  lines.push_back(std::string(kSentenceListHeader));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::string flat = batch[i].text;
    std::replace(flat.begin(), flat.end(), '\n', ' ');
    lines.push_back(std::to_string(i + 1) + ". " + flat);
  }
  lines.push_back("");
  lines.push_back("Reply with exactly one line per sentence in the form \"<number>: CLAIM\" or \"<number>: OTHER\".");

  llm::Request req;
  req.model_id = cfg.model_id;
  req.system_prompt = "You are an assistant that finds check-worthy biomedical claims.";
  req.user_prompt = join_lines(lines);
  req.temperature = 0.0;
  req.max_tokens = static_cast<int>(8 * batch.size() + 16);
  return req;
}

std::vector<bool> parse_detection_reply(std::string_view reply, std::size_t batch_size) {
  std::vector<bool> flags(batch_size, false);
  static const std::regex numbered(R"(^\s*\**\s*(\d+)\s*\**\s*[:.)\-]?\s*\**\s*(CLAIM|OTHER)\b)", std::regex::icase);
  static const std::regex bare(R"(\b(CLAIM|OTHER)\b)", std::regex::icase);

  bool any_numbered = false;
  std::istringstream in{std::string(reply)};
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_search(line, m, numbered)) {
      any_numbered = true;
      const std::size_t idx = std::stoul(m[1].str());
      if (idx >= 1 && idx <= batch_size) flags[idx - 1] = to_lower_ascii(m[2].str()) == "claim";
    }
  }
  if (any_numbered) return flags;

  const std::string text(reply);
  std::size_t i = 0;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), bare); it != std::sregex_iterator() && i < batch_size;
       ++it, ++i)
    flags[i] = to_lower_ascii((*it)[1].str()) == "claim";
  return flags;
}

std::vector<Claim> detect_claims(const ingest::SourceDocument& doc, const DetectionConfig& cfg,
                                 llm::Backend* backend) {
  validate(cfg);
  const auto sentences = segment(doc.raw_text, doc.id);
  if (sentences.empty()) return {};

  std::vector<bool> flags(sentences.size(), false);
  if (cfg.mode == Mode::RuleBased) {
    for (std::size_t i = 0; i < sentences.size(); ++i) flags[i] = rule_based_is_claim(sentences[i].text);
  } else {
    if (!backend) throw Error(ErrorCode::ConfigError, "LLM detection mode needs a backend");
    for (std::size_t b = 0; b < sentences.size(); b += kSentencesPerCall) {
      const std::size_t len = std::min(kSentencesPerCall, sentences.size() - b);
      const std::span<const Sentence> batch(sentences.data() + b, len);
      const auto reply = backend->complete(build_detection_request(batch, cfg));
      const auto batch_flags = parse_detection_reply(reply.text, len);
      std::copy(batch_flags.begin(), batch_flags.end(), flags.begin() + static_cast<std::ptrdiff_t>(b));
    }
  }

  // Flagged sentences become claims; in LLM modes an anaphoric follow-up
  // ("This ...", "It ...", "That ...") is merged into its predecessor.
  std::vector<CharSpan> spans;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (!flags[i]) continue;
    CharSpan span = sentences[i].span;
    if (cfg.mode != Mode::RuleBased && i + 1 < sentences.size() && flags[i + 1]) {
      const auto& next = sentences[i + 1].text;
      if (starts_with_word(next, "This") || starts_with_word(next, "It") || starts_with_word(next, "That")) {
        span.end = sentences[i + 1].span.end;
        ++i;
      }
    }
    spans.push_back(span);
    if (spans.size() == static_cast<std::size_t>(cfg.max_claims)) break;
  }

  std::vector<Claim> claims;
  for (const auto& span : spans) {
    Claim c;
    c.id = doc.id + "#" + std::to_string(span.start) + "-" + std::to_string(span.end);
    c.text = doc.raw_text.substr(span.start, span.end - span.start);
    c.source = ingest::claim_source_for(doc.kind);
    c.origin_ref = doc.uri;
    c.span = span;
    if (doc.kind == ingest::SourceKind::Video) {
      std::optional<TimeSpan> ts;
      for (std::size_t s = 0; s < doc.segment_spans.size(); ++s) {
        const auto& seg = doc.segment_spans[s];
        if (seg.end <= span.start || seg.start >= span.end) continue;
        if (!ts) ts = TimeSpan{doc.segments[s].start_sec, doc.segments[s].end_sec};
        ts->end_sec = doc.segments[s].end_sec;
      }
      c.timestamp = ts;
    }
    claims.push_back(std::move(c));
  }
  return claims;
}

std::string mock_detection_reply(const llm::Request& req) {
  std::istringstream in(req.user_prompt);
  std::string line;
  bool in_list = false;
  std::string out;
  static const std::regex item(R"(^(\d+)\. (.*)$)");
  while (std::getline(in, line)) {
    if (line == kSentenceListHeader) {
      in_list = true;
      continue;
    }
    if (!in_list) continue;
    std::smatch m;
    if (!std::regex_match(line, m, item)) {
      if (line.empty()) break;
      continue;
    }
    out += m[1].str() + ": " + (rule_based_is_claim(m[2].str()) ? "CLAIM" : "OTHER") + "\n";
  }
  return out;
}

}  // namespace cer::detection
