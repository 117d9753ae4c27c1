#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cer/ingest.hpp"

namespace cer::ingest {

namespace {

constexpr std::array<std::string_view, 8> kSkipped = {"script", "style",  "noscript", "template",
                                                      "head",   "nav",    "header",   "footer"};

constexpr std::array<std::string_view, 38> kBlock = {
    "p",       "div",     "br",     "li",       "ul",         "ol",      "h1",     "h2",
    "h3",      "h4",      "h5",     "h6",       "tr",         "table",   "section", "article",
    "blockquote", "pre",  "hr",     "form",     "main",       "aside",   "figure", "figcaption",
    "dl",      "dt",      "dd",     "address",  "fieldset",   "details", "summary", "body",
    "html",    "title",   "caption", "thead",   "tbody",      "option"};

bool is_one_of(std::string_view name, auto const& list) {
  for (auto n : list)
    if (n == name) return true;
  return false;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

struct NamedEntity {
  std::string_view name;
  std::uint32_t cp;
};

constexpr std::array<NamedEntity, 24> kEntities{{
    {"amp", '&'},      {"lt", '<'},       {"gt", '>'},       {"quot", '"'},     {"apos", '\''},
    {"nbsp", ' '},     {"ndash", 0x2013}, {"mdash", 0x2014}, {"lsquo", 0x2018}, {"rsquo", 0x2019},
    {"ldquo", 0x201C}, {"rdquo", 0x201D}, {"hellip", 0x2026}, {"copy", 0xA9},   {"reg", 0xAE},
    {"deg", 0xB0},     {"plusmn", 0xB1},  {"micro", 0xB5},   {"middot", 0xB7},  {"times", 0xD7},
    {"alpha", 0x3B1},  {"beta", 0x3B2},   {"gamma", 0x3B3},  {"mu", 0x3BC},
}};

// Decodes the entity starting at html[i] == '&'. Returns characters consumed, 0 if not an entity.
std::size_t decode_entity(std::string_view html, std::size_t i, std::string& out) {
  const auto semi = html.find(';', i + 1);
  if (semi == std::string_view::npos || semi - i > 12) return 0;
  std::string_view body = html.substr(i + 1, semi - i - 1);
  if (body.empty()) return 0;
  if (body[0] == '#') {
    std::uint32_t cp = 0;
    bool hex = body.size() > 1 && (body[1] == 'x' || body[1] == 'X');
    std::string_view digits = body.substr(hex ? 2 : 1);
    if (digits.empty()) return 0;
    for (char c : digits) {
      const auto uc = static_cast<unsigned char>(c);
      if (hex ? !std::isxdigit(uc) : !std::isdigit(uc)) return 0;
      cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(std::isdigit(uc) ? c - '0' : (std::tolower(uc) - 'a' + 10));
      if (cp > 0x10FFFF) cp = 0xFFFD;
    }
    if (cp == 0xA0) cp = ' ';
    append_utf8(out, cp);
    return semi - i + 1;
  }
  for (const auto& e : kEntities) {
    if (e.name == body) {
      append_utf8(out, e.cp);
      return semi - i + 1;
    }
  }
  return 0;
}

class Extractor {
 public:
  explicit Extractor(std::string_view html) : html_(html) {}

  std::string run() {
    std::size_t i = 0;
    while (i < html_.size()) {
      const char c = html_[i];
      if (c == '<') {
        i = on_markup(i);
      } else if (c == '&') {
        std::string decoded;
        const std::size_t n = decode_entity(html_, i, decoded);
        if (n == 0) {
          emit_char('&');
          ++i;
        } else {
          for (char d : decoded) emit_char(d);
          i += n;
        }
      } else if (c == '\xC2' && i + 1 < html_.size() && html_[i + 1] == '\xA0') {
        emit_char(' ');  // raw UTF-8 no-break space
        i += 2;
      } else {
        emit_char(c);
        ++i;
      }
    }
    break_line();
    std::string out;
    for (const auto& line : lines_) {
      if (!out.empty()) out.push_back('\n');
      out += line;
    }
    return out;
  }

 private:
  bool skipping() const { return skip_depth_ > 0; }

  void emit_char(char c) {
    if (skipping()) return;
    if (is_space(c)) {
      pending_space_ = !line_.empty();
      return;
    }
    emit_visible(c);
  }

  void emit_visible(char c) {
    if (pending_space_) {
      line_.push_back(' ');
      pending_space_ = false;
    }
    line_.push_back(c);
  }

  void break_line() {
    if (!line_.empty()) lines_.push_back(std::move(line_));
    line_.clear();
    pending_space_ = false;
  }

  void soft_space() {
    if (!skipping() && !line_.empty()) pending_space_ = true;
  }

  static bool name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == ':' || c == '_';
  }

  // Returns the index just past the markup construct starting at html_[i] == '<'.
  std::size_t on_markup(std::size_t i) {
    std::string_view rest = html_.substr(i);
    if (rest.starts_with("<!--")) {
      const auto end = html_.find("-->", i + 4);
      return end == std::string_view::npos ? html_.size() : end + 3;
    }
    if (rest.starts_with("<!") || rest.starts_with("<?")) {
      const auto end = html_.find('>', i);
      return end == std::string_view::npos ? html_.size() : end + 1;
    }
    const bool closing = rest.size() > 1 && rest[1] == '/';
    const std::size_t name_begin = i + (closing ? 2 : 1);
    if (name_begin >= html_.size() || !std::isalpha(static_cast<unsigned char>(html_[name_begin]))) {
      emit_char('<');
      return i + 1;
    }
    std::size_t j = name_begin;
    while (j < html_.size() && name_char(html_[j])) ++j;
    const std::string name = to_lower_ascii(html_.substr(name_begin, j - name_begin));

    // Scan attributes up to the closing '>' honoring quotes.
    char quote = 0;
    bool self_closing = false;
    while (j < html_.size()) {
      const char c = html_[j];
      if (quote) {
        if (c == quote) quote = 0;
      } else if (c == '"' || c == '\'') {
        quote = c;
      } else if (c == '>') {
        self_closing = j > 0 && html_[j - 1] == '/';
        break;
      } else if (c == '<') {
        // Tag soup: an unterminated tag ends at the next '<'.
        --j;
        break;
      }
      ++j;
    }
    const std::size_t after = j < html_.size() ? j + 1 : html_.size();
    on_tag(name, closing, self_closing);

    if (!closing && !self_closing && (name == "script" || name == "style")) {
      // Raw text element: jump to the matching close tag.
      const std::string close = "</" + name;
      std::size_t k = after;
      while (true) {
        k = html_.find("</", k);
        if (k == std::string_view::npos) return html_.size();
        if (to_lower_ascii(html_.substr(k, close.size())) == close) break;
        k += 2;
      }
      return k;
    }
    return after;
  }

  void on_tag(const std::string& name, bool closing, bool self_closing) {
    if (is_one_of(name, kSkipped)) {
      if (self_closing) return;
      auto& depth = open_skipped_[index_of_skipped(name)];
      if (!closing) {
        ++depth;
        ++skip_depth_;
        break_line();
      } else if (depth > 0) {
        --depth;
        --skip_depth_;
        break_line();
      }
      return;
    }
    if (name == "body" && !closing) {
      // <body> implicitly closes an unterminated <head>.
      auto& head = open_skipped_[index_of_skipped("head")];
      skip_depth_ -= head;
      head = 0;
    }
    if ((name == "body" || name == "html") && closing) {
      for (auto& d : open_skipped_) d = 0;
      skip_depth_ = 0;
    }
    if (skipping()) return;
    if (is_one_of(name, kBlock)) {
      break_line();
    } else if (name == "td" || name == "th" || name == "img") {
      soft_space();
    }
  }

  static std::size_t index_of_skipped(std::string_view name) {
    for (std::size_t k = 0; k < kSkipped.size(); ++k)
      if (kSkipped[k] == name) return k;
    return 0;
  }

  std::string_view html_;
  std::vector<std::string> lines_;
  std::string line_;
  bool pending_space_ = false;
  int skip_depth_ = 0;
  std::array<int, kSkipped.size()> open_skipped_{};
};

bool has_markup(std::string_view s) {
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i] != '<') continue;
    const char n = s[i + 1];
    if (std::isalpha(static_cast<unsigned char>(n)) || n == '/' || n == '!' || n == '?') return true;
  }
  return false;
}

// Text without markup keeps its line structure; only whitespace runs inside a line collapse.
std::string plain_text(std::string_view s) {
  std::string out;
  std::string line;
  bool pending = false;
  auto flush = [&] {
    if (!line.empty()) {
      if (!out.empty()) out.push_back('\n');
      out += line;
    }
    line.clear();
    pending = false;
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '\n') {
      flush();
    } else if (is_space(c) || (c == '\xC2' && i + 1 < s.size() && s[i + 1] == '\xA0')) {
      if (c == '\xC2') ++i;
      pending = !line.empty();
    } else {
      if (pending) line.push_back(' ');
      pending = false;
      line.push_back(c);
    }
  }
  flush();
  return out;
}

}  // namespace

std::string extract_web_text(std::string_view html) {
  std::string text = has_markup(html) ? Extractor(html).run() : plain_text(html);
  if (text.empty()) throw Error(ErrorCode::EmptyDocument, "no visible text");
  return text;
}

}  // namespace cer::ingest
