#include "xml.hpp"

#include <cctype>

#include "cer/core.hpp"

namespace cer::xml {

const Node* Node::child(std::string_view n) const {
  for (const auto& c : children)
    if (c.name == n) return &c;
  return nullptr;
}

std::vector<const Node*> Node::children_named(std::string_view n) const {
  std::vector<const Node*> out;
  for (const auto& c : children)
    if (c.name == n) out.push_back(&c);
  return out;
}

std::string Node::text_content() const {
  if (is_text()) return text;
  std::string out;
  for (const auto& c : children) out += c.text_content();
  return out;
}

std::string Node::attr(std::string_view key) const {
  const auto it = attrs.find(std::string(key));
  return it == attrs.end() ? std::string() : it->second;
}

namespace {

[[noreturn]] void fail(const std::string& what, std::size_t pos) {
  throw Error(ErrorCode::ParseError, "xml: " + what + " at offset " + std::to_string(pos));
}

void append_utf8(std::string& out, unsigned long cp) {
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

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  Node document() {
    skip_misc();
    if (pos_ >= s_.size() || s_[pos_] != '<') fail("expected root element", pos_);
    Node root = element();
    skip_misc();
    if (pos_ != s_.size()) fail("content after root element", pos_);
    return root;
  }

 private:
  bool starts(std::string_view p) const { return s_.substr(pos_).starts_with(p); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  void skip_past(std::string_view terminator) {
    const auto end = s_.find(terminator, pos_);
    if (end == std::string_view::npos) fail("unterminated construct", pos_);
    pos_ = end + terminator.size();
  }

  void skip_misc() {
    while (true) {
      skip_ws();
      if (starts("<?")) {
        skip_past("?>");
      } else if (starts("<!--")) {
        skip_past("-->");
      } else if (starts("<!DOCTYPE")) {
        int depth = 0;
        while (pos_ < s_.size()) {
          const char c = s_[pos_++];
          if (c == '[') ++depth;
          if (c == ']') --depth;
          if (c == '>' && depth == 0) break;
        }
        if (pos_ >= s_.size()) fail("unterminated DOCTYPE", pos_);
      } else {
        return;
      }
    }
  }

  std::string name() {
    const std::size_t b = pos_;
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' || c == '-' || c == '.' ||
          static_cast<unsigned char>(c) >= 0x80)
        ++pos_;
      else
        break;
    }
    if (pos_ == b) fail("expected name", pos_);
    return std::string(s_.substr(b, pos_ - b));
  }

  std::string decode(std::string_view raw, std::size_t at) {
    std::string out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        out.push_back(raw[i]);
        continue;
      }
      const auto semi = raw.find(';', i);
      if (semi == std::string_view::npos) fail("unterminated entity", at + i);
      const std::string_view ent = raw.substr(i + 1, semi - i - 1);
      if (ent == "amp") out.push_back('&');
      else if (ent == "lt") out.push_back('<');
      else if (ent == "gt") out.push_back('>');
      else if (ent == "quot") out.push_back('"');
      else if (ent == "apos") out.push_back('\'');
      else if (ent.size() > 1 && ent[0] == '#') {
        const bool hex = ent[1] == 'x' || ent[1] == 'X';
        try {
          append_utf8(out, std::stoul(std::string(ent.substr(hex ? 2 : 1)), nullptr, hex ? 16 : 10));
        } catch (const std::exception&) {
          fail("bad character reference", at + i);
        }
      } else {
        fail("unknown entity &" + std::string(ent) + ";", at + i);
      }
      i = semi;
    }
    return out;
  }

  Node element() {
    ++pos_;  // '<'
    Node node;
    node.name = name();
    while (true) {
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated start tag", pos_);
      if (starts("/>")) {
        pos_ += 2;
        return node;
      }
      if (s_[pos_] == '>') {
        ++pos_;
        break;
      }
      std::string key = name();
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != '=') fail("expected '='", pos_);
      ++pos_;
      skip_ws();
      if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\'')) fail("expected quoted value", pos_);
      const char q = s_[pos_++];
      const auto end = s_.find(q, pos_);
      if (end == std::string_view::npos) fail("unterminated attribute", pos_);
      node.attrs[key] = decode(s_.substr(pos_, end - pos_), pos_);
      pos_ = end + 1;
    }

    while (true) {
      if (pos_ >= s_.size()) fail("missing </" + node.name + ">", pos_);
      if (starts("</")) {
        pos_ += 2;
        const std::string closing = name();
        if (closing != node.name) fail("mismatched </" + closing + "> for <" + node.name + ">", pos_);
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != '>') fail("unterminated end tag", pos_);
        ++pos_;
        return node;
      }
      if (starts("<!--")) {
        skip_past("-->");
      } else if (starts("<![CDATA[")) {
        pos_ += 9;
        const auto end = s_.find("]]>", pos_);
        if (end == std::string_view::npos) fail("unterminated CDATA", pos_);
        add_text(node, std::string(s_.substr(pos_, end - pos_)));
        pos_ = end + 3;
      } else if (starts("<?")) {
        skip_past("?>");
      } else if (s_[pos_] == '<') {
        node.children.push_back(element());
      } else {
        const auto end = s_.find('<', pos_);
        const std::size_t stop = end == std::string_view::npos ? s_.size() : end;
        add_text(node, decode(s_.substr(pos_, stop - pos_), pos_));
        pos_ = stop;
      }
    }
  }

  static void add_text(Node& node, std::string text) {
    if (!node.children.empty() && node.children.back().is_text()) {
      node.children.back().text += text;
    } else {
      Node t;
      t.text = std::move(text);
      node.children.push_back(std::move(t));
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Node parse(std::string_view doc) { return Parser(doc).document(); }

}  // namespace cer::xml
