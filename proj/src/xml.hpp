#pragma once

// Minimal non-validating XML reader: elements, attributes, text, CDATA,
// comments, processing instructions and DOCTYPE. Enough for efetch payloads.

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace cer::xml {

struct Node {
  std::string name;  // empty for text nodes
  std::string text;  // text nodes only
  std::map<std::string, std::string> attrs;
  std::vector<Node> children;

  bool is_text() const { return name.empty(); }
  const Node* child(std::string_view n) const;
  std::vector<const Node*> children_named(std::string_view n) const;
  std::string text_content() const;
  std::string attr(std::string_view key) const;
};

/// Throws Error{ParseError} on malformed or truncated input.
Node parse(std::string_view doc);

}  // namespace cer::xml
