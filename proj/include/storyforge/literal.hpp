#pragma once

// Lenient reader for the Python-literal fragments language models return:
// dicts, lists, tuples, quoted strings in either style, numbers, booleans and
// bare identifiers (read as strings, so "[a, b]" parses). Trailing commas are
// accepted.

#include <cctype>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "storyforge/core.hpp"

namespace storyforge {

using ordered_json = nlohmann::ordered_json;

namespace detail {

class LiteralReader {
 public:
  explicit LiteralReader(std::string_view text, std::size_t pos = 0)
      : text_(text), pos_(pos) {}

  ordered_json value() {
    skip_ws();
    if (eof()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '{') return dict();
    if (c == '[') return sequence('[', ']');
    if (c == '(') return sequence('(', ')');
    if (c == '\'' || c == '"') return ordered_json(string());
    if (c == '-' || c == '+' || std::isdigit(static_cast<unsigned char>(c))) return number();
    return bare();
  }

  std::size_t pos() const { return pos_; }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(Errc::BadFormat, what + " at offset " + std::to_string(pos_));
  }

  bool eof() const { return pos_ >= text_.size(); }

  void skip_ws() {
    while (!eof() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    skip_ws();
    if (eof() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  ordered_json dict() {
    expect('{');
    ordered_json out = ordered_json::object();
    for (;;) {
      skip_ws();
      if (eof()) fail("unterminated dict");
      if (text_[pos_] == '}') {
        ++pos_;
        return out;
      }
      ordered_json key = value();
      std::string k = key.is_string() ? key.get<std::string>() : key.dump();
      expect(':');
      out[k] = value();
      skip_ws();
      if (!eof() && text_[pos_] == ',') ++pos_;
      else if (eof() || text_[pos_] != '}') fail("expected ',' or '}'");
    }
  }

  ordered_json sequence(char open, char close) {
    expect(open);
    ordered_json out = ordered_json::array();
    for (;;) {
      skip_ws();
      if (eof()) fail("unterminated sequence");
      if (text_[pos_] == close) {
        ++pos_;
        return out;
      }
      out.push_back(value());
      skip_ws();
      if (!eof() && text_[pos_] == ',') ++pos_;
      else if (eof() || text_[pos_] != close) fail("expected ',' or closing bracket");
    }
  }

  std::string string() {
    const char quote = text_[pos_++];
    std::string out;
    while (!eof() && text_[pos_] != quote) {
      char c = text_[pos_++];
      if (c == '\\' && !eof()) {
        const char e = text_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          default: out += e; break;  // \' \" \\ and LaTeX-style \#
        }
        continue;
      }
      out += c;
    }
    if (eof()) fail("unterminated string");
    ++pos_;
    return out;
  }

  ordered_json number() {
    const std::size_t start = pos_;
    if (text_[pos_] == '-' || text_[pos_] == '+') ++pos_;
    bool is_float = false;
    while (!eof()) {
      const char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '.' || c == 'e' || c == 'E') {
        is_float = true;
        ++pos_;
      } else {
        break;
      }
    }
    const std::string tok(text_.substr(start, pos_ - start));
    try {
      if (is_float) return ordered_json(std::stod(tok));
      return ordered_json(std::stoll(tok));
    } catch (const std::exception&) {
      fail("bad number '" + tok + "'");
    }
  }

  ordered_json bare() {
    const std::size_t start = pos_;
    while (!eof()) {
      const char c = text_[pos_];
      if (c == ',' || c == ':' || c == ']' || c == '}' || c == ')' || c == '[' ||
          c == '{' || c == '(' || std::isspace(static_cast<unsigned char>(c))) {
        break;
      }
      ++pos_;
    }
    if (pos_ == start) fail("unexpected character");
    const std::string tok(text_.substr(start, pos_ - start));
    if (tok == "True" || tok == "true") return true;
    if (tok == "False" || tok == "false") return false;
    if (tok == "None" || tok == "null") return nullptr;
    return tok;
  }

  std::string_view text_;
  std::size_t pos_;
};

}  // namespace detail

/// Parse one literal starting exactly at `text` (leading whitespace allowed).
inline ordered_json parse_python_literal(std::string_view text) {
  detail::LiteralReader reader(text);
  return reader.value();
}

/// Find the first position holding `open` from which a complete literal
/// parses, and return it. Prose around the literal is ignored.
inline std::optional<ordered_json> find_python_literal(std::string_view text, char open) {
  for (std::size_t at = text.find(open); at != std::string_view::npos;
       at = text.find(open, at + 1)) {
    try {
      detail::LiteralReader reader(text, at);
      return reader.value();
    } catch (const Error&) {
    }
  }
  return std::nullopt;
}

}  // namespace storyforge
