#include "uqkit/toml.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "uqkit/errors.hpp"
#include "uqkit/types.hpp"

namespace uq {

namespace {

bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-';
}

class Parser {
 public:
  Parser(const std::string& text, std::string source) : source_(std::move(source)) {
    std::istringstream stream(text);
    std::string line;
    while (std::getline(stream, line)) {
      if (!line.empty() && line.back() == '\r') {
        line.pop_back();
      }
      lines_.push_back(line);
    }
    root_ = nlohmann::json::object();
  }

  nlohmann::json parse() {
    current_ = &root_;
    for (line_number_ = 1; line_number_ <= lines_.size(); ++line_number_) {
      line_ = lines_[line_number_ - 1];
      pos_ = 0;
      skip_whitespace();
      if (at_end() || peek() == '#') {
        continue;
      }
      if (peek() == '[') {
        parse_header();
      } else {
        parse_key_value(*current_);
      }
      skip_whitespace();
      if (!at_end() && peek() != '#') {
        fail("unexpected trailing characters");
      }
    }
    return std::move(root_);
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError(source_ + ":" + std::to_string(line_number_) + ": " + message);
  }

  bool at_end() const { return pos_ >= line_.size(); }
  char peek() const { return line_[pos_]; }
  char take() { return line_[pos_++]; }

  void skip_whitespace() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) {
      ++pos_;
    }
  }

  void expect(char c, const std::string& what) {
    if (at_end() || peek() != c) {
      fail("expected " + what);
    }
    ++pos_;
  }

  std::string parse_basic_string() {
    expect('"', "'\"'");
    std::string out;
    while (true) {
      if (at_end()) {
        fail("unterminated string");
      }
      const char c = take();
      if (c == '"') {
        return out;
      }
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (at_end()) {
        fail("dangling escape at end of line");
      }
      const char escape = take();
      switch (escape) {
        case '"':
          out.push_back('"');
          break;
        case '\\':
          out.push_back('\\');
          break;
        case 'n':
          out.push_back('\n');
          break;
        case 't':
          out.push_back('\t');
          break;
        case 'r':
          out.push_back('\r');
          break;
        default:
          fail(std::string("unsupported escape '\\") + escape + "'");
      }
    }
  }

  std::string parse_literal_string() {
    expect('\'', "'''");
    std::string out;
    while (true) {
      if (at_end()) {
        fail("unterminated string");
      }
      const char c = take();
      if (c == '\'') {
        return out;
      }
      out.push_back(c);
    }
  }

  std::string parse_key_segment() {
    if (at_end()) {
      fail("expected a key");
    }
    if (peek() == '"') {
      return parse_basic_string();
    }
    if (peek() == '\'') {
      return parse_literal_string();
    }
    std::string key;
    while (!at_end() && is_bare_key_char(peek())) {
      key.push_back(take());
    }
    if (key.empty()) {
      fail("expected a key");
    }
    return key;
  }

  // key or key.subkey.subsubkey
  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path;
    path.push_back(parse_key_segment());
    skip_whitespace();
    while (!at_end() && peek() == '.') {
      ++pos_;
      skip_whitespace();
      path.push_back(parse_key_segment());
      skip_whitespace();
    }
    return path;
  }

  // Walks to (creating when needed) the table addressed by path, stepping
  // into the last element of any array-of-tables along the way.
  nlohmann::json* navigate(nlohmann::json* table, const std::vector<std::string>& path,
                           std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      nlohmann::json& slot = (*table)[path[i]];
      if (slot.is_null()) {
        slot = nlohmann::json::object();
      }
      if (slot.is_array()) {
        if (slot.empty() || !slot.back().is_object()) {
          fail("'" + path[i] + "' is not a table");
        }
        table = &slot.back();
      } else if (slot.is_object()) {
        table = &slot;
      } else {
        fail("'" + path[i] + "' is already a value, not a table");
      }
    }
    return table;
  }

  void parse_header() {
    expect('[', "'['");
    const bool is_array = !at_end() && peek() == '[';
    if (is_array) {
      ++pos_;
    }
    skip_whitespace();
    const std::vector<std::string> path = parse_key_path();
    skip_whitespace();
    expect(']', "']'");
    if (is_array) {
      expect(']', "']]'");
    }

    nlohmann::json* parent = navigate(&root_, path, path.size() - 1);
    const std::string& leaf = path.back();
    nlohmann::json& slot = (*parent)[leaf];
    if (is_array) {
      if (slot.is_null()) {
        slot = nlohmann::json::array();
      }
      if (!slot.is_array()) {
        fail("'" + leaf + "' is already defined and is not an array of tables");
      }
      slot.push_back(nlohmann::json::object());
      current_ = &slot.back();
      return;
    }

    std::string joined;
    for (const std::string& segment : path) {
      joined += (joined.empty() ? "" : ".") + segment;
    }
    if (!header_seen_.insert(joined).second) {
      fail("table [" + joined + "] defined twice");
    }
    if (slot.is_null()) {
      slot = nlohmann::json::object();
    }
    if (!slot.is_object()) {
      fail("'" + leaf + "' is already a value, not a table");
    }
    current_ = &slot;
  }

  void parse_key_value(nlohmann::json& table) {
    const std::vector<std::string> path = parse_key_path();
    skip_whitespace();
    expect('=', "'='");
    skip_whitespace();
    nlohmann::json value = parse_value();

    nlohmann::json* parent = navigate(&table, path, path.size() - 1);
    const std::string& leaf = path.back();
    if (parent->contains(leaf)) {
      fail("duplicate key '" + leaf + "'");
    }
    (*parent)[leaf] = std::move(value);
  }

  nlohmann::json parse_value() {
    if (at_end()) {
      fail("expected a value");
    }
    const char c = peek();
    if (c == '"') {
      return parse_basic_string();
    }
    if (c == '\'') {
      return parse_literal_string();
    }
    if (c == '[') {
      return parse_array();
    }
    return parse_scalar();
  }

  nlohmann::json parse_array() {
    expect('[', "'['");
    nlohmann::json array = nlohmann::json::array();
    skip_whitespace();
    while (true) {
      if (at_end()) {
        fail("unterminated array (arrays must fit on one line)");
      }
      if (peek() == ']') {
        ++pos_;
        return array;
      }
      array.push_back(parse_value());
      skip_whitespace();
      if (!at_end() && peek() == ',') {
        ++pos_;
        skip_whitespace();
        continue;
      }
      if (!at_end() && peek() == ']') {
        continue;
      }
      fail("expected ',' or ']' in array");
    }
  }

  nlohmann::json parse_scalar() {
    std::string token;
    while (!at_end() && peek() != ' ' && peek() != '\t' && peek() != ',' && peek() != ']' &&
           peek() != '#') {
      token.push_back(take());
    }
    if (token == "true") {
      return true;
    }
    if (token == "false") {
      return false;
    }

    std::string digits;
    for (const char d : token) {
      if (d != '_') {
        digits.push_back(d);
      }
    }
    if (digits.empty()) {
      fail("expected a value");
    }

    const bool looks_integer =
        digits.find_first_not_of("0123456789+-") == std::string::npos;
    try {
      std::size_t consumed = 0;
      if (looks_integer) {
        const long long integer = std::stoll(digits, &consumed);
        if (consumed == digits.size()) {
          return integer;
        }
      } else {
        const double real = std::stod(digits, &consumed);
        if (consumed == digits.size()) {
          return real;
        }
      }
    } catch (const std::exception&) {
      // falls through to the error below
    }
    fail("cannot parse value '" + token + "'");
  }

  std::string source_;
  std::vector<std::string> lines_;
  std::string line_;
  std::size_t line_number_ = 0;
  std::size_t pos_ = 0;
  nlohmann::json root_;
  nlohmann::json* current_ = nullptr;
  std::set<std::string> header_seen_;
};

}  // namespace

nlohmann::json parse_toml(const std::string& text, const std::string& source_name) {
  return Parser(text, source_name).parse();
}

nlohmann::json parse_toml_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_toml(buffer.str(), path);
}

}  // namespace uq
