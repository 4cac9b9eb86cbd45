#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "uqkit/errors.hpp"
#include "uqkit/toml.hpp"

using namespace uq;

namespace {

// Returns the ConfigError message for a snippet expected to be rejected.
std::string parse_error(const std::string& text) {
  try {
    parse_toml(text);
  } catch (const ConfigError& error) {
    return error.what();
  }
  FAIL("expected ConfigError");
  return "";
}

}  // namespace

TEST_CASE("top level key values parse into a json object") {
  const auto doc = parse_toml(R"(
name = "uq"
count = 3
ratio = 0.25
enabled = true
disabled = false
)");
  CHECK(doc["name"] == "uq");
  CHECK(doc["count"] == 3);
  CHECK(doc["count"].is_number_integer());
  CHECK(doc["ratio"] == 0.25);
  CHECK(doc["enabled"] == true);
  CHECK(doc["disabled"] == false);
}

TEST_CASE("tables and nested table headers") {
  const auto doc = parse_toml(R"(
[backend]
kind = "mock"

[backend.mock]
fixture_file = "chat.json"

[output]
format = "jsonl"
)");
  CHECK(doc["backend"]["kind"] == "mock");
  CHECK(doc["backend"]["mock"]["fixture_file"] == "chat.json");
  CHECK(doc["output"]["format"] == "jsonl");
}

TEST_CASE("array of tables headers append objects") {
  const auto doc = parse_toml(R"(
[[judge]]
id = "strict"
template = "binary"

[[judge]]
id = "lenient"
)");
  REQUIRE(doc["judge"].is_array());
  REQUIRE(doc["judge"].size() == 2);
  CHECK(doc["judge"][0]["id"] == "strict");
  CHECK(doc["judge"][0]["template"] == "binary");
  CHECK(doc["judge"][1]["id"] == "lenient");
  CHECK_FALSE(doc["judge"][1].contains("template"));
}

TEST_CASE("dotted keys create nested objects") {
  const auto doc = parse_toml(R"(
ensemble.weights.exact_match = 0.5
ensemble.weights.self_judge = 0.5
ensemble.threshold = 0.4
)");
  CHECK(doc["ensemble"]["weights"]["exact_match"] == 0.5);
  CHECK(doc["ensemble"]["weights"]["self_judge"] == 0.5);
  CHECK(doc["ensemble"]["threshold"] == 0.4);
}

TEST_CASE("dotted keys under a table header nest relative to the table") {
  const auto doc = parse_toml(R"(
[run]
sampling.original = 0.0
sampling.candidates = 1.0
)");
  CHECK(doc["run"]["sampling"]["original"] == 0.0);
  CHECK(doc["run"]["sampling"]["candidates"] == 1.0);
}

TEST_CASE("basic strings support the escape set") {
  const auto doc = parse_toml(R"(quoted = "a \"b\" \\ c\nd\te\rf")");
  CHECK(doc["quoted"] == "a \"b\" \\ c\nd\te\rf");
}

TEST_CASE("literal strings keep backslashes verbatim") {
  const auto doc = parse_toml(R"(path = 'C:\nope\raw')");
  CHECK(doc["path"] == "C:\\nope\\raw");
}

TEST_CASE("quoted keys allow spaces and dots") {
  const auto doc = parse_toml(R"(
"key with space" = 1
'dotted.key' = 2
)");
  CHECK(doc["key with space"] == 1);
  CHECK(doc["dotted.key"] == 2);
}

TEST_CASE("integer underscores are cosmetic") {
  const auto doc = parse_toml("big = 1_000_000\nneg = -2_5");
  CHECK(doc["big"] == 1000000);
  CHECK(doc["neg"] == -25);
}

TEST_CASE("floats parse with exponents and signs") {
  const auto doc = parse_toml("a = 1e3\nb = -0.5\nc = 2.5e-2");
  CHECK(doc["a"] == 1000.0);
  CHECK(doc["a"].is_number_float());
  CHECK(doc["b"] == -0.5);
  CHECK(doc["c"] == 0.025);
}

TEST_CASE("single line arrays with mixed values and trailing comma") {
  const auto doc = parse_toml(R"(
scorers = ["exact_match", "noncontradiction",]
steps = [1, 2, 3]
empty = []
)");
  CHECK(doc["scorers"] == nlohmann::json::array({"exact_match", "noncontradiction"}));
  CHECK(doc["steps"] == nlohmann::json::array({1, 2, 3}));
  CHECK(doc["empty"].empty());
}

TEST_CASE("comments and blank lines are ignored") {
  const auto doc = parse_toml(R"(
# leading comment
name = "x"  # trailing comment

   # indented comment
count = 2
)");
  CHECK(doc.size() == 2);
  CHECK(doc["name"] == "x");
  CHECK(doc["count"] == 2);
}

TEST_CASE("crlf line endings are tolerated") {
  const auto doc = parse_toml("a = 1\r\nb = 2\r\n");
  CHECK(doc["a"] == 1);
  CHECK(doc["b"] == 2);
}

TEST_CASE("duplicate keys are rejected with the line number") {
  const std::string message = parse_error("a = 1\na = 2");
  CHECK(message.find("<toml>:2:") != std::string::npos);
  CHECK(message.find("duplicate key 'a'") != std::string::npos);
}

TEST_CASE("repeating a table header is rejected") {
  const std::string message = parse_error("[x]\na = 1\n[x]\nb = 2");
  CHECK(message.find(":3:") != std::string::npos);
  CHECK(message.find("defined twice") != std::string::npos);
}

TEST_CASE("array of tables headers may repeat freely") {
  CHECK_NOTHROW(parse_toml("[[x]]\na = 1\n[[x]]\na = 2"));
}

TEST_CASE("redefining a value as a table is rejected") {
  const std::string message = parse_error("a = 1\n[a]\nb = 2");
  CHECK(message.find("already a value") != std::string::npos);
}

TEST_CASE("unparseable scalars are rejected") {
  const std::string message = parse_error("a = nonsense");
  CHECK(message.find("cannot parse value 'nonsense'") != std::string::npos);
}

TEST_CASE("unterminated strings are rejected") {
  CHECK(parse_error("a = \"oops").find("unterminated string") != std::string::npos);
  CHECK(parse_error("a = 'oops").find("unterminated string") != std::string::npos);
}

TEST_CASE("unsupported escapes are rejected") {
  const std::string message = parse_error(R"(a = "\q")");
  CHECK(message.find("unsupported escape") != std::string::npos);
}

TEST_CASE("arrays must close on the same line") {
  CHECK(parse_error("a = [1,").find("unterminated array") != std::string::npos);
  CHECK(parse_error("a = [1, 2").find("expected ',' or ']'") != std::string::npos);
}

TEST_CASE("trailing garbage after a value is rejected") {
  const std::string message = parse_error("a = 1 stray");
  CHECK(message.find("unexpected trailing characters") != std::string::npos);
}

TEST_CASE("missing equals sign is rejected") {
  const std::string message = parse_error("just_a_key");
  CHECK(message.find("expected '='") != std::string::npos);
}

TEST_CASE("custom source name appears in errors") {
  try {
    parse_toml("a =", "run.toml");
    FAIL("expected ConfigError");
  } catch (const ConfigError& error) {
    CHECK(std::string(error.what()).find("run.toml:1:") != std::string::npos);
  }
}

TEST_CASE("parse_toml_file reads from disk and reports the path") {
  const auto path = std::filesystem::temp_directory_path() / "uq_test_config.toml";
  {
    std::ofstream out(path);
    out << "[backend]\nkind = \"mock\"\n";
  }
  const auto doc = parse_toml_file(path.string());
  CHECK(doc["backend"]["kind"] == "mock");
  std::remove(path.string().c_str());

  CHECK_THROWS_AS(parse_toml_file("/nonexistent/uq/config.toml"), ConfigError);
}
