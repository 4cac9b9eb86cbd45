#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace uq {

// Minimal TOML reader covering what run configs use: comments, bare and
// quoted keys, dotted keys, [table] and [[array-of-tables]] headers, basic
// and literal strings, integers, floats, booleans, and single-line arrays.
// Multiline strings, inline tables and datetimes are rejected. The result
// is a JSON document with the same shape (array-of-tables become arrays of
// objects). Errors are ConfigError carrying "<source>:<line>: ...".
nlohmann::json parse_toml(const std::string& text, const std::string& source_name = "<toml>");

nlohmann::json parse_toml_file(const std::string& path);

}  // namespace uq
