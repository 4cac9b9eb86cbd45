#include "uqkit/dataset.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "uqkit/errors.hpp"
#include "uqkit/types.hpp"

namespace uq {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& message) {
  throw DatasetError(path + ":" + std::to_string(line) + ": " + message);
}

}  // namespace

std::vector<PromptRecord> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DatasetError("cannot open dataset '" + path + "'");
  }

  std::vector<PromptRecord> records;
  std::map<std::string, std::size_t> first_line_of_id;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) {
      continue;
    }
    json object;
    try {
      object = json::parse(line);
    } catch (const json::exception& error) {
      fail(path, line_number, std::string("malformed JSON: ") + error.what());
    }
    if (!object.is_object()) {
      fail(path, line_number, "each line must hold a JSON object");
    }
    if (!object.contains("id") || !object["id"].is_string()) {
      fail(path, line_number, "missing string field \"id\"");
    }
    if (!object.contains("prompt") || !object["prompt"].is_string()) {
      fail(path, line_number, "missing string field \"prompt\"");
    }

    PromptRecord record;
    record.id = object["id"].get<std::string>();
    record.prompt = object["prompt"].get<std::string>();
    if (trim(record.id).empty()) {
      fail(path, line_number, "\"id\" must be non-empty");
    }
    if (trim(record.prompt).empty()) {
      fail(path, line_number, "\"prompt\" must be non-empty");
    }
    if (object.contains("ideal") && !object["ideal"].is_null()) {
      if (!object["ideal"].is_string()) {
        fail(path, line_number, "\"ideal\" must be a string when present");
      }
      record.ideal = object["ideal"].get<std::string>();
    }

    const auto [it, inserted] = first_line_of_id.emplace(record.id, line_number);
    if (!inserted) {
      std::ostringstream message;
      message << "duplicate id \"" << record.id << "\" on lines " << it->second << " and "
              << line_number;
      throw DatasetError(path + ": " + message.str());
    }
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace uq
