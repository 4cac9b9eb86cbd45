#pragma once

#include <optional>
#include <string>
#include <vector>

namespace uq {

struct PromptRecord {
  std::string id;
  std::string prompt;
  std::optional<std::string> ideal;
};

// Loads a JSONL dataset of {"id", "prompt", "ideal"?} objects, in file
// order. Blank lines are skipped. Malformed lines and duplicate ids raise
// DatasetError naming the offending line numbers.
std::vector<PromptRecord> load_dataset(const std::string& path);

}  // namespace uq
