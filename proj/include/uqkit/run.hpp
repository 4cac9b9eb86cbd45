#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqkit/cache.hpp"
#include "uqkit/dataset.hpp"
#include "uqkit/ensemble.hpp"
#include "uqkit/http_backend.hpp"
#include "uqkit/types.hpp"

namespace uq {

enum class RunMode { kBlackbox, kWhitebox, kPanel, kEnsemble, kTune };

RunMode parse_run_mode(const std::string& name);  // ConfigError
std::string run_mode_name(RunMode mode);

struct JudgeConfig {
  std::string id;
  std::string template_name = "continuous";
  std::string prompt_file;  // optional wording override
  double temperature = 0.0;
};

struct MockSettings {
  std::string fixture_file;      // chat fixtures; optional
  std::string entailment_file;   // entailment fixtures; optional
  int embedding_dimension = 32;
  bool logprobs = true;
  std::vector<std::string> default_replies;  // fallback for unlisted prompts
};

// Full description of a run. Loaded from TOML; CLI flags override single
// fields afterwards (flags > config > defaults).
struct RunConfig {
  RunMode mode = RunMode::kBlackbox;

  std::string backend_kind = "mock";  // "mock" | "openai"
  MockSettings mock;
  HttpSettings http = HttpSettings::from_env();

  CacheMode cache_mode = CacheMode::kLive;
  std::string cache_file;

  std::vector<std::string> scorers;  // empty: mode default set
  int num_responses = 5;
  double original_temperature = 0.0;
  double candidate_temperature = 1.0;
  bool use_best = false;
  std::optional<std::uint64_t> seed;  // required for record/replay
  int max_in_flight = 4;

  std::vector<JudgeConfig> judges;

  std::vector<std::string> ensemble_components;  // empty: the default trio
  std::map<std::string, double> ensemble_weights;  // explicit weights, optional
  std::string weights_file;  // pre-tuned weights to load, optional
  std::string grader = "exact_match";  // "exact_match" | "judge"
  std::string objective = "roc_auc";
  SearchConfig search;

  std::string out_path;
  std::string weights_out;

  // Mode-specific requirements; throws ConfigError. Called after overrides.
  void validate() const;
};

// Parses the run TOML (see README for the schema).
RunConfig load_run_config(const std::string& path);

struct ResultRecord {
  std::string id;
  std::string response;
  ScoreVector scores;
  std::optional<double> ensemble_score;
  std::optional<nlohmann::json> panel;  // verdict detail, panel mode only
  std::optional<std::string> error;

  // Exactly one of scores/error is populated; every score is checked
  // against [0,1] at this boundary.
  nlohmann::json to_json() const;
  static ResultRecord from_json(const nlohmann::json& object);
};

struct RunOutput {
  std::vector<ResultRecord> records;  // dataset order
  nlohmann::json summary;
  std::optional<TuneResult> tuned;  // tune mode only
};

// Executes the configured mode over the dataset. Per-prompt failures land
// in the matching ResultRecord; configuration and capability errors throw
// before any generation.
RunOutput run(const RunConfig& config, const std::vector<PromptRecord>& dataset);

// Writes results as JSONL (one record per line) or CSV (fixed columns: id,
// response, the sorted union of score names, ensemble_score, error; absent
// fields stay empty). Empty results are an error and create no file.
void emit_report(const std::vector<ResultRecord>& records, const std::string& format,
                 const std::string& path);

// Reads back a JSONL report, validating each record.
std::vector<ResultRecord> load_results(const std::string& path);

}  // namespace uq
