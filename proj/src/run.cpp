#include "uqkit/run.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "uqkit/blackbox.hpp"
#include "uqkit/judge.hpp"
#include "uqkit/mock_backend.hpp"
#include "uqkit/toml.hpp"
#include "uqkit/whitebox.hpp"

namespace uq {

namespace {

using nlohmann::json;

RunMode mode_from_or_throw(const std::string& name) { return parse_run_mode(name); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open file '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

[[noreturn]] void bad_key(const std::string& key, const std::string& expected) {
  throw ConfigError("config key '" + key + "' must be " + expected);
}

void read_field(const json& table, const std::string& key, std::string& out) {
  if (!table.contains(key) || table[key].is_null()) {
    return;
  }
  if (!table[key].is_string()) {
    bad_key(key, "a string");
  }
  out = table[key].get<std::string>();
}

void read_field(const json& table, const std::string& key, bool& out) {
  if (!table.contains(key) || table[key].is_null()) {
    return;
  }
  if (!table[key].is_boolean()) {
    bad_key(key, "a boolean");
  }
  out = table[key].get<bool>();
}

void read_field(const json& table, const std::string& key, int& out) {
  if (!table.contains(key) || table[key].is_null()) {
    return;
  }
  if (!table[key].is_number_integer()) {
    bad_key(key, "an integer");
  }
  out = table[key].get<int>();
}

void read_field(const json& table, const std::string& key, double& out) {
  if (!table.contains(key) || table[key].is_null()) {
    return;
  }
  if (!table[key].is_number()) {
    bad_key(key, "a number");
  }
  out = table[key].get<double>();
}

void read_field(const json& table, const std::string& key, std::vector<std::string>& out) {
  if (!table.contains(key) || table[key].is_null()) {
    return;
  }
  if (!table[key].is_array()) {
    bad_key(key, "an array of strings");
  }
  std::vector<std::string> values;
  for (const json& item : table[key]) {
    if (!item.is_string()) {
      bad_key(key, "an array of strings");
    }
    values.push_back(item.get<std::string>());
  }
  out = std::move(values);
}

void read_field(const json& table, const std::string& key, std::optional<std::uint64_t>& out) {
  if (!table.contains(key) || table[key].is_null()) {
    return;
  }
  if (!table[key].is_number_integer() || table[key].get<std::int64_t>() < 0) {
    bad_key(key, "a nonnegative integer");
  }
  out = table[key].get<std::uint64_t>();
}

// Paths inside the config resolve against the config file's directory so a
// run is reproducible from any working directory.
std::string resolve_path(const std::filesystem::path& base_dir, const std::string& path) {
  if (path.empty()) {
    return path;
  }
  const std::filesystem::path p(path);
  return p.is_absolute() ? p.string() : (base_dir / p).string();
}

}  // namespace

RunMode parse_run_mode(const std::string& name) {
  if (name == "blackbox") {
    return RunMode::kBlackbox;
  }
  if (name == "whitebox") {
    return RunMode::kWhitebox;
  }
  if (name == "panel") {
    return RunMode::kPanel;
  }
  if (name == "ensemble") {
    return RunMode::kEnsemble;
  }
  if (name == "tune") {
    return RunMode::kTune;
  }
  throw ConfigError("unknown mode '" + name +
                    "'; valid modes are: blackbox whitebox panel ensemble tune");
}

std::string run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::kBlackbox:
      return "blackbox";
    case RunMode::kWhitebox:
      return "whitebox";
    case RunMode::kPanel:
      return "panel";
    case RunMode::kEnsemble:
      return "ensemble";
    case RunMode::kTune:
      return "tune";
  }
  throw Error("unreachable run mode");
}

void RunConfig::validate() const {
  if (backend_kind != "mock" && backend_kind != "openai") {
    throw ConfigError("backend kind must be \"mock\" or \"openai\", got \"" + backend_kind +
                      "\"");
  }
  if (num_responses < 1) {
    throw ConfigError("num_responses must be at least 1");
  }
  if (max_in_flight < 1) {
    throw ConfigError("max_in_flight must be at least 1");
  }
  if (original_temperature < 0.0 || candidate_temperature < 0.0) {
    throw ConfigError("temperatures must be nonnegative");
  }
  if (cache_mode != CacheMode::kLive) {
    if (cache_file.empty()) {
      throw ConfigError("cache mode \"" + cache_mode_name(cache_mode) +
                        "\" needs a cache_file");
    }
    if (!seed.has_value()) {
      throw ConfigError("cache mode \"" + cache_mode_name(cache_mode) + "\" needs a seed");
    }
  }
  if (mode == RunMode::kPanel && judges.empty()) {
    throw ConfigError("panel mode needs at least one [[judge]] entry");
  }
  if (mode == RunMode::kTune && weights_out.empty()) {
    throw ConfigError("tune mode needs a weights output path (--weights-out)");
  }
  if (grader != "exact_match" && grader != "judge") {
    throw ConfigError("grader must be \"exact_match\" or \"judge\", got \"" + grader + "\"");
  }
  Objective::from_name(objective);
  for (const JudgeConfig& judge : judges) {
    if (trim(judge.id).empty()) {
      throw ConfigError("every [[judge]] entry needs an id");
    }
    ScoringTemplate::from_name(judge.template_name);
    if (judge.temperature < 0.0) {
      throw ConfigError("judge temperatures must be nonnegative");
    }
  }
  if (backend_kind == "openai" && http.base_url.empty()) {
    throw ConfigError("openai backend needs base_url (config) or UQ_API_BASE (env)");
  }
}

RunConfig load_run_config(const std::string& path) {
  const json document = parse_toml_file(path);
  const std::filesystem::path base_dir = std::filesystem::path(path).parent_path();
  RunConfig config;

  std::string mode_name = run_mode_name(config.mode);
  read_field(document, "mode", mode_name);
  config.mode = mode_from_or_throw(mode_name);

  read_field(document, "seed", config.seed);
  read_field(document, "scorers", config.scorers);
  read_field(document, "num_responses", config.num_responses);
  read_field(document, "original_temperature", config.original_temperature);
  read_field(document, "candidate_temperature", config.candidate_temperature);
  read_field(document, "use_best", config.use_best);
  read_field(document, "max_in_flight", config.max_in_flight);

  if (document.contains("backend")) {
    const json& backend = document["backend"];
    if (!backend.is_object()) {
      bad_key("backend", "a table");
    }
    read_field(backend, "kind", config.backend_kind);
    std::string cache_name = cache_mode_name(config.cache_mode);
    read_field(backend, "cache", cache_name);
    config.cache_mode = parse_cache_mode(cache_name);
    read_field(backend, "cache_file", config.cache_file);
    config.cache_file = resolve_path(base_dir, config.cache_file);

    if (backend.contains("mock")) {
      const json& mock = backend["mock"];
      if (!mock.is_object()) {
        bad_key("backend.mock", "a table");
      }
      read_field(mock, "fixture_file", config.mock.fixture_file);
      read_field(mock, "entailment_file", config.mock.entailment_file);
      read_field(mock, "embedding_dimension", config.mock.embedding_dimension);
      read_field(mock, "logprobs", config.mock.logprobs);
      read_field(mock, "default_replies", config.mock.default_replies);
      config.mock.fixture_file = resolve_path(base_dir, config.mock.fixture_file);
      config.mock.entailment_file = resolve_path(base_dir, config.mock.entailment_file);
    }
    if (backend.contains("openai")) {
      const json& openai = backend["openai"];
      if (!openai.is_object()) {
        bad_key("backend.openai", "a table");
      }
      read_field(openai, "base_url", config.http.base_url);
      read_field(openai, "chat_model", config.http.chat_model);
      read_field(openai, "embedding_model", config.http.embedding_model);
      read_field(openai, "max_attempts", config.http.max_attempts);
      read_field(openai, "initial_backoff_ms", config.http.initial_backoff_ms);
      read_field(openai, "timeout_ms", config.http.timeout_ms);
      read_field(openai, "logprobs_supported", config.http.logprobs_supported);
    }
  }

  if (document.contains("judge")) {
    const json& judges = document["judge"];
    if (!judges.is_array()) {
      bad_key("judge", "an array of tables ([[judge]])");
    }
    int index = 0;
    for (const json& entry : judges) {
      ++index;
      if (!entry.is_object()) {
        bad_key("judge", "an array of tables ([[judge]])");
      }
      JudgeConfig judge;
      judge.id = "judge_" + std::to_string(index);
      read_field(entry, "id", judge.id);
      read_field(entry, "template", judge.template_name);
      read_field(entry, "prompt_file", judge.prompt_file);
      read_field(entry, "temperature", judge.temperature);
      judge.prompt_file = resolve_path(base_dir, judge.prompt_file);
      config.judges.push_back(std::move(judge));
    }
  }

  if (document.contains("ensemble")) {
    const json& ensemble = document["ensemble"];
    if (!ensemble.is_object()) {
      bad_key("ensemble", "a table");
    }
    read_field(ensemble, "components", config.ensemble_components);
    read_field(ensemble, "weights_file", config.weights_file);
    config.weights_file = resolve_path(base_dir, config.weights_file);
    read_field(ensemble, "grader", config.grader);
    read_field(ensemble, "objective", config.objective);
    if (ensemble.contains("weights")) {
      const json& weights = ensemble["weights"];
      if (!weights.is_object()) {
        bad_key("ensemble.weights", "a table of scorer = weight entries");
      }
      for (const auto& [scorer_id, value] : weights.items()) {
        if (!value.is_number()) {
          bad_key("ensemble.weights." + scorer_id, "a number");
        }
        config.ensemble_weights[scorer_id] = value.get<double>();
      }
    }
  }

  if (document.contains("tune")) {
    const json& tune = document["tune"];
    if (!tune.is_object()) {
      bad_key("tune", "a table");
    }
    read_field(tune, "grid_step", config.search.grid_step);
    read_field(tune, "dirichlet_samples", config.search.dirichlet_samples);
    read_field(tune, "refine_initial_step", config.search.refine_initial_step);
    read_field(tune, "refine_final_step", config.search.refine_final_step);
    read_field(tune, "max_refine_passes", config.search.max_refine_passes);
  }

  if (document.contains("output")) {
    const json& output = document["output"];
    if (!output.is_object()) {
      bad_key("output", "a table");
    }
    read_field(output, "path", config.out_path);
    read_field(output, "weights_out", config.weights_out);
    config.out_path = resolve_path(base_dir, config.out_path);
    config.weights_out = resolve_path(base_dir, config.weights_out);
  }

  return config;
}

nlohmann::json ResultRecord::to_json() const {
  json record;
  record["id"] = id;
  if (error.has_value()) {
    if (!scores.empty() || ensemble_score.has_value()) {
      throw ValidationError("a result carries either scores or an error, not both");
    }
    record["error"] = *error;
    if (!response.empty()) {
      record["response"] = response;
    }
    return record;
  }
  record["response"] = response;
  json score_object = json::object();
  for (const auto& [name, value] : scores) {
    if (!(value >= 0.0 && value <= 1.0)) {
      throw ValidationError("score '" + name + "' out of [0,1] in result '" + id + "'");
    }
    score_object[name] = value;
  }
  record["scores"] = std::move(score_object);
  if (ensemble_score.has_value()) {
    if (!(*ensemble_score >= 0.0 && *ensemble_score <= 1.0)) {
      throw ValidationError("ensemble score out of [0,1] in result '" + id + "'");
    }
    record["ensemble_score"] = *ensemble_score;
  }
  if (panel.has_value()) {
    record["panel"] = *panel;
  }
  return record;
}

ResultRecord ResultRecord::from_json(const nlohmann::json& object) {
  if (!object.is_object()) {
    throw ValidationError("a result record must be a JSON object");
  }
  if (!object.contains("id") || !object["id"].is_string()) {
    throw ValidationError("a result record needs a string \"id\"");
  }
  ResultRecord record;
  record.id = object["id"].get<std::string>();

  const bool has_error = object.contains("error") && !object["error"].is_null();
  const bool has_scores = object.contains("scores") && !object["scores"].is_null();
  if (has_error == has_scores) {
    throw ValidationError("result '" + record.id +
                          "' must carry exactly one of \"scores\" and \"error\"");
  }
  if (object.contains("response")) {
    if (!object["response"].is_string()) {
      throw ValidationError("result '" + record.id + "': \"response\" must be a string");
    }
    record.response = object["response"].get<std::string>();
  }
  if (has_error) {
    if (!object["error"].is_string()) {
      throw ValidationError("result '" + record.id + "': \"error\" must be a string");
    }
    record.error = object["error"].get<std::string>();
    return record;
  }

  if (!object["scores"].is_object()) {
    throw ValidationError("result '" + record.id + "': \"scores\" must be an object");
  }
  for (const auto& [name, value] : object["scores"].items()) {
    if (!value.is_number()) {
      throw ValidationError("result '" + record.id + "': score '" + name +
                            "' must be a number");
    }
    const double score = value.get<double>();
    if (!(score >= 0.0 && score <= 1.0)) {
      throw ValidationError("result '" + record.id + "': score '" + name + "' out of [0,1]");
    }
    record.scores[name] = score;
  }
  if (object.contains("ensemble_score") && !object["ensemble_score"].is_null()) {
    if (!object["ensemble_score"].is_number()) {
      throw ValidationError("result '" + record.id + "': \"ensemble_score\" must be a number");
    }
    const double score = object["ensemble_score"].get<double>();
    if (!(score >= 0.0 && score <= 1.0)) {
      throw ValidationError("result '" + record.id + "': ensemble score out of [0,1]");
    }
    record.ensemble_score = score;
  }
  if (object.contains("panel") && !object["panel"].is_null()) {
    record.panel = object["panel"];
  }
  return record;
}

namespace {

struct Providers {
  std::shared_ptr<TransportCounter> counter;
  std::shared_ptr<ChatProvider> chat;
  std::shared_ptr<EmbeddingProvider> embedder;
  std::shared_ptr<EntailmentProvider> entail;
};

Providers build_providers(const RunConfig& config) {
  Providers providers;
  providers.counter = std::make_shared<TransportCounter>();

  if (config.backend_kind == "mock") {
    auto chat = config.mock.fixture_file.empty()
                    ? std::make_shared<MockChatProvider>()
                    : std::make_shared<MockChatProvider>(
                          MockChatProvider::from_fixture_file(config.mock.fixture_file));
    chat->set_supports_logprobs(config.mock.logprobs);
    chat->set_counter(providers.counter);
    if (!config.mock.default_replies.empty()) {
      std::vector<MockChatProvider::Entry> defaults;
      for (const std::string& text : config.mock.default_replies) {
        defaults.push_back({text, std::nullopt});
      }
      chat->set_default_entries(std::move(defaults));
    }
    providers.chat = chat;

    auto embedder = std::make_shared<MockEmbeddingProvider>(
        static_cast<std::size_t>(config.mock.embedding_dimension));
    embedder->set_counter(providers.counter);
    providers.embedder = embedder;

    auto entail = config.mock.entailment_file.empty()
                      ? std::make_shared<MockEntailmentProvider>()
                      : std::make_shared<MockEntailmentProvider>(
                            MockEntailmentProvider::from_fixture_file(
                                config.mock.entailment_file));
    entail->set_counter(providers.counter);
    providers.entail = entail;
  } else {
    providers.chat = std::make_shared<OpenAiChatProvider>(config.http, providers.counter);
    providers.embedder =
        std::make_shared<OpenAiEmbeddingProvider>(config.http, providers.counter);
    providers.entail = std::make_shared<ChatEntailmentAdapter>(providers.chat);
  }

  if (config.cache_mode != CacheMode::kLive) {
    auto cache = ResponseCache::open(config.cache_file, config.cache_mode);
    providers.chat = std::make_shared<CachedChatProvider>(providers.chat, cache);
    providers.embedder = std::make_shared<CachedEmbeddingProvider>(providers.embedder, cache);
    providers.entail = std::make_shared<CachedEntailmentProvider>(providers.entail, cache);
  }
  return providers;
}

std::vector<JudgeSpec> build_judges(const RunConfig& config,
                                    const std::shared_ptr<ChatProvider>& chat) {
  std::vector<JudgeSpec> specs;
  for (const JudgeConfig& judge : config.judges) {
    JudgeSpec spec;
    spec.judge_id = judge.id;
    spec.scoring = ScoringTemplate::from_name(judge.template_name);
    spec.provider = chat;
    if (!judge.prompt_file.empty()) {
      spec.prompt_template = read_text_file(judge.prompt_file);
    }
    spec.temperature = judge.temperature;
    specs.push_back(std::move(spec));
  }
  return specs;
}

EnsembleWeights resolve_weights(const RunConfig& config) {
  std::vector<std::string> components =
      config.ensemble_components.empty() ? default_ensemble_components()
                                         : config.ensemble_components;

  if (!config.ensemble_weights.empty()) {
    if (config.ensemble_components.empty()) {
      components.clear();
      for (const auto& [scorer_id, weight] : config.ensemble_weights) {
        components.push_back(scorer_id);
      }
    }
    EnsembleWeights weights;
    for (const std::string& component : components) {
      const auto it = config.ensemble_weights.find(component);
      if (it == config.ensemble_weights.end()) {
        throw ConfigError("[ensemble.weights] lacks component '" + component + "'");
      }
      weights.entries.emplace_back(component, it->second);
    }
    if (config.ensemble_weights.size() != components.size()) {
      throw ConfigError("[ensemble.weights] names scorers absent from the component list");
    }
    try {
      weights.validate();
    } catch (const ValidationError& error) {
      throw ConfigError(std::string("[ensemble.weights]: ") + error.what());
    }
    return weights;
  }

  if (!config.weights_file.empty()) {
    EnsembleWeights loaded = load_weights(config.weights_file);
    if (config.ensemble_components.empty()) {
      return loaded;
    }
    std::set<std::string> loaded_ids;
    for (const auto& [scorer_id, weight] : loaded.entries) {
      loaded_ids.insert(scorer_id);
    }
    if (loaded_ids != std::set<std::string>(components.begin(), components.end())) {
      throw ConfigError("weights file '" + config.weights_file +
                        "' does not cover exactly the configured components");
    }
    EnsembleWeights reordered;
    reordered.threshold = loaded.threshold;
    for (const std::string& component : components) {
      for (const auto& [scorer_id, weight] : loaded.entries) {
        if (scorer_id == component) {
          reordered.entries.emplace_back(scorer_id, weight);
        }
      }
    }
    reordered.validate();
    return reordered;
  }

  return EnsembleWeights::uniform(components);
}

// The shipped default ensemble includes "self_judge"; when no judge with
// that id is configured, one is provisioned on the run's own chat provider
// so the off-the-shelf config works out of the box.
std::vector<JudgeSpec> ensure_self_judge(std::vector<JudgeSpec> judges,
                                         const std::vector<std::string>& components,
                                         const std::shared_ptr<ChatProvider>& chat) {
  const bool wants_self_judge =
      std::find(components.begin(), components.end(), "self_judge") != components.end();
  if (!wants_self_judge) {
    return judges;
  }
  for (const JudgeSpec& judge : judges) {
    if (judge.judge_id == "self_judge") {
      return judges;
    }
  }
  JudgeSpec self_judge;
  self_judge.judge_id = "self_judge";
  self_judge.scoring = ScoringTemplate(ScoringTemplate::Kind::kContinuous);
  self_judge.provider = chat;
  judges.push_back(std::move(self_judge));
  return judges;
}

EnsembleEngine build_ensemble_engine(const RunConfig& config, const Providers& providers,
                                     std::uint64_t seed, const EnsembleWeights& weights) {
  EnsembleOptions options;
  options.weights = weights;
  options.num_responses = config.num_responses;
  options.use_best = config.use_best;
  options.sampling.original_temperature = config.original_temperature;
  options.sampling.candidate_temperature = config.candidate_temperature;
  options.judges =
      ensure_self_judge(build_judges(config, providers.chat), weights.scorer_ids(),
                        providers.chat);
  options.seed = seed;
  options.max_in_flight = config.max_in_flight;
  return EnsembleEngine(providers.chat, providers.embedder, providers.entail,
                        std::move(options));
}

json score_statistics(const std::vector<ResultRecord>& records) {
  std::map<std::string, std::vector<double>> samples;
  for (const ResultRecord& record : records) {
    for (const auto& [name, value] : record.scores) {
      samples[name].push_back(value);
    }
    if (record.ensemble_score.has_value()) {
      samples["ensemble_score"].push_back(*record.ensemble_score);
    }
  }
  json stats = json::object();
  for (const auto& [name, values] : samples) {
    double sum = 0.0;
    double lo = values.front();
    double hi = values.front();
    for (const double value : values) {
      sum += value;
      lo = std::min(lo, value);
      hi = std::max(hi, value);
    }
    stats[name] = {{"count", values.size()},
                   {"mean", sum / static_cast<double>(values.size())},
                   {"min", lo},
                   {"max", hi}};
  }
  return stats;
}

json build_summary(const RunConfig& config, const std::vector<ResultRecord>& records,
                   const TransportCounter& counter) {
  std::size_t error_count = 0;
  for (const ResultRecord& record : records) {
    if (record.error.has_value()) {
      ++error_count;
    }
  }
  json summary;
  summary["mode"] = run_mode_name(config.mode);
  summary["prompt_count"] = records.size();
  summary["error_count"] = error_count;
  summary["scores"] = score_statistics(records);
  summary["provider_calls"] = {{"chat", counter.chat_calls()},
                               {"embed", counter.embed_calls()},
                               {"entail", counter.entail_calls()},
                               {"total", counter.total()}};
  return summary;
}

json panel_to_json(const PanelResult& panel) {
  json verdicts = json::array();
  for (const JudgeVerdict& verdict : panel.verdicts) {
    json entry = {{"judge_id", verdict.judge_id},
                  {"raw_reply", verdict.raw_reply},
                  {"attempts", verdict.attempts}};
    if (verdict.parsed_score.has_value()) {
      entry["parsed_score"] = *verdict.parsed_score;
    } else {
      entry["parsed_score"] = nullptr;
    }
    verdicts.push_back(std::move(entry));
  }
  return verdicts;
}

}  // namespace

RunOutput run(const RunConfig& config, const std::vector<PromptRecord>& dataset) {
  config.validate();
  if (dataset.empty()) {
    throw DatasetError("the dataset contains no records");
  }

  const Providers providers = build_providers(config);
  const std::uint64_t seed = config.seed.value_or(0);

  std::vector<std::string> prompts;
  prompts.reserve(dataset.size());
  for (const PromptRecord& record : dataset) {
    prompts.push_back(record.prompt);
  }

  RunOutput output;
  output.records.resize(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    output.records[i].id = dataset[i].id;
  }

  switch (config.mode) {
    case RunMode::kBlackbox: {
      BlackBoxOptions options;
      options.scorers = config.scorers.empty() ? blackbox_scorer_names() : config.scorers;
      options.num_responses = config.num_responses;
      options.use_best = config.use_best;
      options.sampling.original_temperature = config.original_temperature;
      options.sampling.candidate_temperature = config.candidate_temperature;
      options.seed = seed;
      options.max_in_flight = config.max_in_flight;
      BlackBoxEngine engine(providers.chat, providers.embedder, providers.entail, options);
      const std::vector<BlackBoxResult> results = engine.generate_and_score(prompts);
      for (std::size_t i = 0; i < results.size(); ++i) {
        output.records[i].response = results[i].response;
        output.records[i].scores = results[i].scores;
        output.records[i].error = results[i].error;
      }
      break;
    }
    case RunMode::kWhitebox: {
      WhiteBoxOptions options;
      if (!config.scorers.empty()) {
        options.scorers = config.scorers;
      }
      options.temperature = config.original_temperature;
      options.seed = seed;
      options.max_in_flight = config.max_in_flight;
      WhiteBoxEngine engine(providers.chat, options);
      const std::vector<WhiteBoxResult> results = engine.generate_and_score(prompts);
      for (std::size_t i = 0; i < results.size(); ++i) {
        output.records[i].response = results[i].response;
        output.records[i].scores = results[i].scores;
        output.records[i].error = results[i].error;
      }
      break;
    }
    case RunMode::kPanel: {
      PanelOptions options;
      options.generator_temperature = config.original_temperature;
      options.seed = seed;
      options.max_in_flight = config.max_in_flight;
      PanelEngine engine(providers.chat, build_judges(config, providers.chat), options);
      const std::vector<PanelOutcome> outcomes = engine.generate_and_score(prompts);
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        output.records[i].response = outcomes[i].generation.text;
        if (outcomes[i].error.has_value()) {
          output.records[i].error = outcomes[i].error;
          continue;
        }
        output.records[i].scores = panel_score_vector(outcomes[i].panel);
        output.records[i].panel = panel_to_json(outcomes[i].panel);
      }
      break;
    }
    case RunMode::kEnsemble: {
      EnsembleEngine engine =
          build_ensemble_engine(config, providers, seed, resolve_weights(config));
      const std::vector<EnsembleResult> results = engine.generate_and_score(prompts);
      for (std::size_t i = 0; i < results.size(); ++i) {
        output.records[i].response = results[i].response;
        output.records[i].scores = results[i].scores;
        output.records[i].ensemble_score = results[i].ensemble;
        output.records[i].error = results[i].error;
      }
      break;
    }
    case RunMode::kTune: {
      for (const PromptRecord& record : dataset) {
        if (!record.ideal.has_value()) {
          throw DatasetError("tune mode needs an \"ideal\" response for every record; id \"" +
                             record.id + "\" has none");
        }
      }
      const EnsembleWeights initial = resolve_weights(config);
      EnsembleEngine engine = build_ensemble_engine(config, providers, seed, initial);
      const std::vector<EnsembleResult> results = engine.generate_and_score(prompts);

      const Grader grader = config.grader == "judge"
                                ? judge_grader(providers.chat, 0.0, seed)
                                : exact_match_grader();
      std::vector<TuningRecord> tuning_records;
      for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].error.has_value()) {
          std::cerr << "[uq] warning: skipping prompt \"" << dataset[i].id
                    << "\" in tuning: " << *results[i].error << "\n";
          continue;
        }
        int grade = 0;
        try {
          grade = grader(results[i].response, *dataset[i].ideal);
          if (grade != 0 && grade != 1) {
            throw ValidationError("grader returned a non-binary grade");
          }
        } catch (const Error& error) {
          std::cerr << "[uq] warning: grading failed for prompt \"" << dataset[i].id
                    << "\": " << error.what() << "\n";
          continue;
        }
        TuningRecord record;
        record.prompt = prompts[i];
        record.ideal_response = *dataset[i].ideal;
        record.scorer_scores = results[i].scores;
        record.grade = grade;
        tuning_records.push_back(std::move(record));
      }

      SearchConfig search = config.search;
      search.seed = seed;
      TuneResult tuned = tune_weights(tuning_records, initial.scorer_ids(),
                                      Objective::from_name(config.objective), search,
                                      config.max_in_flight);
      if (!config.weights_out.empty()) {
        save_weights(tuned, config.weights_out);
      }

      for (std::size_t i = 0; i < results.size(); ++i) {
        output.records[i].response = results[i].response;
        output.records[i].scores = results[i].scores;
        output.records[i].error = results[i].error;
        if (!results[i].error.has_value()) {
          output.records[i].ensemble_score = ensemble_score(results[i].scores, tuned.weights);
        }
      }
      output.tuned = tuned;
      break;
    }
  }

  output.summary = build_summary(config, output.records, *providers.counter);
  if (output.tuned.has_value()) {
    json weights = json::object();
    for (const auto& [scorer_id, weight] : output.tuned->weights.entries) {
      weights[scorer_id] = weight;
    }
    output.summary["objective"] = output.tuned->objective.name();
    output.summary["objective_value"] = output.tuned->objective_value;
    output.summary["weights"] = std::move(weights);
    output.summary["threshold"] = output.tuned->weights.threshold.has_value()
                                      ? json(*output.tuned->weights.threshold)
                                      : json(nullptr);
    output.summary["search_method"] = output.tuned->method;
    if (!config.weights_out.empty()) {
      output.summary["weights_out"] = config.weights_out;
    }
  }
  return output;
}

namespace {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) {
    return field;
  }
  std::string quoted = "\"";
  for (const char c : field) {
    if (c == '"') {
      quoted += "\"\"";
    } else {
      quoted += c;
    }
  }
  quoted += "\"";
  return quoted;
}

std::string number_cell(double value) { return json(value).dump(); }

}  // namespace

void emit_report(const std::vector<ResultRecord>& records, const std::string& format,
                 const std::string& path) {
  if (records.empty()) {
    throw ValidationError("cannot write a report with no results");
  }
  if (format != "jsonl" && format != "csv") {
    throw ConfigError("unknown report format '" + format + "'; use jsonl or csv");
  }

  // Serialize (and range-check) everything before touching the file so a
  // validation failure never leaves a partial artifact.
  std::vector<std::string> lines;
  lines.reserve(records.size() + 1);
  if (format == "jsonl") {
    for (const ResultRecord& record : records) {
      lines.push_back(record.to_json().dump());
    }
  } else {
    std::set<std::string> score_names;
    for (const ResultRecord& record : records) {
      record.to_json();  // boundary validation
      for (const auto& [name, value] : record.scores) {
        score_names.insert(name);
      }
    }
    std::string header = "id,response";
    for (const std::string& name : score_names) {
      header += "," + csv_escape(name);
    }
    header += ",ensemble_score,error";
    lines.push_back(std::move(header));
    for (const ResultRecord& record : records) {
      std::string line = csv_escape(record.id) + "," + csv_escape(record.response);
      for (const std::string& name : score_names) {
        const auto it = record.scores.find(name);
        line += ",";
        if (it != record.scores.end()) {
          line += number_cell(it->second);
        }
      }
      line += ",";
      if (record.ensemble_score.has_value()) {
        line += number_cell(*record.ensemble_score);
      }
      line += ",";
      line += csv_escape(record.error.value_or(""));
      lines.push_back(std::move(line));
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ConfigError("cannot write report file '" + path + "'");
  }
  for (const std::string& line : lines) {
    out << line << "\n";
  }
  if (!out) {
    throw ConfigError("failed while writing report file '" + path + "'");
  }
}

std::vector<ResultRecord> load_results(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DatasetError("cannot open results file '" + path + "'");
  }
  std::vector<ResultRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) {
      continue;
    }
    try {
      records.push_back(ResultRecord::from_json(json::parse(line)));
    } catch (const json::exception& error) {
      throw DatasetError(path + ":" + std::to_string(line_number) +
                         ": malformed JSON: " + error.what());
    } catch (const ValidationError& error) {
      throw DatasetError(path + ":" + std::to_string(line_number) + ": " + error.what());
    }
  }
  return records;
}

}  // namespace uq
