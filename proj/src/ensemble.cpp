#include "uqkit/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "uqkit/parallel.hpp"
#include "uqkit/similarity.hpp"
#include "uqkit/whitebox.hpp"

namespace uq {

namespace {

constexpr double kWeightSumTolerance = 1e-9;

bool contains_name(const std::vector<std::string>& names, const std::string& name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

void replace_all(std::string& text, const std::string& placeholder, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    text.replace(pos, placeholder.size(), value);
    pos += value.size();
  }
}

}  // namespace

void EnsembleWeights::validate() const {
  if (entries.empty()) {
    throw ValidationError("ensemble weights need at least one component");
  }
  std::set<std::string> seen;
  double sum = 0.0;
  for (const auto& [scorer_id, weight] : entries) {
    if (trim(scorer_id).empty()) {
      throw ValidationError("ensemble components need non-empty ids");
    }
    if (!seen.insert(scorer_id).second) {
      throw ValidationError("duplicate ensemble component '" + scorer_id + "'");
    }
    if (!std::isfinite(weight) || weight < 0.0) {
      throw ValidationError("weight for '" + scorer_id + "' must be a nonnegative real");
    }
    sum += weight;
  }
  if (std::abs(sum - 1.0) > kWeightSumTolerance) {
    std::ostringstream message;
    message << "ensemble weights must sum to 1, got " << sum;
    throw ValidationError(message.str());
  }
  if (threshold.has_value() && !(*threshold >= 0.0 && *threshold <= 1.0)) {
    throw ValidationError("threshold must lie in [0,1]");
  }
}

EnsembleWeights EnsembleWeights::uniform(const std::vector<std::string>& scorer_ids) {
  if (scorer_ids.empty()) {
    throw EmptyScorerSetError("cannot build weights over zero scorers");
  }
  EnsembleWeights weights;
  const double weight = 1.0 / static_cast<double>(scorer_ids.size());
  for (const std::string& scorer_id : scorer_ids) {
    weights.entries.emplace_back(scorer_id, weight);
  }
  weights.validate();
  return weights;
}

std::vector<std::string> EnsembleWeights::scorer_ids() const {
  std::vector<std::string> ids;
  ids.reserve(entries.size());
  for (const auto& [scorer_id, weight] : entries) {
    ids.push_back(scorer_id);
  }
  return ids;
}

double ensemble_score(const ScoreVector& scores, const EnsembleWeights& weights) {
  weights.validate();
  double combined = 0.0;
  for (const auto& [scorer_id, weight] : weights.entries) {
    const auto it = scores.find(scorer_id);
    if (it == scores.end()) {
      throw MissingScorerError("ensemble component '" + scorer_id + "' missing from scores");
    }
    if (!(it->second >= 0.0 && it->second <= 1.0)) {
      throw ValidationError("score for '" + scorer_id + "' out of [0,1]");
    }
    combined += weight * it->second;
  }
  return std::clamp(combined, 0.0, 1.0);
}

const std::vector<std::string>& default_ensemble_components() {
  static const std::vector<std::string> components = {"exact_match", "noncontradiction",
                                                      "self_judge"};
  return components;
}

EnsembleWeights default_ensemble() { return EnsembleWeights::uniform(default_ensemble_components()); }

int exact_match_grade(const std::string& response, const std::string& ideal) {
  return exact_match(response, ideal) == 1.0 ? 1 : 0;
}

Grader exact_match_grader() {
  return [](const std::string& response, const std::string& ideal) {
    return exact_match_grade(response, ideal);
  };
}

const char kGraderPromptTemplate[] =
    "You are grading whether a response matches the reference answer.\n"
    "\n"
    "Reference answer:\n"
    "{ideal}\n"
    "\n"
    "Response:\n"
    "{response}\n"
    "\n"
    "Reply with exactly 1 if the response is equivalent to the reference answer, "
    "otherwise reply with exactly 0.\n"
    "Reply with the value and nothing else.\n";

Grader judge_grader(std::shared_ptr<ChatProvider> provider, double temperature,
                    std::uint64_t seed) {
  if (provider == nullptr) {
    throw ConfigError("judge grader needs a chat provider");
  }
  return [provider, temperature, seed](const std::string& response, const std::string& ideal) {
    if (trim(response).empty()) {
      throw ValidationError("cannot grade an empty response");
    }
    if (trim(ideal).empty()) {
      throw ValidationError("cannot grade against an empty ideal response");
    }
    std::string prompt = kGraderPromptTemplate;
    replace_all(prompt, "{ideal}", ideal);
    replace_all(prompt, "{response}", response);

    const ScoringTemplate binary(ScoringTemplate::Kind::kBinary);
    ChatRequest request;
    request.prompt = prompt;
    request.sample_count = 1;
    request.temperature = temperature;
    request.seed = derive_seed(seed, "grader", 0);

    std::string reply = chat_generate(*provider, request).front().text;
    std::optional<double> verdict = try_parse_verdict(reply, binary);
    if (!verdict.has_value()) {
      request.prompt = prompt + kJudgeRetrySuffix;
      reply = chat_generate(*provider, request).front().text;
      verdict = parse_verdict(reply, binary);
    }
    return *verdict == 1.0 ? 1 : 0;
  };
}

std::vector<std::optional<int>> grade_responses(const std::vector<std::string>& responses,
                                                const std::vector<std::string>& ideals,
                                                const Grader& grader) {
  if (responses.size() != ideals.size()) {
    throw ValidationError("grading needs one ideal response per response");
  }
  std::vector<std::optional<int>> grades(responses.size());
  for (std::size_t i = 0; i < responses.size(); ++i) {
    try {
      const int grade = grader(responses[i], ideals[i]);
      if (grade != 0 && grade != 1) {
        throw ValidationError("grader returned a non-binary grade");
      }
      grades[i] = grade;
    } catch (const Error& error) {
      std::cerr << "[uq] warning: grading failed for item " << i << ": " << error.what()
                << "\n";
    }
  }
  return grades;
}

namespace {

void check_labels(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("scores and labels must have the same length");
  }
  if (scores.empty()) {
    throw ValidationError("cannot evaluate an empty sample");
  }
  for (const double score : scores) {
    if (!std::isfinite(score)) {
      throw ValidationError("scores must be finite");
    }
  }
  for (const int label : labels) {
    if (label != 0 && label != 1) {
      throw ValidationError("labels must be 0 or 1");
    }
  }
}

}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_labels(scores, labels);
  const std::uint64_t positives =
      static_cast<std::uint64_t>(std::count(labels.begin(), labels.end(), 1));
  const std::uint64_t negatives = static_cast<std::uint64_t>(labels.size()) - positives;
  if (positives == 0 || negatives == 0) {
    throw DegenerateLabelsError("ROC-AUC needs both a positive and a negative label");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Integer rank sums over tie groups: with S twice the positive midrank
  // sum, AUC = (S - P(P+1)) / (2PN), exactly the pair-counting value.
  std::uint64_t twice_positive_rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::uint64_t group_positives = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      group_positives += static_cast<std::uint64_t>(labels[order[j]]);
      ++j;
    }
    const std::uint64_t first_rank = i + 1;
    const std::uint64_t last_rank = j;
    twice_positive_rank_sum += group_positives * (first_rank + last_rank);
    i = j;
  }
  const std::uint64_t numerator = twice_positive_rank_sum - positives * (positives + 1);
  return static_cast<double>(numerator) / static_cast<double>(2 * positives * negatives);
}

Objective Objective::from_name(const std::string& name) {
  if (name == "roc_auc") {
    return Objective{Kind::kRocAuc};
  }
  if (name == "f1") {
    return Objective{Kind::kF1};
  }
  if (name == "accuracy") {
    return Objective{Kind::kAccuracy};
  }
  throw ConfigError("unknown objective '" + name + "'; valid objectives are: roc_auc f1 accuracy");
}

std::string Objective::name() const {
  switch (kind) {
    case Kind::kRocAuc:
      return "roc_auc";
    case Kind::kF1:
      return "f1";
    case Kind::kAccuracy:
      return "accuracy";
  }
  throw Error("unreachable objective kind");
}

double threshold_metric(const std::vector<double>& scores, const std::vector<int>& labels,
                        double threshold, Objective::Kind kind) {
  check_labels(scores, labels);
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ValidationError("threshold must lie in [0,1]");
  }
  if (kind == Objective::Kind::kRocAuc) {
    throw ValidationError("threshold_metric expects f1 or accuracy");
  }

  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted_positive = scores[i] >= threshold;
    if (predicted_positive) {
      (labels[i] == 1 ? tp : fp) += 1;
    } else {
      (labels[i] == 1 ? fn : tn) += 1;
    }
  }

  if (kind == Objective::Kind::kAccuracy) {
    return static_cast<double>(tp + tn) / static_cast<double>(scores.size());
  }
  if (tp + fn == 0) {
    throw DegenerateLabelsError("F1 needs at least one positive label");
  }
  if (tp == 0) {
    return 0.0;
  }
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

std::vector<double> threshold_candidates(std::vector<double> scores) {
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  std::set<double> candidates = {0.0, 1.0};
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
    candidates.insert((scores[i] + scores[i + 1]) / 2.0);
  }
  return {candidates.begin(), candidates.end()};
}

namespace {

// Descending-lexicographic compositions of `steps` into k parts, so the
// first vector emitted is (1, 0, ..., 0). The tuner's tie-break (first
// strict maximum in search order) relies on this ordering.
void enumerate_grid(std::size_t k, std::uint64_t steps, std::vector<std::uint64_t>& partial,
                    std::vector<std::vector<double>>& out) {
  if (partial.size() + 1 == k) {
    std::vector<double> weights;
    weights.reserve(k);
    for (const std::uint64_t part : partial) {
      weights.push_back(static_cast<double>(part) / static_cast<double>(steps));
    }
    std::uint64_t used = 0;
    for (const std::uint64_t part : partial) {
      used += part;
    }
    weights.push_back(static_cast<double>(steps - used) / static_cast<double>(steps));
    out.push_back(std::move(weights));
    return;
  }
  std::uint64_t used = 0;
  for (const std::uint64_t part : partial) {
    used += part;
  }
  for (std::uint64_t part = steps - used + 1; part-- > 0;) {
    partial.push_back(part);
    enumerate_grid(k, steps, partial, out);
    partial.pop_back();
  }
}

// Uniform (0,1) double from the generator's raw 64-bit output: the top 53
// bits plus a half-step offset, so the value is never exactly 0 or 1 and
// the mapping is identical on every platform.
double unit_open_interval(std::mt19937_64& engine) {
  return (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53;
}

std::vector<std::vector<double>> dirichlet_candidates(std::size_t k, int samples,
                                                      std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    std::vector<double> weights(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      // Dirichlet(1,..,1) via normalized unit exponentials.
      weights[i] = -std::log(unit_open_interval(engine));
      sum += weights[i];
    }
    for (double& weight : weights) {
      weight /= sum;
    }
    out.push_back(std::move(weights));
  }
  return out;
}

std::vector<double> project_to_simplex(std::vector<double> weights) {
  double sum = 0.0;
  for (double& weight : weights) {
    weight = std::max(weight, 0.0);
    sum += weight;
  }
  if (sum <= 0.0) {
    throw ValidationError("cannot project the zero vector onto the simplex");
  }
  for (double& weight : weights) {
    weight /= sum;
  }
  return weights;
}

struct CandidateValue {
  double value = 0.0;
  std::optional<double> threshold;
};

}  // namespace

TuneResult tune_weights(const std::vector<TuningRecord>& records,
                        const std::vector<std::string>& scorer_ids, Objective objective,
                        const SearchConfig& search, int max_in_flight) {
  if (scorer_ids.empty()) {
    throw EmptyScorerSetError("tuning needs at least one scorer");
  }
  {
    std::set<std::string> seen(scorer_ids.begin(), scorer_ids.end());
    if (seen.size() != scorer_ids.size()) {
      throw ConfigError("tuning scorer ids must be unique");
    }
  }
  if (records.size() < 2) {
    throw ValidationError("tuning needs at least two graded records");
  }

  const std::size_t n = records.size();
  const std::size_t k = scorer_ids.size();
  std::vector<int> labels(n);
  std::vector<std::vector<double>> matrix(n, std::vector<double>(k));
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i].grade != 0 && records[i].grade != 1) {
      throw ValidationError("tuning grades must be 0 or 1");
    }
    labels[i] = records[i].grade;
    for (std::size_t j = 0; j < k; ++j) {
      const auto it = records[i].scorer_scores.find(scorer_ids[j]);
      if (it == records[i].scorer_scores.end()) {
        throw MissingScorerError("tuning record " + std::to_string(i) + " lacks scorer '" +
                                 scorer_ids[j] + "'");
      }
      if (!(it->second >= 0.0 && it->second <= 1.0)) {
        throw ValidationError("tuning score for '" + scorer_ids[j] + "' out of [0,1]");
      }
      matrix[i][j] = it->second;
    }
  }
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || static_cast<std::size_t>(positives) == n) {
    throw DegenerateLabelsError("tuning needs both grade classes in the answer key");
  }

  const auto evaluate = [&](const std::vector<double>& weights) {
    std::vector<double> combined(n);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        sum += weights[j] * matrix[i][j];
      }
      combined[i] = sum;
    }
    CandidateValue result;
    if (!objective.threshold_dependent()) {
      result.value = roc_auc(combined, labels);
      return result;
    }
    result.value = -1.0;
    for (const double threshold : threshold_candidates(combined)) {
      const double value = threshold_metric(combined, labels, threshold, objective.kind);
      if (value > result.value) {
        result.value = value;
        result.threshold = threshold;
      }
    }
    return result;
  };

  std::vector<std::vector<double>> candidates;
  std::string method;
  if (k <= 3) {
    method = "grid";
    const auto steps = static_cast<std::uint64_t>(std::llround(1.0 / search.grid_step));
    if (steps < 1) {
      throw ConfigError("grid_step must lie in (0,1]");
    }
    std::vector<std::uint64_t> partial;
    enumerate_grid(k, steps, partial, candidates);
  } else {
    method = "dirichlet_refine";
    if (search.dirichlet_samples < 1) {
      throw ConfigError("dirichlet_samples must be positive");
    }
    candidates = dirichlet_candidates(k, search.dirichlet_samples, search.seed);
  }

  // Candidates are evaluated in parallel but the argmax scan below walks
  // the full result list in search order, so ties stay deterministic.
  std::vector<CandidateValue> values(candidates.size());
  parallel_for(candidates.size(), max_in_flight,
               [&](std::size_t c) { values[c] = evaluate(candidates[c]); });

  std::size_t best_index = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    if (values[c].value > values[best_index].value) {
      best_index = c;
    }
  }
  std::vector<double> best_weights = candidates[best_index];
  CandidateValue best_value = values[best_index];

  if (method == "dirichlet_refine") {
    for (double step = search.refine_initial_step; step >= search.refine_final_step - 1e-12;
         step /= 2.0) {
      bool improved = true;
      int passes = 0;
      while (improved && passes < search.max_refine_passes) {
        improved = false;
        ++passes;
        for (std::size_t j = 0; j < k; ++j) {
          for (const double direction : {1.0, -1.0}) {
            std::vector<double> trial = best_weights;
            trial[j] += direction * step;
            trial = project_to_simplex(std::move(trial));
            const CandidateValue value = evaluate(trial);
            if (value.value > best_value.value) {
              best_value = value;
              best_weights = std::move(trial);
              improved = true;
            }
          }
        }
      }
    }
  }

  TuneResult result;
  for (std::size_t j = 0; j < k; ++j) {
    result.weights.entries.emplace_back(scorer_ids[j], best_weights[j]);
  }
  if (objective.threshold_dependent()) {
    result.weights.threshold = best_value.threshold;
  }
  result.weights.validate();
  result.objective = objective;
  result.objective_value = best_value.value;
  result.search = search;
  result.method = method;
  return result;
}

namespace {

const std::set<std::string>& reserved_weight_keys() {
  static const std::set<std::string> keys = {"threshold", "objective", "objective_value",
                                             "search_config", "seed"};
  return keys;
}

}  // namespace

void save_weights(const TuneResult& result, const std::string& path) {
  result.weights.validate();
  nlohmann::json document;
  for (const auto& [scorer_id, weight] : result.weights.entries) {
    if (reserved_weight_keys().count(scorer_id) > 0) {
      throw ConfigError("scorer id '" + scorer_id + "' collides with a reserved weights key");
    }
    document[scorer_id] = weight;
  }
  if (result.weights.threshold.has_value()) {
    document["threshold"] = *result.weights.threshold;
  } else {
    document["threshold"] = nullptr;
  }
  document["objective"] = result.objective.name();
  document["objective_value"] = result.objective_value;
  document["search_config"] = {
      {"method", result.method},
      {"grid_step", result.search.grid_step},
      {"dirichlet_samples", result.search.dirichlet_samples},
      {"refine_initial_step", result.search.refine_initial_step},
      {"refine_final_step", result.search.refine_final_step},
      {"max_refine_passes", result.search.max_refine_passes},
  };
  document["seed"] = result.search.seed;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ConfigError("cannot write weights file '" + path + "'");
  }
  out << document.dump(2) << "\n";
  if (!out) {
    throw ConfigError("failed while writing weights file '" + path + "'");
  }
}

EnsembleWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open weights file '" + path + "'");
  }
  nlohmann::json document;
  try {
    in >> document;
  } catch (const nlohmann::json::exception& error) {
    throw ConfigError("weights file '" + path + "' is not valid JSON: " + error.what());
  }
  if (!document.is_object()) {
    throw ConfigError("weights file '" + path + "' must hold a JSON object");
  }

  EnsembleWeights weights;
  for (const auto& [key, value] : document.items()) {
    if (reserved_weight_keys().count(key) > 0) {
      continue;
    }
    if (!value.is_number()) {
      throw ConfigError("weights file '" + path + "': weight for '" + key +
                        "' must be a number");
    }
    weights.entries.emplace_back(key, value.get<double>());
  }
  if (document.contains("threshold") && !document["threshold"].is_null()) {
    if (!document["threshold"].is_number()) {
      throw ConfigError("weights file '" + path + "': threshold must be a number or null");
    }
    weights.threshold = document["threshold"].get<double>();
  }
  try {
    weights.validate();
  } catch (const ValidationError& error) {
    throw ConfigError("weights file '" + path + "': " + error.what());
  }
  return weights;
}

EnsembleEngine::EnsembleEngine(std::shared_ptr<ChatProvider> chat,
                               std::shared_ptr<EmbeddingProvider> embedder,
                               std::shared_ptr<EntailmentProvider> entail,
                               EnsembleOptions options)
    : chat_(std::move(chat)), embedder_(std::move(embedder)), entail_(std::move(entail)),
      options_(std::move(options)) {
  if (chat_ == nullptr) {
    throw ConfigError("ensemble engine needs a chat provider");
  }
  options_.weights.validate();
  if (options_.num_responses < 1) {
    throw ConfigError("num_responses must be at least 1");
  }

  std::vector<std::string> judge_keys;
  for (const JudgeSpec& judge : options_.judges) {
    judge_keys.push_back(judge.judge_id);
  }
  if (!options_.judges.empty()) {
    judge_keys.insert(judge_keys.end(), {"panel_min", "panel_max", "panel_avg", "panel_median"});
  }

  for (const std::string& scorer_id : options_.weights.scorer_ids()) {
    if (contains_name(blackbox_scorer_names(), scorer_id)) {
      blackbox_components_.push_back(scorer_id);
    } else if (contains_name(whitebox_scorer_names(), scorer_id)) {
      whitebox_components_.push_back(scorer_id);
    } else if (contains_name(judge_keys, scorer_id)) {
      judge_components_.push_back(scorer_id);
    } else {
      std::ostringstream message;
      message << "unknown ensemble component '" << scorer_id << "'; valid components are:";
      for (const std::string& name : blackbox_scorer_names()) {
        message << " " << name;
      }
      for (const std::string& name : whitebox_scorer_names()) {
        message << " " << name;
      }
      for (const std::string& name : judge_keys) {
        message << " " << name;
      }
      if (options_.judges.empty()) {
        message << " (judge components also need a configured judge)";
      }
      throw ConfigError(message.str());
    }
  }

  const bool needs_embedder = contains_name(blackbox_components_, "cosine_sim") ||
                              contains_name(blackbox_components_, "bert_score");
  if (needs_embedder && embedder_ == nullptr) {
    throw ConfigError("cosine_sim and bert_score need an embedding provider");
  }
  const bool needs_entail = contains_name(blackbox_components_, "noncontradiction") ||
                            contains_name(blackbox_components_, "semantic_entropy") ||
                            options_.use_best;
  if (needs_entail && entail_ == nullptr) {
    throw ConfigError("noncontradiction, semantic_entropy and use_best need an entailment provider");
  }

  if (!judge_components_.empty()) {
    PanelOptions panel_options;
    panel_options.seed = options_.seed;
    panel_options.max_in_flight = options_.max_in_flight;
    panel_.emplace(chat_, options_.judges, panel_options);
  }
}

void EnsembleEngine::set_weights(EnsembleWeights weights) {
  weights.validate();
  if (weights.scorer_ids() != options_.weights.scorer_ids()) {
    throw ConfigError("new weights must cover the same components in the same order");
  }
  options_.weights = std::move(weights);
}

std::vector<EnsembleResult> EnsembleEngine::generate_and_score(
    const std::vector<std::string>& prompts) {
  if (!whitebox_components_.empty() && !chat_->supports_logprobs()) {
    throw CapabilityError("white-box ensemble components need a provider with logprob support");
  }
  const bool needs_candidates = !blackbox_components_.empty() || options_.use_best;
  const bool needs_clustering =
      contains_name(blackbox_components_, "semantic_entropy") || options_.use_best;

  std::vector<EnsembleResult> results(prompts.size());
  parallel_for(prompts.size(), options_.max_in_flight, [&](std::size_t i) {
    EnsembleResult result;
    result.prompt = prompts[i];
    try {
      SamplingSettings settings = options_.sampling;
      settings.original_logprobs = !whitebox_components_.empty();
      settings.candidate_logprobs = !whitebox_components_.empty() && options_.use_best;
      settings.original_seed = derive_seed(options_.seed, "chat.original", i);
      settings.candidate_seed = derive_seed(options_.seed, "chat.candidates", i);

      Generation reported;
      ScoreVector scores;
      if (needs_candidates) {
        const CandidateSet set =
            generate_candidates(prompts[i], options_.num_responses, *chat_, settings);
        const std::vector<std::string> texts = set.texts();
        std::optional<SemanticClustering> clustering;
        if (needs_clustering) {
          clustering = semantic_cluster(texts, *entail_);
        }
        std::size_t center = 0;
        if (options_.use_best) {
          center = select_best_index(*clustering);
        }
        reported = center == 0 ? set.original : set.candidates[center - 1];
        if (!blackbox_components_.empty()) {
          scores = BlackBoxEngine::score_responses(texts, center, blackbox_components_,
                                                   embedder_.get(), entail_.get(), clustering);
        }
      } else {
        ChatRequest request;
        request.prompt = prompts[i];
        request.sample_count = 1;
        request.temperature = settings.original_temperature;
        request.want_logprobs = settings.original_logprobs;
        request.seed = settings.original_seed;
        reported = chat_generate(*chat_, request).front();
      }
      result.response = reported.text;

      if (!whitebox_components_.empty()) {
        for (const auto& [name, score] :
             WhiteBoxEngine::score_generation(reported, whitebox_components_)) {
          scores[name] = score;
        }
      }
      if (!judge_components_.empty()) {
        const PanelResult panel = panel_->score_response(prompts[i], reported.text, i);
        const ScoreVector panel_scores = panel_score_vector(panel);
        for (const std::string& scorer_id : judge_components_) {
          const auto it = panel_scores.find(scorer_id);
          if (it == panel_scores.end()) {
            throw MissingScorerError("judge component '" + scorer_id +
                                     "' produced no admissible verdict");
          }
          scores[scorer_id] = it->second;
        }
      }

      result.scores = std::move(scores);
      result.ensemble = ensemble_score(result.scores, options_.weights);
    } catch (const Error& error) {
      result.scores.clear();
      result.ensemble = std::nullopt;
      result.error = error.what();
    }
    results[i] = std::move(result);
  });
  return results;
}

TuneResult EnsembleEngine::tune(const std::vector<std::string>& prompts,
                                const std::vector<std::string>& ideals, const Grader& grader,
                                Objective objective, const SearchConfig& search) {
  if (prompts.size() != ideals.size()) {
    throw ValidationError("tuning needs one ideal response per prompt");
  }
  const std::vector<EnsembleResult> results = generate_and_score(prompts);

  std::vector<TuningRecord> records;
  records.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].error.has_value()) {
      std::cerr << "[uq] warning: skipping prompt " << i << " in tuning: " << *results[i].error
                << "\n";
      continue;
    }
    int grade = 0;
    try {
      grade = grader(results[i].response, ideals[i]);
      if (grade != 0 && grade != 1) {
        throw ValidationError("grader returned a non-binary grade");
      }
    } catch (const Error& error) {
      std::cerr << "[uq] warning: grading failed for prompt " << i << ": " << error.what()
                << "\n";
      continue;
    }
    TuningRecord record;
    record.prompt = prompts[i];
    record.ideal_response = ideals[i];
    record.scorer_scores = results[i].scores;
    record.grade = grade;
    records.push_back(std::move(record));
  }

  TuneResult tuned = tune_weights(records, options_.weights.scorer_ids(), objective, search,
                                  options_.max_in_flight);
  set_weights(tuned.weights);
  return tuned;
}

}  // namespace uq
