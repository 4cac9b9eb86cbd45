#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uqkit/backend.hpp"
#include "uqkit/blackbox.hpp"
#include "uqkit/judge.hpp"
#include "uqkit/types.hpp"

namespace uq {

// Convex weights over named scorers, optionally with a decision threshold
// fitted for threshold-dependent objectives.
struct EnsembleWeights {
  std::vector<std::pair<std::string, double>> entries;  // component order
  std::optional<double> threshold;

  // All weights >= 0, summing to 1 within 1e-9, ids unique and non-empty,
  // threshold (when set) in [0,1].
  void validate() const;

  static EnsembleWeights uniform(const std::vector<std::string>& scorer_ids);

  std::vector<std::string> scorer_ids() const;
};

// Weighted average of the named component scores. Throws MissingScorerError
// when scores lacks a component.
double ensemble_score(const ScoreVector& scores, const EnsembleWeights& weights);

// The off-the-shelf component set.
const std::vector<std::string>& default_ensemble_components();

// Uniform weights over the off-the-shelf components.
EnsembleWeights default_ensemble();

// Grades one response against the ideal answer; returns 0 or 1, throws on
// grading failure.
using Grader = std::function<int(const std::string& response, const std::string& ideal)>;

// 1 iff the trimmed texts match exactly.
int exact_match_grade(const std::string& response, const std::string& ideal);
Grader exact_match_grader();

// Grading prompt comparing a response to the reference answer; reply parses
// under the binary template. Placeholders: {ideal}, {response}.
extern const char kGraderPromptTemplate[];

// LLM grader: renders kGraderPromptTemplate, asks the provider, parses a
// binary verdict with one stricter retry. ParseFailure after the retry.
Grader judge_grader(std::shared_ptr<ChatProvider> provider, double temperature = 0.0,
                    std::uint64_t seed = 0);

// One grade per response; a grader failure leaves that slot empty and prints
// a warning so the item can be excluded from tuning.
std::vector<std::optional<int>> grade_responses(const std::vector<std::string>& responses,
                                                const std::vector<std::string>& ideals,
                                                const Grader& grader);

// Mann-Whitney ROC-AUC with tie handling, computed from integer rank sums
// so the result is exactly the pair-counting value. Labels are 0/1; needs
// both classes (DegenerateLabelsError otherwise).
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct Objective {
  enum class Kind { kRocAuc, kF1, kAccuracy };
  Kind kind = Kind::kRocAuc;

  static Objective from_name(const std::string& name);  // ConfigError
  std::string name() const;
  bool threshold_dependent() const { return kind != Kind::kRocAuc; }
};

// F1 or accuracy at the given threshold; predicts positive iff
// score >= threshold. F1 with no positive labels throws
// DegenerateLabelsError; F1 is 0 when precision + recall is 0.
double threshold_metric(const std::vector<double>& scores, const std::vector<int>& labels,
                        double threshold, Objective::Kind kind);

// Candidate decision thresholds for a score sample: 0, the midpoints of
// adjacent distinct scores, and 1, ascending and deduplicated.
std::vector<double> threshold_candidates(std::vector<double> scores);

struct TuningRecord {
  std::string prompt;
  std::string ideal_response;
  ScoreVector scorer_scores;
  int grade = 0;  // 0 or 1
};

struct SearchConfig {
  double grid_step = 0.05;      // exhaustive simplex grid for k <= 3
  int dirichlet_samples = 20000;  // seeded random search for k >= 4
  double refine_initial_step = 0.05;
  double refine_final_step = 0.00625;  // halved until below this
  int max_refine_passes = 100;
  std::uint64_t seed = 0;
};

struct TuneResult {
  EnsembleWeights weights;  // threshold set iff the objective needs one
  Objective objective;
  double objective_value = 0.0;
  SearchConfig search;
  std::string method;  // "grid" or "dirichlet_refine"
};

// Fits simplex weights (and a threshold for f1/accuracy) maximizing the
// objective over a deterministic search set. Ties keep the first vector in
// search order. Requires both grade classes among the records.
TuneResult tune_weights(const std::vector<TuningRecord>& records,
                        const std::vector<std::string>& scorer_ids, Objective objective,
                        const SearchConfig& search, int max_in_flight = 4);

// Weights persistence: a JSON object mapping each scorer_id to its weight,
// plus the reserved keys threshold, objective, objective_value,
// search_config and seed.
void save_weights(const TuneResult& result, const std::string& path);
EnsembleWeights load_weights(const std::string& path);

struct EnsembleOptions {
  EnsembleWeights weights = default_ensemble();
  int num_responses = 5;
  bool use_best = false;
  SamplingSettings sampling;
  std::vector<JudgeSpec> judges;  // needed when components include judge ids
  std::uint64_t seed = 0;
  int max_in_flight = 4;
};

struct EnsembleResult {
  std::string prompt;
  std::string response;
  ScoreVector scores;  // one entry per ensemble component
  std::optional<double> ensemble;
  std::optional<std::string> error;
};

// Runs every component family over a single shared generation pass per
// prompt, then combines the component scores into the ensemble score.
class EnsembleEngine {
 public:
  EnsembleEngine(std::shared_ptr<ChatProvider> chat,
                 std::shared_ptr<EmbeddingProvider> embedder,
                 std::shared_ptr<EntailmentProvider> entail, EnsembleOptions options);

  std::vector<EnsembleResult> generate_and_score(const std::vector<std::string>& prompts);

  // Scores the prompts, grades them against the ideals, fits weights, and
  // keeps the tuned weights for subsequent scoring calls.
  TuneResult tune(const std::vector<std::string>& prompts,
                  const std::vector<std::string>& ideals, const Grader& grader,
                  Objective objective, const SearchConfig& search);

  const EnsembleWeights& weights() const { return options_.weights; }
  void set_weights(EnsembleWeights weights);

 private:
  std::shared_ptr<ChatProvider> chat_;
  std::shared_ptr<EmbeddingProvider> embedder_;
  std::shared_ptr<EntailmentProvider> entail_;
  EnsembleOptions options_;
  std::vector<std::string> blackbox_components_;
  std::vector<std::string> whitebox_components_;
  std::vector<std::string> judge_components_;
  std::optional<PanelEngine> panel_;
};

}  // namespace uq
