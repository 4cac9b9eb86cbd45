#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uqkit/backend.hpp"
#include "uqkit/types.hpp"

namespace uq {

// Original response plus m sampled candidates for one prompt.
struct CandidateSet {
  std::string prompt;
  Generation original;
  std::vector<Generation> candidates;  // m >= 1

  void validate() const;

  // Response texts in generation order: original first, then candidates.
  std::vector<std::string> texts() const;
};

// Partition of n responses into meaning-equivalence clusters, in founding
// order. Member indices are generation indices (0 = original).
struct SemanticClustering {
  std::vector<std::vector<std::size_t>> members;

  std::vector<std::size_t> cluster_sizes() const;
  std::size_t total() const;
  void validate(std::size_t expected_total) const;
};

// Temperatures for the original response and the sampled candidates are
// separate knobs; the seeds select mock fixture entries and steer
// remote sampling.
struct SamplingSettings {
  double original_temperature = 0.0;
  double candidate_temperature = 1.0;
  bool original_logprobs = false;
  bool candidate_logprobs = false;
  std::optional<std::uint64_t> original_seed;
  std::optional<std::uint64_t> candidate_seed;
};

// Generates 1 original + num_responses candidates (1 + m chat calls).
CandidateSet generate_candidates(const std::string& prompt, int num_responses,
                                 ChatProvider& backend,
                                 const SamplingSettings& settings);

enum class ConsistencyPrimitive { kExactMatch, kCosine, kBertscore, kNoncontradiction };

// Mean of primitive(original, candidate_j) over the m candidates.
// embedder is required for cosine/bertscore, judge for noncontradiction.
double consistency_score(const CandidateSet& set, ConsistencyPrimitive primitive,
                         EmbeddingProvider* embedder, EntailmentProvider* judge);

// Incremental clustering: response i joins the first existing cluster whose
// representative (first member) it bidirectionally entails, meaning the
// argmax NLI class is `entail` in both directions; otherwise it founds a
// new cluster. Entailment calls are issued in deterministic sequential order.
SemanticClustering semantic_cluster(const std::vector<std::string>& responses,
                                    EntailmentProvider& judge);

// 1 - H/ln(n) with H the entropy of cluster occupancy; 1.0 for n = 1.
// Clamped to [0,1] against floating-point drift.
double semantic_entropy_confidence(const SemanticClustering& clustering);

// Earliest-generated member of the largest cluster. Size ties prefer the
// cluster containing the original, then the lowest founding index.
const Generation& select_best(const CandidateSet& set,
                              const SemanticClustering& clustering);

// Index-returning variant (0 = original, j >= 1 = candidates[j-1]).
std::size_t select_best_index(const SemanticClustering& clustering);

const std::vector<std::string>& blackbox_scorer_names();

struct BlackBoxResult {
  std::string prompt;
  std::string response;  // original, or the selected response under use_best
  ScoreVector scores;
  std::optional<std::string> error;
};

struct BlackBoxOptions {
  std::vector<std::string> scorers;  // subset of blackbox_scorer_names()
  int num_responses = 5;
  bool use_best = false;
  SamplingSettings sampling;
  std::uint64_t seed = 0;
  int max_in_flight = 4;
};

// Sample-and-compare workflow: sample candidates per prompt, score
// consistency, and optionally re-center on the uncertainty-minimized
// response.
class BlackBoxEngine {
 public:
  BlackBoxEngine(std::shared_ptr<ChatProvider> chat,
                 std::shared_ptr<EmbeddingProvider> embedder,
                 std::shared_ptr<EntailmentProvider> judge, BlackBoxOptions options);

  std::vector<BlackBoxResult> generate_and_score(const std::vector<std::string>& prompts);

  // Scores one prompt's already-generated responses, centered on
  // center_index. Shared with the ensemble pipeline.
  static ScoreVector score_responses(const std::vector<std::string>& responses,
                                     std::size_t center_index,
                                     const std::vector<std::string>& scorers,
                                     EmbeddingProvider* embedder,
                                     EntailmentProvider* judge,
                                     const std::optional<SemanticClustering>& clustering);

 private:
  std::shared_ptr<ChatProvider> chat_;
  std::shared_ptr<EmbeddingProvider> embedder_;
  std::shared_ptr<EntailmentProvider> judge_;
  BlackBoxOptions options_;
};

}  // namespace uq
