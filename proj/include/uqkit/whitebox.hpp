#pragma once

#include <memory>
#include <string>
#include <vector>

#include "uqkit/backend.hpp"
#include "uqkit/types.hpp"

namespace uq {

// Non-empty sequence of token log-probabilities, each finite and <= 0.
class TokenProbSequence {
 public:
  explicit TokenProbSequence(std::vector<double> logprobs);

  // Throws MissingLogprobsError when the generation has no token_logprobs.
  static TokenProbSequence from_generation(const Generation& generation);

  const std::vector<double>& logprobs() const { return logprobs_; }

 private:
  std::vector<double> logprobs_;
};

// exp(min of logprobs): probability of the least likely token.
double min_probability(const TokenProbSequence& seq);

// exp(mean of logprobs): the geometric mean of token probabilities.
double length_normalized_probability(const TokenProbSequence& seq);

const std::vector<std::string>& whitebox_scorer_names();

struct WhiteBoxResult {
  std::string prompt;
  std::string response;
  ScoreVector scores;
  std::optional<std::string> error;
};

struct WhiteBoxOptions {
  std::vector<std::string> scorers = whitebox_scorer_names();
  double temperature = 0.0;
  std::uint64_t seed = 0;
  int max_in_flight = 4;
};

// One generation per prompt with logprobs requested; no extra chat calls.
class WhiteBoxEngine {
 public:
  WhiteBoxEngine(std::shared_ptr<ChatProvider> chat, WhiteBoxOptions options);

  std::vector<WhiteBoxResult> generate_and_score(const std::vector<std::string>& prompts);

  // Scores an already-generated response; shared with the ensemble path.
  static ScoreVector score_generation(const Generation& generation,
                                      const std::vector<std::string>& scorers);

 private:
  std::shared_ptr<ChatProvider> chat_;
  WhiteBoxOptions options_;
};

}  // namespace uq
