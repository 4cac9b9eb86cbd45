#include "uqkit/whitebox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uqkit/errors.hpp"
#include "uqkit/parallel.hpp"

namespace uq {

TokenProbSequence::TokenProbSequence(std::vector<double> logprobs)
    : logprobs_(std::move(logprobs)) {
  if (logprobs_.empty()) {
    throw EmptySequenceError("token probability sequence must be non-empty");
  }
  for (double lp : logprobs_) {
    if (!std::isfinite(lp) || lp > 0.0) {
      throw ValidationError("token logprob must be finite and <= 0, got " +
                            std::to_string(lp));
    }
  }
}

TokenProbSequence TokenProbSequence::from_generation(const Generation& generation) {
  if (!generation.token_logprobs.has_value()) {
    throw MissingLogprobsError("generation carries no token logprobs");
  }
  std::vector<double> logprobs;
  logprobs.reserve(generation.token_logprobs->size());
  for (const auto& entry : *generation.token_logprobs) {
    logprobs.push_back(entry.logprob);
  }
  return TokenProbSequence(std::move(logprobs));
}

double min_probability(const TokenProbSequence& seq) {
  const double lowest = *std::min_element(seq.logprobs().begin(), seq.logprobs().end());
  return std::exp(lowest);
}

double length_normalized_probability(const TokenProbSequence& seq) {
  const double sum = std::accumulate(seq.logprobs().begin(), seq.logprobs().end(), 0.0);
  double mean = sum / static_cast<double>(seq.logprobs().size());
  // Summation rounding can nudge the mean a hair below the minimum when all
  // entries are equal; the true mean is never below it.
  const double lowest = *std::min_element(seq.logprobs().begin(), seq.logprobs().end());
  mean = std::max(mean, lowest);
  return std::exp(mean);
}

const std::vector<std::string>& whitebox_scorer_names() {
  static const std::vector<std::string> kNames = {"min_probability",
                                                  "length_normalized_probability"};
  return kNames;
}

WhiteBoxEngine::WhiteBoxEngine(std::shared_ptr<ChatProvider> chat,
                               WhiteBoxOptions options)
    : chat_(std::move(chat)), options_(std::move(options)) {
  if (options_.scorers.empty()) {
    throw ConfigError("white-box scorer list must be non-empty");
  }
  const auto& known = whitebox_scorer_names();
  for (const auto& name : options_.scorers) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw ConfigError("unknown white-box scorer: '" + name + "'");
    }
  }
}

ScoreVector WhiteBoxEngine::score_generation(const Generation& generation,
                                             const std::vector<std::string>& scorers) {
  const TokenProbSequence seq = TokenProbSequence::from_generation(generation);
  ScoreVector scores;
  for (const auto& name : scorers) {
    if (name == "min_probability") {
      scores[name] = min_probability(seq);
    } else if (name == "length_normalized_probability") {
      scores[name] = length_normalized_probability(seq);
    } else {
      throw ConfigError("unknown white-box scorer: '" + name + "'");
    }
  }
  return scores;
}

std::vector<WhiteBoxResult> WhiteBoxEngine::generate_and_score(
    const std::vector<std::string>& prompts) {
  // Capability check happens before any generation is attempted.
  if (!chat_->supports_logprobs()) {
    throw CapabilityError("provider '" + chat_->id() +
                          "' does not support token logprobs");
  }
  std::vector<WhiteBoxResult> results(prompts.size());
  parallel_for(prompts.size(), options_.max_in_flight, [&](std::size_t i) {
    WhiteBoxResult& result = results[i];
    result.prompt = prompts[i];
    try {
      ChatRequest request;
      request.prompt = prompts[i];
      request.sample_count = 1;
      request.temperature = options_.temperature;
      request.want_logprobs = true;
      request.seed = derive_seed(options_.seed, "whitebox.generate", i);
      const Generation generation = chat_generate(*chat_, request).front();
      result.response = generation.text;
      result.scores = score_generation(generation, options_.scorers);
    } catch (const Error& error) {
      result.error = error.what();
    }
  });
  return results;
}

}  // namespace uq
