#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uqkit/errors.hpp"

namespace uq {

// One chat completion request. sample_count is the number of sampled
// generations to return; temperature and seed steer sampling.
struct ChatRequest {
  std::string prompt;
  int sample_count = 1;
  double temperature = 0.0;
  bool want_logprobs = false;
  std::optional<std::uint64_t> seed;

  // Throws ValidationError unless sample_count >= 1 and temperature >= 0.
  void validate() const;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;  // always <= 0

  bool operator==(const TokenLogprob&) const = default;
};

// One sampled response. token_logprobs is present only when the request
// asked for logprobs and the provider supports them.
struct Generation {
  std::string text;
  std::optional<std::vector<TokenLogprob>> token_logprobs;

  // Enforces: every logprob <= 0 and finite; when present for non-empty
  // text, the token list is non-empty.
  void validate() const;

  bool operator==(const Generation&) const = default;
};

// NLI class probabilities for an ordered (premise, hypothesis) pair.
struct EntailmentJudgment {
  double p_entail = 0.0;
  double p_neutral = 0.0;
  double p_contradict = 0.0;

  // Validating factory: each probability in [0,1], sum within 1e-6 of 1.
  // No silent clamping; out-of-spec triples throw ValidationError.
  static EntailmentJudgment validated(double p_entail, double p_neutral,
                                      double p_contradict);

  // Argmax class with deterministic tie-break (entail > neutral > contradict).
  enum class Class { kEntail, kNeutral, kContradict };
  Class argmax() const;
};

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }

  void validate() const;
};

// Named scorer -> confidence in [0,1] for one prompt.
using ScoreVector = std::map<std::string, double>;

// 64-bit seed derivation: a counter-based splitting scheme so every
// subsystem draws from an independent, reproducible stream of the single
// run seed. splitmix64 finalizer over (seed, fnv1a(stream), counter).
std::uint64_t derive_seed(std::uint64_t base_seed, const std::string& stream,
                          std::uint64_t counter);

// Leading/trailing ASCII whitespace removed.
std::string trim(const std::string& text);

}  // namespace uq
