#include "uqkit/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "uqkit/errors.hpp"

namespace uq {

namespace {

double raw_cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw DimensionMismatchError("cosine of vectors with dimensions " +
                                 std::to_string(a.dimension()) + " and " +
                                 std::to_string(b.dimension()));
  }
  if (a.values == b.values) {
    double norm_sq = 0.0;
    for (double v : a.values) {
      norm_sq += v * v;
    }
    if (norm_sq == 0.0) {
      throw ZeroVectorError("cosine of an all-zero vector is undefined");
    }
    return 1.0;
  }
  double dot = 0.0;
  double norm_a = 0.0;
  double norm_b = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    norm_a += a.values[i] * a.values[i];
    norm_b += b.values[i] * b.values[i];
  }
  if (norm_a == 0.0 || norm_b == 0.0) {
    throw ZeroVectorError("cosine of an all-zero vector is undefined");
  }
  const double cosine = dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
  return std::clamp(cosine, -1.0, 1.0);
}

}  // namespace

void TokenEmbeddingSequence::validate() const {
  if (tokens.empty() || vectors.empty()) {
    throw ValidationError("token embedding sequence must be non-empty");
  }
  if (tokens.size() != vectors.size()) {
    throw ValidationError("token embedding sequence has " +
                          std::to_string(tokens.size()) + " tokens but " +
                          std::to_string(vectors.size()) + " vectors");
  }
}

double exact_match(const std::string& a, const std::string& b) {
  return trim(a) == trim(b) ? 1.0 : 0.0;
}

double cosine_score(const EmbeddingVector& a, const EmbeddingVector& b) {
  return (1.0 + raw_cosine(a, b)) / 2.0;
}

double bertscore_f1(const TokenEmbeddingSequence& a, const TokenEmbeddingSequence& b) {
  a.validate();
  b.validate();

  auto directional_mean = [](const TokenEmbeddingSequence& from,
                             const TokenEmbeddingSequence& to) {
    double sum = 0.0;
    for (const auto& vector : from.vectors) {
      double best = 0.0;  // clamp at zero, so anti-matches contribute nothing
      for (const auto& other : to.vectors) {
        best = std::max(best, raw_cosine(vector, other));
      }
      sum += best;
    }
    return sum / static_cast<double>(from.vectors.size());
  };

  const double recall = directional_mean(a, b);
  const double precision = directional_mean(b, a);
  if (precision + recall == 0.0) {
    return 0.0;
  }
  return 2.0 * precision * recall / (precision + recall);
}

double noncontradiction(const std::string& a, const std::string& b,
                        EntailmentProvider& judge) {
  const EntailmentJudgment forward = entail(judge, a, b);
  const EntailmentJudgment backward = entail(judge, b, a);
  return ((1.0 - forward.p_contradict) + (1.0 - backward.p_contradict)) / 2.0;
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::istringstream stream(text);
  std::vector<std::string> tokens;
  std::string token;
  while (stream >> token) {
    tokens.push_back(token);
  }
  return tokens;
}

TokenEmbeddingSequence token_embedding_sequence(const std::string& text,
                                                EmbeddingProvider& provider) {
  TokenEmbeddingSequence sequence;
  sequence.tokens = whitespace_tokens(text);
  if (sequence.tokens.empty()) {
    throw ValidationError("cannot build a token embedding sequence from empty text");
  }
  sequence.vectors = embed(provider, sequence.tokens);
  return sequence;
}

}  // namespace uq
