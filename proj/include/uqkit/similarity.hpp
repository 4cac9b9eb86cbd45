#pragma once

#include <string>
#include <vector>

#include "uqkit/backend.hpp"
#include "uqkit/types.hpp"

namespace uq {

// Per-token embeddings for one text, tokens and vectors kept parallel.
struct TokenEmbeddingSequence {
  std::vector<std::string> tokens;
  std::vector<EmbeddingVector> vectors;

  void validate() const;
};

// 1 iff trim(a) == trim(b), case-sensitive; else 0.
double exact_match(const std::string& a, const std::string& b);

// (1 + cos(a, b)) / 2, mapping cosine's [-1,1] onto [0,1]. Identical
// vectors return exactly 1. Throws ZeroVectorError / DimensionMismatchError.
double cosine_score(const EmbeddingVector& a, const EmbeddingVector& b);

// Greedy-max token matching: recall is the mean over tokens of a of the
// best clamped-at-zero cosine against tokens of b, precision is the
// mirror image, and the result is their harmonic mean (0 when both are 0).
double bertscore_f1(const TokenEmbeddingSequence& a, const TokenEmbeddingSequence& b);

// Direction-symmetrized non-contradiction probability:
// mean of (1 - p_contradict(a->b)) and (1 - p_contradict(b->a)).
double noncontradiction(const std::string& a, const std::string& b,
                        EntailmentProvider& judge);

// Whitespace-delimited tokens (the tokenization bertscore_f1 consumes).
std::vector<std::string> whitespace_tokens(const std::string& text);

// Tokenizes text and embeds each token with the provider.
TokenEmbeddingSequence token_embedding_sequence(const std::string& text,
                                                EmbeddingProvider& provider);

}  // namespace uq
