#include "uqkit/backend.hpp"

#include "uqkit/errors.hpp"

namespace uq {

std::vector<Generation> chat_generate(ChatProvider& provider,
                                      const ChatRequest& request) {
  request.validate();
  if (request.want_logprobs && !provider.supports_logprobs()) {
    throw CapabilityError("provider '" + provider.id() +
                          "' does not support token logprobs");
  }
  std::vector<Generation> generations;
  generations.reserve(static_cast<std::size_t>(request.sample_count));
  for (int i = 0; i < request.sample_count; ++i) {
    Generation generation = provider.complete(request, i);
    generation.validate();
    if (request.want_logprobs && !generation.token_logprobs.has_value()) {
      throw CapabilityError("provider '" + provider.id() +
                            "' returned no logprobs for a logprob request");
    }
    generations.push_back(std::move(generation));
  }
  return generations;
}

std::vector<EmbeddingVector> embed(EmbeddingProvider& provider,
                                   const std::vector<std::string>& texts) {
  if (texts.empty()) {
    throw ValidationError("embed() requires at least one text");
  }
  std::vector<EmbeddingVector> vectors;
  vectors.reserve(texts.size());
  for (const auto& text : texts) {
    if (trim(text).empty()) {
      throw ValidationError("embed() rejects texts that are empty after trimming");
    }
    EmbeddingVector vector = provider.embed_one(text);
    vector.validate();
    if (!vectors.empty() && vector.dimension() != vectors.front().dimension()) {
      throw DimensionMismatchError(
          "provider '" + provider.id() + "' returned ragged embedding dimensions: " +
          std::to_string(vectors.front().dimension()) + " vs " +
          std::to_string(vector.dimension()));
    }
    vectors.push_back(std::move(vector));
  }
  return vectors;
}

EntailmentJudgment entail(EntailmentProvider& provider,
                          const std::string& premise,
                          const std::string& hypothesis) {
  if (trim(premise).empty() || trim(hypothesis).empty()) {
    throw ValidationError("entail() rejects texts that are empty after trimming");
  }
  EntailmentJudgment judgment = provider.entail(premise, hypothesis);
  // Re-validate at the boundary so provider bugs cannot leak bad triples.
  return EntailmentJudgment::validated(judgment.p_entail, judgment.p_neutral,
                                       judgment.p_contradict);
}

}  // namespace uq
