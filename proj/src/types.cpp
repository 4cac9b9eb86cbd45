#include "uqkit/types.hpp"

#include <cmath>

namespace uq {

void ChatRequest::validate() const {
  if (sample_count < 1) {
    throw ValidationError("ChatRequest.sample_count must be >= 1, got " +
                          std::to_string(sample_count));
  }
  if (!(temperature >= 0.0)) {
    throw ValidationError("ChatRequest.temperature must be >= 0, got " +
                          std::to_string(temperature));
  }
}

void Generation::validate() const {
  if (!token_logprobs.has_value()) {
    return;
  }
  if (token_logprobs->empty() && !text.empty()) {
    throw ValidationError("Generation.token_logprobs present but empty for non-empty text");
  }
  for (const auto& entry : *token_logprobs) {
    if (!std::isfinite(entry.logprob) || entry.logprob > 0.0) {
      throw ValidationError("token logprob must be finite and <= 0, got " +
                            std::to_string(entry.logprob) + " for token '" +
                            entry.token + "'");
    }
  }
}

EntailmentJudgment EntailmentJudgment::validated(double p_entail,
                                                 double p_neutral,
                                                 double p_contradict) {
  auto in_unit = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
  if (!in_unit(p_entail) || !in_unit(p_neutral) || !in_unit(p_contradict)) {
    throw ValidationError("entailment probabilities must each lie in [0,1]");
  }
  const double sum = p_entail + p_neutral + p_contradict;
  if (sum < 1.0 - 1e-6 || sum > 1.0 + 1e-6) {
    throw ValidationError("entailment probabilities must sum to 1, got " +
                          std::to_string(sum));
  }
  return EntailmentJudgment{p_entail, p_neutral, p_contradict};
}

EntailmentJudgment::Class EntailmentJudgment::argmax() const {
  if (p_entail >= p_neutral && p_entail >= p_contradict) {
    return Class::kEntail;
  }
  if (p_neutral >= p_contradict) {
    return Class::kNeutral;
  }
  return Class::kContradict;
}

void EmbeddingVector::validate() const {
  if (values.empty()) {
    throw ValidationError("embedding vector must have positive dimension");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw ValidationError("embedding vector contains a non-finite value");
    }
  }
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base_seed, const std::string& stream,
                          std::uint64_t counter) {
  return splitmix64(splitmix64(base_seed ^ fnv1a(stream)) ^ counter);
}

std::string trim(const std::string& text) {
  auto is_space = [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && is_space(static_cast<unsigned char>(text[begin]))) {
    ++begin;
  }
  while (end > begin && is_space(static_cast<unsigned char>(text[end - 1]))) {
    --end;
  }
  return text.substr(begin, end - begin);
}

}  // namespace uq
