#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "uqkit/types.hpp"

namespace uq {

// Counts calls at the transport boundary, by operation kind. Injected into
// providers so tests and the run summary can account for every call. Cache
// replay hits never touch the counter.
class TransportCounter {
 public:
  void add_chat() { chat_.fetch_add(1, std::memory_order_relaxed); }
  void add_embed() { embed_.fetch_add(1, std::memory_order_relaxed); }
  void add_entail() { entail_.fetch_add(1, std::memory_order_relaxed); }

  std::uint64_t chat_calls() const { return chat_.load(std::memory_order_relaxed); }
  std::uint64_t embed_calls() const { return embed_.load(std::memory_order_relaxed); }
  std::uint64_t entail_calls() const { return entail_.load(std::memory_order_relaxed); }
  std::uint64_t total() const { return chat_calls() + embed_calls() + entail_calls(); }

  void reset() {
    chat_ = 0;
    embed_ = 0;
    entail_ = 0;
  }

 private:
  std::atomic<std::uint64_t> chat_{0};
  std::atomic<std::uint64_t> embed_{0};
  std::atomic<std::uint64_t> entail_{0};
};

// Chat generation provider. One transport call produces one sample; the
// chat_generate() wrapper below fans a multi-sample request out into
// sample_count calls so call budgets and cache keys stay per-sample.
// Implementations must be safe to call from multiple threads.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;

  // Returns the sample at sample_index (0-based, < request.sample_count).
  virtual Generation complete(const ChatRequest& request, int sample_index) = 0;

  virtual bool supports_logprobs() const = 0;
  virtual std::string id() const = 0;
};

// Text embedding provider; one transport call per text.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual EmbeddingVector embed_one(const std::string& text) = 0;
  virtual std::string id() const = 0;
};

// Pairwise entailment classification (NLI) provider.
class EntailmentProvider {
 public:
  virtual ~EntailmentProvider() = default;

  virtual EntailmentJudgment entail(const std::string& premise,
                                    const std::string& hypothesis) = 0;
  virtual std::string id() const = 0;
};

// Generates exactly request.sample_count generations, in sample order.
// Throws CapabilityError up front when want_logprobs is set on a provider
// without logprob support; validates every returned Generation.
std::vector<Generation> chat_generate(ChatProvider& provider,
                                      const ChatRequest& request);

// One embedding per input text, same order, all the same dimension.
// Preconditions: texts non-empty, each text non-empty after trimming.
std::vector<EmbeddingVector> embed(EmbeddingProvider& provider,
                                   const std::vector<std::string>& texts);

// Validated entailment judgment for non-empty premise and hypothesis.
EntailmentJudgment entail(EntailmentProvider& provider,
                          const std::string& premise,
                          const std::string& hypothesis);

}  // namespace uq
