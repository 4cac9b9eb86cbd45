#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "uqkit/backend.hpp"

namespace uq {

// Connection settings for an OpenAI-compatible endpoint. base_url may carry
// a path prefix (e.g. "http://127.0.0.1:8080/v1").
struct HttpSettings {
  std::string base_url;
  std::string api_key;  // empty: no Authorization header
  std::string chat_model = "gpt-4o-mini";
  std::string embedding_model = "text-embedding-3-small";
  int max_attempts = 3;           // transport/5xx failures only
  int initial_backoff_ms = 250;   // doubled per retry
  int timeout_ms = 30000;
  bool logprobs_supported = true;

  // Reads UQ_API_BASE and UQ_API_KEY; unset variables leave fields empty.
  static HttpSettings from_env();
};

// POST {base}/chat/completions, one call per sample (n = 1), so cache keys
// and call budgets stay per-sample. The request seed, when present, is sent
// as seed + sample_index to diversify samples deterministically.
class OpenAiChatProvider : public ChatProvider {
 public:
  explicit OpenAiChatProvider(HttpSettings settings,
                              std::shared_ptr<TransportCounter> counter = nullptr);

  Generation complete(const ChatRequest& request, int sample_index) override;
  bool supports_logprobs() const override { return settings_.logprobs_supported; }
  std::string id() const override;

 private:
  HttpSettings settings_;
  std::shared_ptr<TransportCounter> counter_;
};

// POST {base}/embeddings, one call per text.
class OpenAiEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit OpenAiEmbeddingProvider(HttpSettings settings,
                                   std::shared_ptr<TransportCounter> counter = nullptr);

  EmbeddingVector embed_one(const std::string& text) override;
  std::string id() const override;

 private:
  HttpSettings settings_;
  std::shared_ptr<TransportCounter> counter_;
};

// Prompt template asking a chat model for the three NLI probabilities as a
// JSON object. Placeholders: {premise}, {hypothesis}.
extern const char kEntailmentPromptTemplate[];

// Serves entailment through any chat provider by prompting for a JSON
// triple and validating it. One call per judgment.
class ChatEntailmentAdapter : public EntailmentProvider {
 public:
  explicit ChatEntailmentAdapter(std::shared_ptr<ChatProvider> chat,
                                 double temperature = 0.0);

  EntailmentJudgment entail(const std::string& premise, const std::string& hypothesis) override;
  std::string id() const override;

 private:
  std::shared_ptr<ChatProvider> chat_;
  double temperature_;
};

}  // namespace uq
