#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uqkit/backend.hpp"

namespace uq {

// Deterministic offline chat provider driven by a fixture table.
//
// Fixture file schema (JSON):
//   { "<prompt>": [ { "text": "...", "logprobs": [["tok", -0.1], ...] | null }, ... ], ... }
//
// Sample index i under seed s selects fixture entry ((s + i) mod list
// length), so multi-sample requests walk the entry list reproducibly.
// Unknown prompts fall back to default_entries when set, otherwise the
// call fails with TransportError (the standard per-prompt failure
// trigger in tests).
class MockChatProvider : public ChatProvider {
 public:
  struct Entry {
    std::string text;
    std::optional<std::vector<TokenLogprob>> token_logprobs;
  };

  MockChatProvider() = default;

  static MockChatProvider from_fixture_file(const std::string& path);

  void add_fixture(const std::string& prompt, std::vector<Entry> entries);
  void set_default_entries(std::vector<Entry> entries);
  void set_supports_logprobs(bool value) { supports_logprobs_ = value; }
  void set_counter(std::shared_ptr<TransportCounter> counter) { counter_ = std::move(counter); }

  // Per-call sleep of up to max_delay_ms, derived deterministically from
  // the request; used to fuzz completion order in concurrency tests.
  void set_randomized_delay(int max_delay_ms, std::uint64_t delay_seed);

  Generation complete(const ChatRequest& request, int sample_index) override;
  bool supports_logprobs() const override { return supports_logprobs_; }
  std::string id() const override { return "mock-chat"; }

 private:
  std::map<std::string, std::vector<Entry>> fixtures_;
  std::optional<std::vector<Entry>> default_entries_;
  bool supports_logprobs_ = true;
  int max_delay_ms_ = 0;
  std::uint64_t delay_seed_ = 0;
  std::shared_ptr<TransportCounter> counter_;
};

// Deterministic embedding provider. Registered texts return their fixture
// vector; any other text maps to a pseudo-random unit vector derived from
// the text alone, so equal texts always embed identically.
class MockEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit MockEmbeddingProvider(std::size_t dimension = 32);

  void register_embedding(const std::string& text, std::vector<double> values);
  void set_counter(std::shared_ptr<TransportCounter> counter) { counter_ = std::move(counter); }

  EmbeddingVector embed_one(const std::string& text) override;
  std::string id() const override { return "mock-embed"; }

 private:
  std::size_t dimension_;
  std::map<std::string, std::vector<double>> fixtures_;
  std::shared_ptr<TransportCounter> counter_;
};

// Deterministic entailment provider. Lookup order: exact fixture for the
// ordered (premise, hypothesis) pair, then the identity rule (identical
// strings entail with probability 1), then a neutral default.
class MockEntailmentProvider : public EntailmentProvider {
 public:
  MockEntailmentProvider() = default;

  static MockEntailmentProvider from_fixture_file(const std::string& path);

  // Validates the triple; both directions must be added separately.
  void add_fixture(const std::string& premise, const std::string& hypothesis,
                   double p_entail, double p_neutral, double p_contradict);
  void set_default_judgment(const EntailmentJudgment& judgment) { default_ = judgment; }
  void set_counter(std::shared_ptr<TransportCounter> counter) { counter_ = std::move(counter); }

  EntailmentJudgment entail(const std::string& premise,
                            const std::string& hypothesis) override;
  std::string id() const override { return "mock-entail"; }

 private:
  std::map<std::pair<std::string, std::string>, EntailmentJudgment> fixtures_;
  EntailmentJudgment default_{0.0, 1.0, 0.0};
  std::shared_ptr<TransportCounter> counter_;
};

}  // namespace uq
