#include "uqkit/mock_backend.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "uqkit/errors.hpp"

namespace uq {

namespace {

std::vector<MockChatProvider::Entry> parse_entries(const nlohmann::json& array,
                                                   const std::string& prompt) {
  if (!array.is_array() || array.empty()) {
    throw ValidationError("mock fixture for prompt '" + prompt +
                          "' must be a non-empty array");
  }
  std::vector<MockChatProvider::Entry> entries;
  entries.reserve(array.size());
  for (const auto& item : array) {
    MockChatProvider::Entry entry;
    entry.text = item.at("text").get<std::string>();
    if (item.contains("logprobs") && !item.at("logprobs").is_null()) {
      std::vector<TokenLogprob> logprobs;
      for (const auto& pair : item.at("logprobs")) {
        double lp = pair.at(1).get<double>();
        if (lp > 0.0) {
          // Some APIs emit tiny positive values from rounding; clamp, warn.
          std::cerr << "[uq] warning: clamping positive logprob " << lp
                    << " to 0 in mock fixture\n";
          lp = 0.0;
        }
        logprobs.push_back({pair.at(0).get<std::string>(), lp});
      }
      entry.token_logprobs = std::move(logprobs);
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace

MockChatProvider MockChatProvider::from_fixture_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open mock chat fixture file: " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("malformed mock chat fixture file " + path + ": " + ex.what());
  }
  if (!doc.is_object()) {
    throw ConfigError("mock chat fixture file must be a JSON object: " + path);
  }
  MockChatProvider provider;
  for (const auto& [prompt, entries] : doc.items()) {
    provider.add_fixture(prompt, parse_entries(entries, prompt));
  }
  return provider;
}

void MockChatProvider::add_fixture(const std::string& prompt,
                                   std::vector<Entry> entries) {
  if (entries.empty()) {
    throw ValidationError("mock fixture entry list must be non-empty");
  }
  fixtures_[prompt] = std::move(entries);
}

void MockChatProvider::set_default_entries(std::vector<Entry> entries) {
  if (entries.empty()) {
    throw ValidationError("mock default entry list must be non-empty");
  }
  default_entries_ = std::move(entries);
}

void MockChatProvider::set_randomized_delay(int max_delay_ms, std::uint64_t delay_seed) {
  max_delay_ms_ = max_delay_ms;
  delay_seed_ = delay_seed;
}

Generation MockChatProvider::complete(const ChatRequest& request, int sample_index) {
  if (counter_) {
    counter_->add_chat();
  }
  if (max_delay_ms_ > 0) {
    const std::uint64_t h = derive_seed(delay_seed_, request.prompt,
                                        static_cast<std::uint64_t>(sample_index) ^
                                            request.seed.value_or(0));
    std::this_thread::sleep_for(
        std::chrono::milliseconds(h % static_cast<std::uint64_t>(max_delay_ms_ + 1)));
  }

  const std::vector<Entry>* entries = nullptr;
  auto it = fixtures_.find(request.prompt);
  if (it != fixtures_.end()) {
    entries = &it->second;
  } else if (default_entries_.has_value()) {
    entries = &*default_entries_;
  } else {
    throw TransportError("mock chat provider has no fixture for prompt: " +
                         request.prompt);
  }

  const std::uint64_t seed = request.seed.value_or(0);
  const std::size_t index =
      static_cast<std::size_t>((seed + static_cast<std::uint64_t>(sample_index)) %
                               entries->size());
  const Entry& entry = (*entries)[index];

  Generation generation;
  generation.text = entry.text;
  if (request.want_logprobs) {
    generation.token_logprobs = entry.token_logprobs;
  }
  return generation;
}

MockEmbeddingProvider::MockEmbeddingProvider(std::size_t dimension)
    : dimension_(dimension) {
  if (dimension_ == 0) {
    throw ValidationError("mock embedding dimension must be positive");
  }
}

void MockEmbeddingProvider::register_embedding(const std::string& text,
                                               std::vector<double> values) {
  if (values.size() != dimension_) {
    throw DimensionMismatchError("registered embedding has dimension " +
                                 std::to_string(values.size()) + ", provider uses " +
                                 std::to_string(dimension_));
  }
  fixtures_[text] = std::move(values);
}

EmbeddingVector MockEmbeddingProvider::embed_one(const std::string& text) {
  if (counter_) {
    counter_->add_embed();
  }
  auto it = fixtures_.find(text);
  if (it != fixtures_.end()) {
    return EmbeddingVector{it->second};
  }

  // Pseudo-random unit vector keyed by the text content only.
  std::mt19937_64 rng(derive_seed(0x6d6f636b656d6264ULL, text, 0));
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> values(dimension_);
  double norm_sq = 0.0;
  for (double& v : values) {
    v = dist(rng);
    norm_sq += v * v;
  }
  if (norm_sq == 0.0) {
    values[0] = 1.0;
    norm_sq = 1.0;
  }
  const double inv_norm = 1.0 / std::sqrt(norm_sq);
  for (double& v : values) {
    v *= inv_norm;
  }
  return EmbeddingVector{std::move(values)};
}

MockEntailmentProvider MockEntailmentProvider::from_fixture_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open mock entailment fixture file: " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("malformed mock entailment fixture file " + path + ": " + ex.what());
  }
  if (!doc.is_array()) {
    throw ConfigError("mock entailment fixture file must be a JSON array: " + path);
  }
  MockEntailmentProvider provider;
  for (const auto& item : doc) {
    provider.add_fixture(item.at("premise").get<std::string>(),
                         item.at("hypothesis").get<std::string>(),
                         item.at("p_entail").get<double>(),
                         item.at("p_neutral").get<double>(),
                         item.at("p_contradict").get<double>());
  }
  return provider;
}

void MockEntailmentProvider::add_fixture(const std::string& premise,
                                         const std::string& hypothesis,
                                         double p_entail, double p_neutral,
                                         double p_contradict) {
  fixtures_[{premise, hypothesis}] =
      EntailmentJudgment::validated(p_entail, p_neutral, p_contradict);
}

EntailmentJudgment MockEntailmentProvider::entail(const std::string& premise,
                                                  const std::string& hypothesis) {
  if (counter_) {
    counter_->add_entail();
  }
  auto it = fixtures_.find({premise, hypothesis});
  if (it != fixtures_.end()) {
    return it->second;
  }
  if (premise == hypothesis) {
    return EntailmentJudgment{1.0, 0.0, 0.0};
  }
  return default_;
}

}  // namespace uq
