#include "uqkit/blackbox.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "uqkit/parallel.hpp"
#include "uqkit/similarity.hpp"

namespace uq {

namespace {

bool contains_name(const std::vector<std::string>& names, const std::string& name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

bool bidirectionally_entails(const std::string& a, const std::string& b,
                             EntailmentProvider& judge) {
  // A string trivially entails itself; skip the round trips.
  if (a == b) {
    return true;
  }
  const EntailmentJudgment forward = entail(judge, a, b);
  if (forward.argmax() != EntailmentJudgment::Class::kEntail) {
    return false;
  }
  const EntailmentJudgment backward = entail(judge, b, a);
  return backward.argmax() == EntailmentJudgment::Class::kEntail;
}

double mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (const double value : values) {
    sum += value;
  }
  return sum / static_cast<double>(values.size());
}

}  // namespace

void CandidateSet::validate() const {
  original.validate();
  if (candidates.empty()) {
    throw ValidationError("candidate set needs at least one sampled candidate");
  }
  for (const Generation& candidate : candidates) {
    candidate.validate();
  }
}

std::vector<std::string> CandidateSet::texts() const {
  std::vector<std::string> out;
  out.reserve(1 + candidates.size());
  out.push_back(original.text);
  for (const Generation& candidate : candidates) {
    out.push_back(candidate.text);
  }
  return out;
}

std::vector<std::size_t> SemanticClustering::cluster_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.reserve(members.size());
  for (const auto& cluster : members) {
    sizes.push_back(cluster.size());
  }
  return sizes;
}

std::size_t SemanticClustering::total() const {
  std::size_t count = 0;
  for (const auto& cluster : members) {
    count += cluster.size();
  }
  return count;
}

void SemanticClustering::validate(std::size_t expected_total) const {
  std::set<std::size_t> seen;
  for (const auto& cluster : members) {
    if (cluster.empty()) {
      throw ValidationError("clustering contains an empty cluster");
    }
    for (const std::size_t index : cluster) {
      if (index >= expected_total || !seen.insert(index).second) {
        throw ValidationError("clustering is not a partition of the response indices");
      }
    }
  }
  if (seen.size() != expected_total) {
    throw ValidationError("clustering does not cover every response index");
  }
}

CandidateSet generate_candidates(const std::string& prompt, int num_responses,
                                 ChatProvider& backend, const SamplingSettings& settings) {
  if (num_responses < 1) {
    throw ValidationError("num_responses must be at least 1");
  }

  ChatRequest original_request;
  original_request.prompt = prompt;
  original_request.sample_count = 1;
  original_request.temperature = settings.original_temperature;
  original_request.want_logprobs = settings.original_logprobs;
  original_request.seed = settings.original_seed;

  ChatRequest candidate_request;
  candidate_request.prompt = prompt;
  candidate_request.sample_count = num_responses;
  candidate_request.temperature = settings.candidate_temperature;
  candidate_request.want_logprobs = settings.candidate_logprobs;
  candidate_request.seed = settings.candidate_seed;

  CandidateSet set;
  set.prompt = prompt;
  set.original = chat_generate(backend, original_request).front();
  set.candidates = chat_generate(backend, candidate_request);
  return set;
}

double consistency_score(const CandidateSet& set, ConsistencyPrimitive primitive,
                         EmbeddingProvider* embedder, EntailmentProvider* judge) {
  set.validate();
  const std::vector<std::string> texts = set.texts();
  std::vector<std::size_t> others;
  for (std::size_t j = 1; j < texts.size(); ++j) {
    others.push_back(j);
  }

  std::vector<double> scores;
  scores.reserve(others.size());
  switch (primitive) {
    case ConsistencyPrimitive::kExactMatch:
      for (const std::size_t j : others) {
        scores.push_back(exact_match(texts[0], texts[j]));
      }
      break;
    case ConsistencyPrimitive::kCosine: {
      if (embedder == nullptr) {
        throw ConfigError("cosine consistency needs an embedding provider");
      }
      const std::vector<EmbeddingVector> vectors = embed(*embedder, texts);
      for (const std::size_t j : others) {
        scores.push_back(cosine_score(vectors[0], vectors[j]));
      }
      break;
    }
    case ConsistencyPrimitive::kBertscore: {
      if (embedder == nullptr) {
        throw ConfigError("bertscore consistency needs an embedding provider");
      }
      const TokenEmbeddingSequence center = token_embedding_sequence(texts[0], *embedder);
      for (const std::size_t j : others) {
        scores.push_back(bertscore_f1(center, token_embedding_sequence(texts[j], *embedder)));
      }
      break;
    }
    case ConsistencyPrimitive::kNoncontradiction:
      if (judge == nullptr) {
        throw ConfigError("noncontradiction consistency needs an entailment provider");
      }
      for (const std::size_t j : others) {
        scores.push_back(noncontradiction(texts[0], texts[j], *judge));
      }
      break;
  }
  return mean(scores);
}

SemanticClustering semantic_cluster(const std::vector<std::string>& responses,
                                    EntailmentProvider& judge) {
  if (responses.empty()) {
    throw ValidationError("semantic_cluster needs at least one response");
  }
  SemanticClustering clustering;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    bool placed = false;
    for (auto& cluster : clustering.members) {
      // The founding member stays the representative, so membership checks
      // cost at most two judgments per existing cluster.
      const std::string& representative = responses[cluster.front()];
      if (bidirectionally_entails(responses[i], representative, judge)) {
        cluster.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) {
      clustering.members.push_back({i});
    }
  }
  return clustering;
}

double semantic_entropy_confidence(const SemanticClustering& clustering) {
  const std::size_t n = clustering.total();
  if (n == 0) {
    throw ValidationError("semantic entropy needs a non-empty clustering");
  }
  if (n == 1) {
    return 1.0;
  }
  double entropy = 0.0;
  for (const std::size_t size : clustering.cluster_sizes()) {
    const double p = static_cast<double>(size) / static_cast<double>(n);
    entropy -= p * std::log(p);
  }
  const double confidence = 1.0 - entropy / std::log(static_cast<double>(n));
  return std::clamp(confidence, 0.0, 1.0);
}

std::size_t select_best_index(const SemanticClustering& clustering) {
  if (clustering.members.empty()) {
    throw ValidationError("select_best needs a non-empty clustering");
  }
  const auto contains_original = [](const std::vector<std::size_t>& cluster) {
    return std::find(cluster.begin(), cluster.end(), std::size_t{0}) != cluster.end();
  };
  std::size_t best = 0;
  for (std::size_t c = 1; c < clustering.members.size(); ++c) {
    const auto& candidate = clustering.members[c];
    const auto& incumbent = clustering.members[best];
    if (candidate.size() > incumbent.size()) {
      best = c;
    } else if (candidate.size() == incumbent.size() && contains_original(candidate) &&
               !contains_original(incumbent)) {
      best = c;
    }
    // Equal size with no original on either side keeps the earlier cluster.
  }
  return *std::min_element(clustering.members[best].begin(), clustering.members[best].end());
}

const Generation& select_best(const CandidateSet& set, const SemanticClustering& clustering) {
  clustering.validate(1 + set.candidates.size());
  const std::size_t index = select_best_index(clustering);
  return index == 0 ? set.original : set.candidates[index - 1];
}

const std::vector<std::string>& blackbox_scorer_names() {
  static const std::vector<std::string> names = {
      "exact_match", "cosine_sim", "bert_score", "noncontradiction", "semantic_entropy"};
  return names;
}

namespace {

void check_scorer_names(const std::vector<std::string>& scorers) {
  if (scorers.empty()) {
    throw ConfigError("no black-box scorers selected");
  }
  for (const std::string& name : scorers) {
    if (!contains_name(blackbox_scorer_names(), name)) {
      std::ostringstream message;
      message << "unknown black-box scorer '" << name << "'; valid scorers are:";
      for (const std::string& valid : blackbox_scorer_names()) {
        message << " " << valid;
      }
      throw ConfigError(message.str());
    }
  }
}

}  // namespace

BlackBoxEngine::BlackBoxEngine(std::shared_ptr<ChatProvider> chat,
                               std::shared_ptr<EmbeddingProvider> embedder,
                               std::shared_ptr<EntailmentProvider> judge,
                               BlackBoxOptions options)
    : chat_(std::move(chat)), embedder_(std::move(embedder)), judge_(std::move(judge)),
      options_(std::move(options)) {
  if (chat_ == nullptr) {
    throw ConfigError("black-box engine needs a chat provider");
  }
  check_scorer_names(options_.scorers);
  if (options_.num_responses < 1) {
    throw ConfigError("num_responses must be at least 1");
  }
  const bool needs_embedder = contains_name(options_.scorers, "cosine_sim") ||
                              contains_name(options_.scorers, "bert_score");
  if (needs_embedder && embedder_ == nullptr) {
    throw ConfigError("cosine_sim and bert_score need an embedding provider");
  }
  const bool needs_judge = contains_name(options_.scorers, "noncontradiction") ||
                           contains_name(options_.scorers, "semantic_entropy") ||
                           options_.use_best;
  if (needs_judge && judge_ == nullptr) {
    throw ConfigError("noncontradiction, semantic_entropy and use_best need an entailment provider");
  }
}

ScoreVector BlackBoxEngine::score_responses(const std::vector<std::string>& responses,
                                            std::size_t center_index,
                                            const std::vector<std::string>& scorers,
                                            EmbeddingProvider* embedder,
                                            EntailmentProvider* judge,
                                            const std::optional<SemanticClustering>& clustering) {
  check_scorer_names(scorers);
  if (responses.size() < 2) {
    throw ValidationError("consistency scoring needs at least two responses");
  }
  if (center_index >= responses.size()) {
    throw ValidationError("center index out of range");
  }

  std::vector<std::size_t> others;
  others.reserve(responses.size() - 1);
  for (std::size_t j = 0; j < responses.size(); ++j) {
    if (j != center_index) {
      others.push_back(j);
    }
  }

  ScoreVector scores;
  for (const std::string& name : scorers) {
    if (name == "exact_match") {
      std::vector<double> values;
      values.reserve(others.size());
      for (const std::size_t j : others) {
        values.push_back(exact_match(responses[center_index], responses[j]));
      }
      scores[name] = mean(values);
    } else if (name == "cosine_sim") {
      if (embedder == nullptr) {
        throw ConfigError("cosine_sim needs an embedding provider");
      }
      const std::vector<EmbeddingVector> vectors = embed(*embedder, responses);
      std::vector<double> values;
      values.reserve(others.size());
      for (const std::size_t j : others) {
        values.push_back(cosine_score(vectors[center_index], vectors[j]));
      }
      scores[name] = mean(values);
    } else if (name == "bert_score") {
      if (embedder == nullptr) {
        throw ConfigError("bert_score needs an embedding provider");
      }
      const TokenEmbeddingSequence center =
          token_embedding_sequence(responses[center_index], *embedder);
      std::vector<double> values;
      values.reserve(others.size());
      for (const std::size_t j : others) {
        values.push_back(bertscore_f1(center, token_embedding_sequence(responses[j], *embedder)));
      }
      scores[name] = mean(values);
    } else if (name == "noncontradiction") {
      if (judge == nullptr) {
        throw ConfigError("noncontradiction needs an entailment provider");
      }
      std::vector<double> values;
      values.reserve(others.size());
      for (const std::size_t j : others) {
        values.push_back(noncontradiction(responses[center_index], responses[j], *judge));
      }
      scores[name] = mean(values);
    } else if (name == "semantic_entropy") {
      SemanticClustering computed;
      const SemanticClustering* effective = nullptr;
      if (clustering.has_value()) {
        clustering->validate(responses.size());
        effective = &*clustering;
      } else {
        if (judge == nullptr) {
          throw ConfigError("semantic_entropy needs an entailment provider");
        }
        computed = semantic_cluster(responses, *judge);
        effective = &computed;
      }
      scores[name] = semantic_entropy_confidence(*effective);
    }
  }
  return scores;
}

std::vector<BlackBoxResult> BlackBoxEngine::generate_and_score(
    const std::vector<std::string>& prompts) {
  std::vector<BlackBoxResult> results(prompts.size());
  const bool needs_clustering =
      contains_name(options_.scorers, "semantic_entropy") || options_.use_best;

  parallel_for(prompts.size(), options_.max_in_flight, [&](std::size_t i) {
    BlackBoxResult result;
    result.prompt = prompts[i];
    try {
      SamplingSettings settings = options_.sampling;
      settings.original_seed = derive_seed(options_.seed, "chat.original", i);
      settings.candidate_seed = derive_seed(options_.seed, "chat.candidates", i);
      const CandidateSet set =
          generate_candidates(prompts[i], options_.num_responses, *chat_, settings);
      const std::vector<std::string> texts = set.texts();

      std::optional<SemanticClustering> clustering;
      if (needs_clustering) {
        clustering = semantic_cluster(texts, *judge_);
      }
      std::size_t center = 0;
      if (options_.use_best) {
        center = select_best_index(*clustering);
      }
      result.response = texts[center];
      result.scores = score_responses(texts, center, options_.scorers, embedder_.get(),
                                      judge_.get(), clustering);
    } catch (const Error& error) {
      result.error = error.what();
    }
    results[i] = std::move(result);
  });
  return results;
}

}  // namespace uq
