#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uqkit/blackbox.hpp"
#include "uqkit/ensemble.hpp"
#include "uqkit/judge.hpp"
#include "uqkit/mock_backend.hpp"
#include "uqkit/similarity.hpp"
#include "uqkit/types.hpp"
#include "uqkit/whitebox.hpp"

namespace py = pybind11;

namespace {

uq::TokenEmbeddingSequence make_sequence(const std::vector<std::string>& tokens,
                                         const std::vector<std::vector<double>>& vectors) {
  uq::TokenEmbeddingSequence seq;
  seq.tokens = tokens;
  for (const std::vector<double>& values : vectors) {
    seq.vectors.push_back(uq::EmbeddingVector{values});
  }
  seq.validate();
  return seq;
}

std::vector<uq::MockChatProvider::Entry> entries_from_texts(
    const std::vector<std::string>& texts) {
  std::vector<uq::MockChatProvider::Entry> entries;
  for (const std::string& text : texts) {
    entries.push_back({text, std::nullopt});
  }
  return entries;
}

uq::EnsembleWeights weights_from_pairs(
    const std::vector<std::pair<std::string, double>>& entries,
    const std::optional<double>& threshold) {
  uq::EnsembleWeights weights;
  weights.entries = entries;
  weights.threshold = threshold;
  weights.validate();
  return weights;
}

py::dict blackbox_result_dict(const uq::BlackBoxResult& result) {
  py::dict d;
  d["prompt"] = result.prompt;
  d["response"] = result.response;
  d["scores"] = result.scores;
  d["error"] = result.error;
  return d;
}

py::dict whitebox_result_dict(const uq::WhiteBoxResult& result) {
  py::dict d;
  d["prompt"] = result.prompt;
  d["response"] = result.response;
  d["scores"] = result.scores;
  d["error"] = result.error;
  return d;
}

py::dict ensemble_result_dict(const uq::EnsembleResult& result) {
  py::dict d;
  d["prompt"] = result.prompt;
  d["response"] = result.response;
  d["scores"] = result.scores;
  d["ensemble_score"] = result.ensemble;
  d["error"] = result.error;
  return d;
}

py::dict tune_result_dict(const uq::TuneResult& result) {
  py::dict d;
  d["weights"] = result.weights.entries;
  d["threshold"] = result.weights.threshold;
  d["objective"] = result.objective.name();
  d["objective_value"] = result.objective_value;
  d["method"] = result.method;
  return d;
}

std::vector<uq::JudgeSpec> judges_from_pairs(
    const std::vector<std::pair<std::string, std::string>>& judges,
    const std::shared_ptr<uq::ChatProvider>& provider) {
  std::vector<uq::JudgeSpec> specs;
  for (const auto& [judge_id, template_name] : judges) {
    uq::JudgeSpec spec;
    spec.judge_id = judge_id;
    spec.scoring = uq::ScoringTemplate::from_name(template_name);
    spec.provider = provider;
    specs.push_back(std::move(spec));
  }
  return specs;
}

}  // namespace

PYBIND11_MODULE(_uqkit, m) {
  m.doc() = "confidence scoring for language model responses";

  py::register_exception<uq::Error>(m, "UqError");

  m.def("derive_seed", &uq::derive_seed, py::arg("base_seed"), py::arg("stream"),
        py::arg("counter"),
        "independent reproducible seed for a named stream of a base seed");

  // similarity primitives
  m.def("exact_match", &uq::exact_match, py::arg("a"), py::arg("b"));
  m.def(
      "cosine_score",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        return uq::cosine_score(uq::EmbeddingVector{a}, uq::EmbeddingVector{b});
      },
      py::arg("a"), py::arg("b"), "(1 + cosine) / 2, mapped onto [0,1]");
  m.def(
      "bertscore_f1",
      [](const std::vector<std::string>& tokens_a,
         const std::vector<std::vector<double>>& vectors_a,
         const std::vector<std::string>& tokens_b,
         const std::vector<std::vector<double>>& vectors_b) {
        return uq::bertscore_f1(make_sequence(tokens_a, vectors_a),
                                make_sequence(tokens_b, vectors_b));
      },
      py::arg("tokens_a"), py::arg("vectors_a"), py::arg("tokens_b"), py::arg("vectors_b"));
  m.def("whitespace_tokens", &uq::whitespace_tokens, py::arg("text"));
  m.def(
      "noncontradiction",
      [](const std::string& a, const std::string& b,
         const std::shared_ptr<uq::EntailmentProvider>& judge) {
        return uq::noncontradiction(a, b, *judge);
      },
      py::arg("a"), py::arg("b"), py::arg("judge"));

  // whitebox scorers on raw logprob sequences
  m.def(
      "min_probability",
      [](const std::vector<double>& logprobs) {
        return uq::min_probability(uq::TokenProbSequence(logprobs));
      },
      py::arg("logprobs"));
  m.def(
      "length_normalized_probability",
      [](const std::vector<double>& logprobs) {
        return uq::length_normalized_probability(uq::TokenProbSequence(logprobs));
      },
      py::arg("logprobs"));

  // semantic clustering
  py::class_<uq::SemanticClustering>(m, "SemanticClustering")
      .def(py::init([](const std::vector<std::vector<std::size_t>>& members) {
             uq::SemanticClustering clustering;
             clustering.members = members;
             clustering.validate(clustering.total());
             return clustering;
           }),
           py::arg("members"))
      .def_readonly("members", &uq::SemanticClustering::members)
      .def("cluster_sizes", &uq::SemanticClustering::cluster_sizes)
      .def("total", &uq::SemanticClustering::total);
  m.def(
      "semantic_cluster",
      [](const std::vector<std::string>& responses,
         const std::shared_ptr<uq::EntailmentProvider>& judge) {
        return uq::semantic_cluster(responses, *judge);
      },
      py::arg("responses"), py::arg("judge"));
  m.def("semantic_entropy_confidence", &uq::semantic_entropy_confidence,
        py::arg("clustering"));
  m.def("select_best_index", &uq::select_best_index, py::arg("clustering"),
        "generation index of the representative of the largest cluster");

  // judge templates and parsing
  py::class_<uq::ScoringTemplate>(m, "ScoringTemplate")
      .def(py::init(&uq::ScoringTemplate::from_name), py::arg("name"))
      .def_property_readonly("name", &uq::ScoringTemplate::name)
      .def("admissible_values", &uq::ScoringTemplate::admissible_values)
      .def("is_admissible", &uq::ScoringTemplate::is_admissible, py::arg("score"))
      .def("value_vocabulary", &uq::ScoringTemplate::value_vocabulary);
  m.def("render_judge_prompt", &uq::render_judge_prompt, py::arg("question"),
        py::arg("response"), py::arg("scoring"));
  m.def("try_parse_verdict", &uq::try_parse_verdict, py::arg("raw"), py::arg("scoring"));
  m.def("parse_verdict", &uq::parse_verdict, py::arg("raw"), py::arg("scoring"));
  m.def(
      "panel_aggregates",
      [](const std::vector<std::optional<double>>& scores)
          -> std::optional<py::dict> {
        std::vector<uq::JudgeVerdict> verdicts;
        for (std::size_t i = 0; i < scores.size(); ++i) {
          verdicts.push_back({"judge_" + std::to_string(i + 1), "", scores[i], 1});
        }
        const std::optional<uq::PanelAggregates> aggregates =
            uq::aggregate_verdicts(verdicts);
        if (!aggregates.has_value()) {
          return std::nullopt;
        }
        py::dict d;
        d["min"] = aggregates->min;
        d["max"] = aggregates->max;
        d["avg"] = aggregates->avg;
        d["median"] = aggregates->median;
        return d;
      },
      py::arg("scores"), "min/max/avg/median over the non-null verdict scores");

  // ensemble math and weight tuning
  m.def("roc_auc", &uq::roc_auc, py::arg("scores"), py::arg("labels"));
  m.def("threshold_candidates", &uq::threshold_candidates, py::arg("scores"));
  m.def(
      "threshold_metric",
      [](const std::vector<double>& scores, const std::vector<int>& labels,
         double threshold, const std::string& objective) {
        return uq::threshold_metric(scores, labels, threshold,
                                    uq::Objective::from_name(objective).kind);
      },
      py::arg("scores"), py::arg("labels"), py::arg("threshold"), py::arg("objective"));
  m.def(
      "ensemble_score",
      [](const uq::ScoreVector& scores,
         const std::vector<std::pair<std::string, double>>& weights) {
        return uq::ensemble_score(scores, weights_from_pairs(weights, std::nullopt));
      },
      py::arg("scores"), py::arg("weights"));
  m.def(
      "tune_weights",
      [](const std::vector<uq::ScoreVector>& scores, const std::vector<int>& grades,
         const std::vector<std::string>& scorer_ids, const std::string& objective,
         double grid_step, int dirichlet_samples, std::uint64_t seed, int max_in_flight) {
        if (scores.size() != grades.size()) {
          throw uq::ValidationError("scores and grades must have equal lengths");
        }
        std::vector<uq::TuningRecord> records;
        for (std::size_t i = 0; i < scores.size(); ++i) {
          records.push_back({"", "", scores[i], grades[i]});
        }
        uq::SearchConfig search;
        search.grid_step = grid_step;
        search.dirichlet_samples = dirichlet_samples;
        search.seed = seed;
        return tune_result_dict(uq::tune_weights(records, scorer_ids,
                                                 uq::Objective::from_name(objective),
                                                 search, max_in_flight));
      },
      py::arg("scores"), py::arg("grades"), py::arg("scorer_ids"),
      py::arg("objective") = "roc_auc", py::arg("grid_step") = 0.05,
      py::arg("dirichlet_samples") = 20000, py::arg("seed") = 0,
      py::arg("max_in_flight") = 4);

  // providers
  py::class_<uq::ChatProvider, std::shared_ptr<uq::ChatProvider>>(m, "ChatProvider");
  py::class_<uq::EmbeddingProvider, std::shared_ptr<uq::EmbeddingProvider>>(
      m, "EmbeddingProvider");
  py::class_<uq::EntailmentProvider, std::shared_ptr<uq::EntailmentProvider>>(
      m, "EntailmentProvider");

  py::class_<uq::MockChatProvider, uq::ChatProvider,
             std::shared_ptr<uq::MockChatProvider>>(m, "MockChatProvider")
      .def(py::init<>())
      .def(
          "add_fixture",
          [](uq::MockChatProvider& self, const std::string& prompt,
             const std::vector<std::string>& texts) {
            self.add_fixture(prompt, entries_from_texts(texts));
          },
          py::arg("prompt"), py::arg("texts"))
      .def(
          "add_fixture_with_logprobs",
          [](uq::MockChatProvider& self, const std::string& prompt,
             const std::vector<
                 std::pair<std::string, std::vector<std::pair<std::string, double>>>>&
                 entries) {
            std::vector<uq::MockChatProvider::Entry> converted;
            for (const auto& [text, logprobs] : entries) {
              std::vector<uq::TokenLogprob> tokens;
              for (const auto& [token, logprob] : logprobs) {
                tokens.push_back({token, logprob});
              }
              converted.push_back({text, std::move(tokens)});
            }
            self.add_fixture(prompt, std::move(converted));
          },
          py::arg("prompt"), py::arg("entries"))
      .def(
          "set_default_replies",
          [](uq::MockChatProvider& self, const std::vector<std::string>& texts) {
            self.set_default_entries(entries_from_texts(texts));
          },
          py::arg("texts"))
      .def("set_supports_logprobs", &uq::MockChatProvider::set_supports_logprobs,
           py::arg("value"));

  py::class_<uq::MockEmbeddingProvider, uq::EmbeddingProvider,
             std::shared_ptr<uq::MockEmbeddingProvider>>(m, "MockEmbeddingProvider")
      .def(py::init<std::size_t>(), py::arg("dimension") = 32)
      .def("register_embedding", &uq::MockEmbeddingProvider::register_embedding,
           py::arg("text"), py::arg("values"));

  py::class_<uq::MockEntailmentProvider, uq::EntailmentProvider,
             std::shared_ptr<uq::MockEntailmentProvider>>(m, "MockEntailmentProvider")
      .def(py::init<>())
      .def("add_fixture", &uq::MockEntailmentProvider::add_fixture, py::arg("premise"),
           py::arg("hypothesis"), py::arg("p_entail"), py::arg("p_neutral"),
           py::arg("p_contradict"))
      .def(
          "set_default_judgment",
          [](uq::MockEntailmentProvider& self, double p_entail, double p_neutral,
             double p_contradict) {
            self.set_default_judgment(
                uq::EntailmentJudgment::validated(p_entail, p_neutral, p_contradict));
          },
          py::arg("p_entail"), py::arg("p_neutral"), py::arg("p_contradict"));

  // engines
  py::class_<uq::WhiteBoxEngine>(m, "WhiteBoxEngine")
      .def(py::init([](const std::shared_ptr<uq::ChatProvider>& chat,
                       const std::optional<std::vector<std::string>>& scorers,
                       double temperature, std::uint64_t seed, int max_in_flight) {
             uq::WhiteBoxOptions options;
             if (scorers.has_value()) {
               options.scorers = *scorers;
             }
             options.temperature = temperature;
             options.seed = seed;
             options.max_in_flight = max_in_flight;
             return new uq::WhiteBoxEngine(chat, std::move(options));
           }),
           py::arg("chat"), py::arg("scorers") = std::nullopt,
           py::arg("temperature") = 0.0, py::arg("seed") = 0,
           py::arg("max_in_flight") = 4)
      .def(
          "generate_and_score",
          [](uq::WhiteBoxEngine& self, const std::vector<std::string>& prompts) {
            py::list results;
            for (const uq::WhiteBoxResult& result : self.generate_and_score(prompts)) {
              results.append(whitebox_result_dict(result));
            }
            return results;
          },
          py::arg("prompts"));

  py::class_<uq::BlackBoxEngine>(m, "BlackBoxEngine")
      .def(py::init([](const std::shared_ptr<uq::ChatProvider>& chat,
                       const std::shared_ptr<uq::EmbeddingProvider>& embedder,
                       const std::shared_ptr<uq::EntailmentProvider>& entail,
                       const std::optional<std::vector<std::string>>& scorers,
                       int num_responses, bool use_best, double original_temperature,
                       double candidate_temperature, std::uint64_t seed,
                       int max_in_flight) {
             uq::BlackBoxOptions options;
             options.scorers = scorers.value_or(uq::blackbox_scorer_names());
             options.num_responses = num_responses;
             options.use_best = use_best;
             options.sampling.original_temperature = original_temperature;
             options.sampling.candidate_temperature = candidate_temperature;
             options.seed = seed;
             options.max_in_flight = max_in_flight;
             return new uq::BlackBoxEngine(chat, embedder, entail, std::move(options));
           }),
           py::arg("chat"), py::arg("embedder") = nullptr, py::arg("entail") = nullptr,
           py::arg("scorers") = std::nullopt, py::arg("num_responses") = 5,
           py::arg("use_best") = false, py::arg("original_temperature") = 0.0,
           py::arg("candidate_temperature") = 1.0, py::arg("seed") = 0,
           py::arg("max_in_flight") = 4)
      .def(
          "generate_and_score",
          [](uq::BlackBoxEngine& self, const std::vector<std::string>& prompts) {
            py::list results;
            for (const uq::BlackBoxResult& result : self.generate_and_score(prompts)) {
              results.append(blackbox_result_dict(result));
            }
            return results;
          },
          py::arg("prompts"));

  py::class_<uq::EnsembleEngine>(m, "EnsembleEngine")
      .def(py::init([](const std::shared_ptr<uq::ChatProvider>& chat,
                       const std::shared_ptr<uq::EmbeddingProvider>& embedder,
                       const std::shared_ptr<uq::EntailmentProvider>& entail,
                       const std::optional<
                           std::vector<std::pair<std::string, double>>>& weights,
                       const std::optional<
                           std::vector<std::pair<std::string, std::string>>>& judges,
                       int num_responses, bool use_best, double original_temperature,
                       double candidate_temperature, std::uint64_t seed,
                       int max_in_flight) {
             uq::EnsembleOptions options;
             if (weights.has_value()) {
               options.weights = weights_from_pairs(*weights, std::nullopt);
             }
             if (judges.has_value()) {
               options.judges = judges_from_pairs(*judges, chat);
             } else {
               options.judges = judges_from_pairs({{"self_judge", "continuous"}}, chat);
             }
             options.num_responses = num_responses;
             options.use_best = use_best;
             options.sampling.original_temperature = original_temperature;
             options.sampling.candidate_temperature = candidate_temperature;
             options.seed = seed;
             options.max_in_flight = max_in_flight;
             return new uq::EnsembleEngine(chat, embedder, entail, std::move(options));
           }),
           py::arg("chat"), py::arg("embedder") = nullptr, py::arg("entail") = nullptr,
           py::arg("weights") = std::nullopt, py::arg("judges") = std::nullopt,
           py::arg("num_responses") = 5, py::arg("use_best") = false,
           py::arg("original_temperature") = 0.0, py::arg("candidate_temperature") = 1.0,
           py::arg("seed") = 0, py::arg("max_in_flight") = 4)
      .def(
          "generate_and_score",
          [](uq::EnsembleEngine& self, const std::vector<std::string>& prompts) {
            py::list results;
            for (const uq::EnsembleResult& result : self.generate_and_score(prompts)) {
              results.append(ensemble_result_dict(result));
            }
            return results;
          },
          py::arg("prompts"))
      .def(
          "tune",
          [](uq::EnsembleEngine& self, const std::vector<std::string>& prompts,
             const std::vector<std::string>& ideals, const std::string& objective,
             std::uint64_t seed) {
            uq::SearchConfig search;
            search.seed = seed;
            return tune_result_dict(self.tune(prompts, ideals, uq::exact_match_grader(),
                                              uq::Objective::from_name(objective),
                                              search));
          },
          py::arg("prompts"), py::arg("ideals"), py::arg("objective") = "roc_auc",
          py::arg("seed") = 0,
          "fit weights on exact-match grades and keep them on the engine")
      .def("weights",
           [](const uq::EnsembleEngine& self) { return self.weights().entries; });
}
