#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "uqkit/ensemble.hpp"
#include "uqkit/judge.hpp"
#include "uqkit/mock_backend.hpp"

using namespace uq;

namespace {

EnsembleWeights weights_of(std::vector<std::pair<std::string, double>> entries) {
  EnsembleWeights weights;
  weights.entries = std::move(entries);
  return weights;
}

void replace_all(std::string& text, const std::string& from, const std::string& to) {
  for (std::size_t pos = text.find(from); pos != std::string::npos;
       pos = text.find(from, pos + to.size())) {
    text.replace(pos, from.size(), to);
  }
}

std::string grader_prompt(const std::string& response, const std::string& ideal) {
  std::string prompt = kGraderPromptTemplate;
  replace_all(prompt, "{ideal}", ideal);
  replace_all(prompt, "{response}", response);
  return prompt;
}

// O(n^2) pair-counting ROC-AUC used as the independent oracle.
double brute_force_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) {
      continue;
    }
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) {
        continue;
      }
      ++pairs;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
  }
  ~TempFile() { std::remove(path.c_str()); }
};

std::vector<TuningRecord> two_scorer_records() {
  // "good" ranks the positives above the negatives, "noise" does not
  return {
      {"p1", "i1", {{"good", 0.9}, {"noise", 0.2}}, 1},
      {"p2", "i2", {{"good", 0.8}, {"noise", 0.9}}, 1},
      {"p3", "i3", {{"good", 0.3}, {"noise", 0.8}}, 0},
      {"p4", "i4", {{"good", 0.1}, {"noise", 0.4}}, 0},
  };
}

}  // namespace

TEST_CASE("EnsembleWeights validation") {
  CHECK_NOTHROW(weights_of({{"a", 0.5}, {"b", 0.5}}).validate());
  CHECK_THROWS_AS(weights_of({}).validate(), ValidationError);
  CHECK_THROWS_AS(weights_of({{"a", 0.6}, {"b", 0.5}}).validate(), ValidationError);
  CHECK_THROWS_AS(weights_of({{"a", 1.5}, {"b", -0.5}}).validate(), ValidationError);
  CHECK_THROWS_AS(weights_of({{"a", 0.5}, {"a", 0.5}}).validate(), ValidationError);
  CHECK_THROWS_AS(weights_of({{"", 1.0}}).validate(), ValidationError);

  EnsembleWeights with_threshold = weights_of({{"a", 1.0}});
  with_threshold.threshold = 1.5;
  CHECK_THROWS_AS(with_threshold.validate(), ValidationError);
  with_threshold.threshold = 0.5;
  CHECK_NOTHROW(with_threshold.validate());
}

TEST_CASE("uniform weights split mass evenly") {
  const EnsembleWeights weights = EnsembleWeights::uniform({"a", "b", "c"});
  CHECK(weights.scorer_ids() == std::vector<std::string>{"a", "b", "c"});
  for (const auto& [id, w] : weights.entries) {
    CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  CHECK_NOTHROW(weights.validate());
  CHECK_THROWS_AS(EnsembleWeights::uniform({}), EmptyScorerSetError);
}

TEST_CASE("ensemble_score weighted average") {
  const EnsembleWeights weights = weights_of({{"a", 0.7}, {"b", 0.3}});
  CHECK(ensemble_score({{"a", 0.9}, {"b", 0.6}}, weights) ==
        doctest::Approx(0.81).epsilon(1e-12));
  // extra scores are ignored; missing ones are an error
  CHECK(ensemble_score({{"a", 0.9}, {"b", 0.6}, {"c", 0.1}}, weights) ==
        doctest::Approx(0.81).epsilon(1e-12));
  CHECK_THROWS_AS(ensemble_score({{"a", 0.9}}, weights), MissingScorerError);
  CHECK_THROWS_AS(ensemble_score({{"a", 1.2}, {"b", 0.6}}, weights), ValidationError);
}

TEST_CASE("ensemble_score is monotone in each component") {
  std::mt19937_64 rng(5150);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const EnsembleWeights weights =
      weights_of({{"a", 0.2}, {"b", 0.5}, {"c", 0.3}});
  for (int trial = 0; trial < 500; ++trial) {
    ScoreVector scores = {{"a", unit(rng)}, {"b", unit(rng)}, {"c", unit(rng)}};
    const double base = ensemble_score(scores, weights);
    ScoreVector bumped = scores;
    const char* names[] = {"a", "b", "c"};
    const std::string name = names[trial % 3];
    bumped[name] = std::min(1.0, bumped[name] + unit(rng) * (1.0 - bumped[name]));
    CHECK(ensemble_score(bumped, weights) >= base - 1e-12);
  }
}

TEST_CASE("default ensemble is the uniform trio") {
  CHECK(default_ensemble_components() ==
        std::vector<std::string>{"exact_match", "noncontradiction", "self_judge"});
  const EnsembleWeights weights = default_ensemble();
  CHECK(weights.scorer_ids() == default_ensemble_components());
  CHECK(weights.entries[0].second == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("exact_match_grade compares trimmed text") {
  CHECK(exact_match_grade(" Paris ", "Paris") == 1);
  CHECK(exact_match_grade("paris", "Paris") == 0);
  CHECK(exact_match_grader()("x", "x") == 1);
}

TEST_CASE("judge_grader parses a binary verdict with one retry") {
  auto chat = std::make_shared<MockChatProvider>();
  chat->add_fixture(grader_prompt("4", "4"), {{"1", std::nullopt}});
  chat->add_fixture(grader_prompt("5", "4"), {{"hmm", std::nullopt}});
  chat->add_fixture(grader_prompt("5", "4") + kJudgeRetrySuffix, {{"0", std::nullopt}});
  chat->add_fixture(grader_prompt("6", "4"), {{"unclear", std::nullopt}});
  chat->add_fixture(grader_prompt("6", "4") + kJudgeRetrySuffix,
                    {{"still unclear", std::nullopt}});

  const Grader grader = judge_grader(chat);
  CHECK(grader("4", "4") == 1);
  CHECK(grader("5", "4") == 0);
  CHECK_THROWS_AS(grader("6", "4"), ParseFailure);
  CHECK_THROWS_AS(grader("", "4"), ValidationError);
  CHECK_THROWS_AS(grader("4", " "), ValidationError);
}

TEST_CASE("grade_responses leaves failed grades empty") {
  auto chat = std::make_shared<MockChatProvider>();
  chat->add_fixture(grader_prompt("a", "a"), {{"1", std::nullopt}});
  const Grader grader = judge_grader(chat);
  const auto grades = grade_responses({"a", "b"}, {"a", "b"}, grader);
  REQUIRE(grades.size() == 2);
  CHECK(grades[0] == 1);
  CHECK(!grades[1].has_value());

  CHECK_THROWS_AS(grade_responses({"a"}, {}, grader), ValidationError);
}

TEST_CASE("roc_auc frozen values") {
  CHECK(roc_auc({0.9, 0.4, 0.6, 0.1}, {1, 1, 0, 0}) == 0.75);
  CHECK(roc_auc({0.9, 0.8, 0.3, 0.2}, {1, 1, 0, 0}) == 1.0);
  CHECK(roc_auc({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}) == 0.0);
  // all-tied scores: every pair counts half
  CHECK(roc_auc({0.5, 0.5, 0.5}, {1, 0, 0}) == 0.5);
  // tie between one positive and one negative
  CHECK(roc_auc({0.7, 0.7, 0.2}, {1, 0, 0}) == 0.75);
}

TEST_CASE("roc_auc input validation") {
  CHECK_THROWS_AS(roc_auc({0.5}, {1}), DegenerateLabelsError);
  CHECK_THROWS_AS(roc_auc({0.5, 0.6}, {0, 0}), DegenerateLabelsError);
  CHECK_THROWS_AS(roc_auc({0.5, 0.6}, {1, 2}), ValidationError);
  CHECK_THROWS_AS(roc_auc({0.5}, {1, 0}), ValidationError);
  CHECK_THROWS_AS(roc_auc({}, {}), ValidationError);
  CHECK_THROWS_AS(roc_auc({std::nan(""), 0.5}, {1, 0}), ValidationError);
}

TEST_CASE("roc_auc equals the pair-counting oracle on fuzzed inputs") {
  std::mt19937_64 rng(314159);
  std::uniform_int_distribution<int> size(2, 30);
  std::uniform_int_distribution<int> label(0, 1);
  std::uniform_int_distribution<int> bucket(0, 9);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = size(rng);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has_pos = false;
    bool has_neg = false;
    for (int i = 0; i < n; ++i) {
      scores[i] = bucket(rng) / 9.0;  // coarse buckets force plenty of ties
      labels[i] = label(rng);
      has_pos |= labels[i] == 1;
      has_neg |= labels[i] == 0;
    }
    if (!has_pos || !has_neg) {
      continue;
    }
    // bit-for-bit equality: both reduce to the same integer counts
    CHECK(roc_auc(scores, labels) == brute_force_auc(scores, labels));
  }
}

TEST_CASE("roc_auc is invariant under monotone transforms and flips with labels") {
  std::mt19937_64 rng(8080);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> scores(40);
  std::vector<int> labels(40);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = unit(rng);
    labels[i] = i % 3 == 0 ? 1 : 0;
  }
  const double base = roc_auc(scores, labels);

  std::vector<double> squashed = scores;
  for (double& s : squashed) {
    s = 1.0 / (1.0 + std::exp(-6.0 * (s - 0.5)));  // strictly increasing
  }
  CHECK(roc_auc(squashed, labels) == base);

  std::vector<int> flipped = labels;
  for (int& l : flipped) {
    l = 1 - l;
  }
  std::vector<double> negated = scores;
  for (double& s : negated) {
    s = 1.0 - s;
  }
  CHECK(roc_auc(negated, flipped) == base);
}

TEST_CASE("threshold_metric accuracy and f1") {
  const std::vector<double> scores = {0.9, 0.6, 0.4, 0.1};
  const std::vector<int> labels = {1, 0, 1, 0};

  // threshold 0.5: predictions 1,1,0,0 -> tp=1 fp=1 fn=1 tn=1
  CHECK(threshold_metric(scores, labels, 0.5, Objective::Kind::kAccuracy) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(threshold_metric(scores, labels, 0.5, Objective::Kind::kF1) ==
        doctest::Approx(0.5).epsilon(1e-12));
  // prediction is positive iff score >= threshold: 1,0,0,0 -> 3 of 4 right
  CHECK(threshold_metric(scores, labels, 0.9, Objective::Kind::kAccuracy) ==
        doctest::Approx(0.75).epsilon(1e-12));
  // no predicted positives: f1 defined as 0
  CHECK(threshold_metric(scores, labels, 0.95, Objective::Kind::kF1) == 0.0);

  CHECK_THROWS_AS(threshold_metric(scores, {0, 0, 0, 0}, 0.5, Objective::Kind::kF1),
                  DegenerateLabelsError);
  CHECK_THROWS_AS(threshold_metric(scores, labels, 0.5, Objective::Kind::kRocAuc),
                  ValidationError);
}

TEST_CASE("threshold_candidates covers endpoints and midpoints") {
  CHECK(threshold_candidates({0.2, 0.8, 0.2}) == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(threshold_candidates({0.4}) == std::vector<double>{0.0, 1.0});
  const auto candidates = threshold_candidates({0.1, 0.2, 0.4});
  CHECK(candidates ==
        std::vector<double>{0.0, 0.15000000000000002, 0.30000000000000004, 1.0});
}

TEST_CASE("Objective names") {
  CHECK(Objective::from_name("roc_auc").kind == Objective::Kind::kRocAuc);
  CHECK(Objective::from_name("f1").threshold_dependent());
  CHECK(Objective::from_name("accuracy").name() == "accuracy");
  CHECK(!Objective::from_name("roc_auc").threshold_dependent());
  CHECK_THROWS_AS(Objective::from_name("recall"), ConfigError);
}

TEST_CASE("tune_weights puts all mass on a perfect scorer") {
  const TuneResult result =
      tune_weights(two_scorer_records(), {"good", "noise"}, Objective{}, SearchConfig{});
  CHECK(result.method == "grid");
  CHECK(result.objective_value == 1.0);
  CHECK(result.weights.entries[0].first == "good");
  CHECK(result.weights.entries[0].second == 1.0);
  CHECK(result.weights.entries[1].second == 0.0);
  CHECK(!result.weights.threshold.has_value());
}

TEST_CASE("tune_weights tie-break keeps the first vector in search order") {
  // identical scorers: every simplex point scores the same, so the fitted
  // weights must be the first enumerated point (1, 0)
  std::vector<TuningRecord> records = two_scorer_records();
  for (TuningRecord& record : records) {
    record.scorer_scores["twin"] = record.scorer_scores["good"];
    record.scorer_scores["good2"] = record.scorer_scores["good"];
  }
  const TuneResult result =
      tune_weights(records, {"good", "good2"}, Objective{}, SearchConfig{});
  CHECK(result.weights.entries[0].second == 1.0);
  CHECK(result.weights.entries[1].second == 0.0);
}

TEST_CASE("tune_weights grid points are multiples of the step") {
  SearchConfig search;
  search.grid_step = 0.25;
  const TuneResult result =
      tune_weights(two_scorer_records(), {"good", "noise"}, Objective{}, search);
  for (const auto& [id, weight] : result.weights.entries) {
    const double scaled = weight / 0.25;
    CHECK(std::abs(scaled - std::round(scaled)) < 1e-9);
  }
}

TEST_CASE("tune_weights input validation") {
  const auto records = two_scorer_records();
  CHECK_THROWS_AS(tune_weights(records, {}, Objective{}, SearchConfig{}),
                  EmptyScorerSetError);
  CHECK_THROWS_AS(tune_weights(records, {"good", "good"}, Objective{}, SearchConfig{}),
                  ConfigError);
  CHECK_THROWS_AS(tune_weights({records[0]}, {"good"}, Objective{}, SearchConfig{}),
                  ValidationError);
  CHECK_THROWS_AS(tune_weights(records, {"absent"}, Objective{}, SearchConfig{}),
                  MissingScorerError);

  auto single_class = records;
  for (TuningRecord& record : single_class) {
    record.grade = 1;
  }
  CHECK_THROWS_AS(tune_weights(single_class, {"good"}, Objective{}, SearchConfig{}),
                  DegenerateLabelsError);

  auto bad_grade = records;
  bad_grade[0].grade = 2;
  CHECK_THROWS_AS(tune_weights(bad_grade, {"good"}, Objective{}, SearchConfig{}),
                  ValidationError);

  auto bad_score = records;
  bad_score[0].scorer_scores["good"] = 1.2;
  CHECK_THROWS_AS(tune_weights(bad_score, {"good"}, Objective{}, SearchConfig{}),
                  ValidationError);
}

TEST_CASE("tune_weights with four scorers uses seeded dirichlet + refinement") {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<TuningRecord> records;
  for (int i = 0; i < 40; ++i) {
    const int grade = i % 2;
    TuningRecord record;
    record.prompt = "p" + std::to_string(i);
    record.ideal_response = "i";
    record.grade = grade;
    // scorer "s0" carries signal, the rest are noise
    record.scorer_scores["s0"] = 0.3 * unit(rng) + (grade == 1 ? 0.6 : 0.0);
    record.scorer_scores["s1"] = unit(rng);
    record.scorer_scores["s2"] = unit(rng);
    record.scorer_scores["s3"] = unit(rng);
    records.push_back(record);
  }

  SearchConfig search;
  search.dirichlet_samples = 500;
  search.seed = 13;
  const Objective objective{};
  const std::vector<std::string> ids = {"s0", "s1", "s2", "s3"};
  const TuneResult first = tune_weights(records, ids, objective, search);
  const TuneResult second = tune_weights(records, ids, objective, search);

  CHECK(first.method == "dirichlet_refine");
  CHECK(first.weights.entries == second.weights.entries);
  CHECK(first.objective_value == second.objective_value);
  CHECK_NOTHROW(first.weights.validate());

  // fitted weights must do at least as well as the uniform start
  std::vector<double> uniform_scores;
  std::vector<int> labels;
  const EnsembleWeights uniform = EnsembleWeights::uniform(ids);
  for (const TuningRecord& record : records) {
    uniform_scores.push_back(ensemble_score(record.scorer_scores, uniform));
    labels.push_back(record.grade);
  }
  CHECK(first.objective_value >= roc_auc(uniform_scores, labels) - 1e-12);
  // the informative scorer should dominate
  CHECK(first.weights.entries[0].second >
        std::max({first.weights.entries[1].second, first.weights.entries[2].second,
                  first.weights.entries[3].second}));
}

TEST_CASE("tune_weights fits a threshold for threshold-dependent objectives") {
  const TuneResult result = tune_weights(two_scorer_records(), {"good", "noise"},
                                         Objective::from_name("f1"), SearchConfig{});
  REQUIRE(result.weights.threshold.has_value());
  CHECK(result.objective_value == 1.0);

  std::vector<double> scores;
  std::vector<int> labels;
  for (const TuningRecord& record : two_scorer_records()) {
    scores.push_back(ensemble_score(record.scorer_scores, result.weights));
    labels.push_back(record.grade);
  }
  CHECK(threshold_metric(scores, labels, *result.weights.threshold,
                         Objective::Kind::kF1) == result.objective_value);
}

TEST_CASE("weights save/load round trip") {
  TempFile file("uq_test_weights.json");
  TuneResult result;
  result.weights = weights_of({{"b", 0.25}, {"a", 0.75}});
  result.weights.threshold = 0.4;
  result.objective = Objective::from_name("f1");
  result.objective_value = 0.9;
  result.method = "grid";
  save_weights(result, file.path);

  const EnsembleWeights loaded = load_weights(file.path);
  CHECK_NOTHROW(loaded.validate());
  REQUIRE(loaded.entries.size() == 2);
  const auto find = [&](const std::string& id) {
    for (const auto& [scorer_id, weight] : loaded.entries) {
      if (scorer_id == id) {
        return weight;
      }
    }
    throw std::runtime_error("missing " + id);
  };
  CHECK(find("a") == 0.75);
  CHECK(find("b") == 0.25);
  REQUIRE(loaded.threshold.has_value());
  CHECK(*loaded.threshold == 0.4);
}

TEST_CASE("weights persistence rejects reserved-key collisions and bad content") {
  TempFile file("uq_test_weights_bad.json");

  TuneResult collision;
  collision.weights = weights_of({{"threshold", 1.0}});
  collision.objective = Objective{};
  CHECK_THROWS_AS(save_weights(collision, file.path), ConfigError);

  {
    std::ofstream out(file.path);
    out << "{\"a\": 0.7, \"b\": 0.7}\n";
  }
  CHECK_THROWS_AS(load_weights(file.path), ConfigError);

  {
    std::ofstream out(file.path);
    out << "not json\n";
  }
  CHECK_THROWS_AS(load_weights(file.path), ConfigError);

  CHECK_THROWS_AS(load_weights("/nonexistent/uq_weights.json"), ConfigError);
}

namespace {

struct EnsembleHarness {
  std::shared_ptr<MockChatProvider> chat = std::make_shared<MockChatProvider>();
  std::shared_ptr<MockEmbeddingProvider> embedder =
      std::make_shared<MockEmbeddingProvider>(8);
  std::shared_ptr<MockEntailmentProvider> entail =
      std::make_shared<MockEntailmentProvider>();
  std::shared_ptr<TransportCounter> counter = std::make_shared<TransportCounter>();

  EnsembleHarness() {
    chat->set_counter(counter);
    embedder->set_counter(counter);
    entail->set_counter(counter);
  }

  EnsembleOptions options(std::vector<std::string> components) {
    EnsembleOptions opts;
    opts.weights = EnsembleWeights::uniform(components);
    JudgeSpec self_judge;
    self_judge.judge_id = "self_judge";
    self_judge.provider = chat;
    opts.judges = {self_judge};
    opts.num_responses = 3;
    opts.seed = 17;
    return opts;
  }
};

}  // namespace

TEST_CASE("ensemble engine rejects unknown components up front") {
  EnsembleHarness h;
  EnsembleOptions options = h.options({"exact_match", "mystery"});
  CHECK_THROWS_AS(EnsembleEngine(h.chat, h.embedder, h.entail, options), ConfigError);

  // judge id without a configured judge: the error explains the extra rule
  EnsembleOptions no_judges = h.options({"exact_match", "other_judge"});
  try {
    EnsembleEngine(h.chat, h.embedder, h.entail, no_judges);
    FAIL("expected ConfigError");
  } catch (const ConfigError& error) {
    CHECK(std::string(error.what()).find("other_judge") != std::string::npos);
  }
}

TEST_CASE("ensemble engine requires providers matching its components") {
  EnsembleHarness h;
  EnsembleOptions options = h.options({"cosine_sim", "exact_match"});
  CHECK_THROWS_AS(EnsembleEngine(h.chat, nullptr, h.entail, options), ConfigError);
  EnsembleOptions nc = h.options({"noncontradiction"});
  CHECK_THROWS_AS(EnsembleEngine(h.chat, h.embedder, nullptr, nc), ConfigError);
}

TEST_CASE("ensemble engine refuses whitebox components without logprob support") {
  EnsembleHarness h;
  h.chat->set_supports_logprobs(false);
  h.chat->add_fixture("q", {{"r", std::nullopt}});
  EnsembleOptions options = h.options({"min_probability"});
  EnsembleEngine engine(h.chat, h.embedder, h.entail, options);
  CHECK_THROWS_AS(engine.generate_and_score({"q"}), CapabilityError);
}

TEST_CASE("ensemble engine default trio: scores, ensemble value, call budget") {
  EnsembleHarness h;
  h.chat->add_fixture("q", {{"yes", std::nullopt}});
  const std::string judge_prompt = render_judge_prompt(
      "q", "yes", ScoringTemplate(ScoringTemplate::Kind::kContinuous));
  h.chat->add_fixture(judge_prompt, {{"0.8", std::nullopt}});

  EnsembleOptions options = h.options(default_ensemble_components());
  EnsembleEngine engine(h.chat, h.embedder, h.entail, options);
  const auto results = engine.generate_and_score({"q"});
  REQUIRE(results.size() == 1);
  REQUIRE(!results[0].error.has_value());

  CHECK(results[0].scores.size() == 3);
  CHECK(results[0].scores.at("exact_match") == 1.0);
  CHECK(results[0].scores.at("noncontradiction") == 1.0);
  CHECK(results[0].scores.at("self_judge") == doctest::Approx(0.8).epsilon(1e-12));
  REQUIRE(results[0].ensemble.has_value());
  CHECK(*results[0].ensemble == doctest::Approx((1.0 + 1.0 + 0.8) / 3.0).epsilon(1e-12));

  // 1 original + 3 candidates + 1 judge; entailment runs 2 digs per candidate
  CHECK(h.counter->chat_calls() == 5);
  CHECK(h.counter->embed_calls() == 0);
  CHECK(h.counter->entail_calls() == 6);
}

TEST_CASE("ensemble engine skips candidate sampling when nothing needs it") {
  EnsembleHarness h;
  h.chat->add_fixture(
      "q", {{"r", std::vector<TokenLogprob>{{"r", std::log(0.5)}}}});
  EnsembleOptions options = h.options({"min_probability"});
  EnsembleEngine engine(h.chat, h.embedder, h.entail, options);
  const auto results = engine.generate_and_score({"q"});
  REQUIRE(!results[0].error.has_value());
  CHECK(results[0].scores.at("min_probability") == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(*results[0].ensemble == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(h.counter->chat_calls() == 1);
}

TEST_CASE("ensemble engine flags the prompt when a judge component stays null") {
  EnsembleHarness h;
  h.chat->add_fixture("q", {{"reply", std::nullopt}});
  h.chat->set_default_entries({{"never a number", std::nullopt}});
  EnsembleOptions options = h.options({"exact_match", "self_judge"});
  EnsembleEngine engine(h.chat, h.embedder, h.entail, options);
  const auto results = engine.generate_and_score({"q"});
  REQUIRE(results[0].error.has_value());
  CHECK(results[0].scores.empty());
  CHECK(!results[0].ensemble.has_value());
}

TEST_CASE("ensemble engine set_weights requires the same components") {
  EnsembleHarness h;
  EnsembleOptions options = h.options({"exact_match", "self_judge"});
  EnsembleEngine engine(h.chat, h.embedder, h.entail, options);

  CHECK_THROWS_AS(engine.set_weights(weights_of({{"exact_match", 1.0}})), ConfigError);
  CHECK_THROWS_AS(
      engine.set_weights(weights_of({{"self_judge", 0.5}, {"exact_match", 0.5}})),
      ConfigError);
  EnsembleWeights renamed = weights_of({{"exact_match", 0.9}, {"self_judge", 0.1}});
  CHECK_NOTHROW(engine.set_weights(renamed));
  CHECK(engine.weights().entries == renamed.entries);
}

TEST_CASE("ensemble engine tune fits and installs weights") {
  EnsembleHarness h;
  // two prompts answered consistently-right, two inconsistently-wrong
  h.chat->add_fixture("good1", {{"alpha", std::nullopt}});
  h.chat->add_fixture("good2", {{"beta", std::nullopt}});
  h.chat->add_fixture("bad1", {{"gamma one", std::nullopt},
                               {"gamma two", std::nullopt},
                               {"gamma three", std::nullopt},
                               {"gamma four", std::nullopt}});
  h.chat->add_fixture("bad2", {{"delta one", std::nullopt},
                               {"delta two", std::nullopt},
                               {"delta three", std::nullopt},
                               {"delta four", std::nullopt}});

  EnsembleOptions options = h.options({"exact_match"});
  options.num_responses = 2;
  EnsembleEngine engine(h.chat, h.embedder, h.entail, options);
  const TuneResult result = engine.tune({"good1", "good2", "bad1", "bad2"},
                                        {"alpha", "beta", "right3", "right4"},
                                        exact_match_grader(), Objective{}, SearchConfig{});
  CHECK(result.objective_value == 1.0);
  CHECK(engine.weights().entries == result.weights.entries);
}
