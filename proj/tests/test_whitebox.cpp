#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "uqkit/mock_backend.hpp"
#include "uqkit/whitebox.hpp"

using namespace uq;

TEST_CASE("TokenProbSequence validation") {
  CHECK_THROWS_AS(TokenProbSequence({}), EmptySequenceError);
  CHECK_THROWS_AS(TokenProbSequence({-0.1, 0.2}), ValidationError);
  CHECK_NOTHROW(TokenProbSequence({-0.1, 0.0}));

  Generation generation;
  generation.text = "hi";
  CHECK_THROWS_AS(TokenProbSequence::from_generation(generation), MissingLogprobsError);
  generation.token_logprobs = std::vector<TokenLogprob>{{"hi", -0.2}};
  CHECK(TokenProbSequence::from_generation(generation).logprobs() ==
        std::vector<double>{-0.2});
}

TEST_CASE("whitebox scorers on the {0.8, 0.9} token pair") {
  const TokenProbSequence seq({std::log(0.8), std::log(0.9)});
  CHECK(min_probability(seq) == doctest::Approx(0.8).epsilon(1e-12));
  // geometric mean: sqrt(0.8 * 0.9)
  CHECK(length_normalized_probability(seq) ==
        doctest::Approx(std::sqrt(0.72)).epsilon(1e-12));
}

TEST_CASE("single-token sequences make both scorers agree") {
  const TokenProbSequence seq({std::log(0.35)});
  CHECK(min_probability(seq) == doctest::Approx(0.35).epsilon(1e-12));
  CHECK(length_normalized_probability(seq) == doctest::Approx(0.35).epsilon(1e-12));
}

TEST_CASE("length-normalized probability dominates min probability") {
  std::mt19937_64 rng(991);
  std::uniform_real_distribution<double> logprob(-6.0, 0.0);
  std::uniform_int_distribution<int> len(1, 40);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> logprobs(len(rng));
    for (double& lp : logprobs) {
      lp = logprob(rng);
    }
    const TokenProbSequence seq(logprobs);
    const double lo = min_probability(seq);
    const double mean = length_normalized_probability(seq);
    CHECK(lo >= 0.0);
    CHECK(lo <= 1.0);
    CHECK(mean <= 1.0);
    CHECK(mean >= lo);
  }
}

TEST_CASE("whitebox engine: one chat call per prompt, logprobs required") {
  auto chat = std::make_shared<MockChatProvider>();
  auto counter = std::make_shared<TransportCounter>();
  chat->set_counter(counter);
  chat->add_fixture("q1", {{"fine", std::vector<TokenLogprob>{{"fine", std::log(0.5)}}}});
  chat->add_fixture("q2", {{"also", std::vector<TokenLogprob>{{"al", std::log(0.8)},
                                                              {"so", std::log(0.9)}}}});

  WhiteBoxEngine engine(chat, {});
  const auto results = engine.generate_and_score({"q1", "q2"});
  REQUIRE(results.size() == 2);
  CHECK(counter->chat_calls() == 2);
  CHECK(counter->total() == 2);

  CHECK(results[0].response == "fine");
  CHECK(!results[0].error.has_value());
  CHECK(results[0].scores.at("min_probability") == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(results[1].scores.at("min_probability") == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(results[1].scores.at("length_normalized_probability") ==
        doctest::Approx(std::sqrt(0.72)).epsilon(1e-12));
}

TEST_CASE("whitebox engine refuses a provider without logprob support") {
  auto chat = std::make_shared<MockChatProvider>();
  chat->set_supports_logprobs(false);
  chat->add_fixture("q", {{"text", std::nullopt}});
  WhiteBoxEngine engine(chat, {});
  CHECK_THROWS_AS(engine.generate_and_score({"q"}), CapabilityError);
}

TEST_CASE("whitebox engine records per-prompt failures without aborting the batch") {
  auto chat = std::make_shared<MockChatProvider>();
  chat->add_fixture("known", {{"ok", std::vector<TokenLogprob>{{"ok", -0.1}}}});
  WhiteBoxEngine engine(chat, {});
  const auto results = engine.generate_and_score({"known", "unknown"});
  CHECK(!results[0].error.has_value());
  REQUIRE(results[1].error.has_value());
  CHECK(results[1].scores.empty());
}

TEST_CASE("unknown whitebox scorer name is a configuration error") {
  Generation generation;
  generation.text = "x";
  generation.token_logprobs = std::vector<TokenLogprob>{{"x", -0.1}};
  CHECK_THROWS_AS(WhiteBoxEngine::score_generation(generation, {"bogus"}), ConfigError);
}
