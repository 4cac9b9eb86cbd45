#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "uqkit/backend.hpp"
#include "uqkit/cache.hpp"
#include "uqkit/mock_backend.hpp"

using namespace uq;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
    std::remove(path.c_str());
  }
  ~TempFile() { std::remove(path.c_str()); }
};

ChatRequest request_for(const std::string& prompt, std::uint64_t seed) {
  ChatRequest request;
  request.prompt = prompt;
  request.seed = seed;
  return request;
}

}  // namespace

TEST_CASE("mock chat provider selects entries by seed and sample index") {
  MockChatProvider chat;
  chat.add_fixture("q", {{"e0", std::nullopt}, {"e1", std::nullopt}, {"e2", std::nullopt}});

  CHECK(chat.complete(request_for("q", 0), 0).text == "e0");
  CHECK(chat.complete(request_for("q", 0), 2).text == "e2");
  CHECK(chat.complete(request_for("q", 4), 0).text == "e1");
  CHECK(chat.complete(request_for("q", 4), 2).text == "e0");
  // absent seed behaves as seed 0
  ChatRequest no_seed;
  no_seed.prompt = "q";
  CHECK(chat.complete(no_seed, 1).text == "e1");
}

TEST_CASE("mock chat provider fails unknown prompts unless defaults are set") {
  MockChatProvider chat;
  CHECK_THROWS_AS(chat.complete(request_for("mystery", 0), 0), TransportError);
  chat.set_default_entries({{"fallback", std::nullopt}});
  CHECK(chat.complete(request_for("mystery", 0), 0).text == "fallback");
}

TEST_CASE("mock chat provider strips logprobs when asked not to produce them") {
  MockChatProvider chat;
  chat.add_fixture("q", {{"r", std::vector<TokenLogprob>{{"r", -0.5}}}});

  ChatRequest plain = request_for("q", 0);
  plain.want_logprobs = false;
  CHECK(!chat.complete(plain, 0).token_logprobs.has_value());

  ChatRequest with = request_for("q", 0);
  with.want_logprobs = true;
  REQUIRE(chat.complete(with, 0).token_logprobs.has_value());

  // The capability gate sits in chat_generate, not in the raw provider.
  chat.set_supports_logprobs(false);
  CHECK_THROWS_AS(chat_generate(chat, with), CapabilityError);
}

TEST_CASE("chat fixture files load entries and logprobs") {
  TempFile file("uq_test_chat_fixture.json");
  {
    std::ofstream out(file.path);
    out << R"({
      "q1": [{"text": "hello", "logprobs": [["hel", -0.1], ["lo", -0.2]]}],
      "q2": [{"text": "a"}, {"text": "b", "logprobs": null}]
    })";
  }
  MockChatProvider chat = MockChatProvider::from_fixture_file(file.path);
  ChatRequest request = request_for("q1", 0);
  request.want_logprobs = true;
  const Generation generation = chat.complete(request, 0);
  CHECK(generation.text == "hello");
  REQUIRE(generation.token_logprobs.has_value());
  CHECK(generation.token_logprobs->at(1).logprob == -0.2);
  CHECK(chat.complete(request_for("q2", 0), 1).text == "b");

  CHECK_THROWS_AS(MockChatProvider::from_fixture_file("/nonexistent/fixture.json"),
                  ConfigError);
}

TEST_CASE("mock embedding provider is deterministic per text") {
  MockEmbeddingProvider embedder(16);
  const EmbeddingVector a1 = embedder.embed_one("alpha");
  const EmbeddingVector a2 = embedder.embed_one("alpha");
  const EmbeddingVector b = embedder.embed_one("beta");
  CHECK(a1.values == a2.values);
  CHECK(a1.values != b.values);
  CHECK(a1.dimension() == 16);

  CHECK_THROWS_AS(embedder.register_embedding("pinned", {1, 0, 0}),
                  DimensionMismatchError);

  MockEmbeddingProvider small(3);
  small.register_embedding("pinned", {1, 0, 0});
  CHECK(small.embed_one("pinned").values == std::vector<double>{1, 0, 0});
}

TEST_CASE("mock entailment provider: fixtures, identity rule, neutral default") {
  MockEntailmentProvider judge;
  judge.add_fixture("p", "h", 0.8, 0.1, 0.1);

  const EntailmentJudgment fixture = judge.entail("p", "h");
  CHECK(fixture.p_entail == 0.8);
  // ordered pair: the reverse direction is not the fixture
  CHECK(judge.entail("h", "p").p_neutral == 1.0);
  CHECK(judge.entail("same", "same").p_entail == 1.0);
  CHECK(judge.entail("x", "y").p_neutral == 1.0);

  CHECK_THROWS_AS(judge.add_fixture("a", "b", 0.9, 0.9, 0.9), ValidationError);
}

TEST_CASE("entailment fixture files load ordered pairs") {
  TempFile file("uq_test_entail_fixture.json");
  {
    std::ofstream out(file.path);
    out << R"([
      {"premise": "p", "hypothesis": "h", "p_entail": 0.7, "p_neutral": 0.2, "p_contradict": 0.1}
    ])";
  }
  MockEntailmentProvider judge = MockEntailmentProvider::from_fixture_file(file.path);
  CHECK(judge.entail("p", "h").p_entail == 0.7);
}

TEST_CASE("transport counter tallies each provider family") {
  auto counter = std::make_shared<TransportCounter>();
  MockChatProvider chat;
  chat.set_default_entries({{"r", std::nullopt}});
  chat.set_counter(counter);
  MockEmbeddingProvider embedder;
  embedder.set_counter(counter);
  MockEntailmentProvider judge;
  judge.set_counter(counter);

  chat.complete(request_for("a", 0), 0);
  chat.complete(request_for("b", 0), 0);
  embedder.embed_one("x");
  judge.entail("p", "h");

  CHECK(counter->chat_calls() == 2);
  CHECK(counter->embed_calls() == 1);
  CHECK(counter->entail_calls() == 1);
  CHECK(counter->total() == 4);
}

TEST_CASE("chat_generate issues one transport call per sample") {
  auto counter = std::make_shared<TransportCounter>();
  MockChatProvider chat;
  chat.set_counter(counter);
  chat.add_fixture("q", {{"a", std::nullopt}, {"b", std::nullopt}});

  ChatRequest request = request_for("q", 0);
  request.sample_count = 4;
  const std::vector<Generation> generations = chat_generate(chat, request);
  REQUIRE(generations.size() == 4);
  CHECK(counter->chat_calls() == 4);
  CHECK(generations[0].text == "a");
  CHECK(generations[1].text == "b");
  CHECK(generations[2].text == "a");
}

TEST_CASE("sha256 matches a known test vector") {
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("cache modes parse and print") {
  CHECK(parse_cache_mode("live") == CacheMode::kLive);
  CHECK(parse_cache_mode("record") == CacheMode::kRecord);
  CHECK(parse_cache_mode("replay") == CacheMode::kReplay);
  CHECK(cache_mode_name(CacheMode::kReplay) == "replay");
  CHECK_THROWS_AS(parse_cache_mode("memoize"), ConfigError);
}

TEST_CASE("record then replay round-trips every provider family") {
  TempFile file("uq_test_cache.bin");

  Generation recorded_generation;
  EmbeddingVector recorded_embedding;
  EntailmentJudgment recorded_judgment;

  {
    auto cache = ResponseCache::open(file.path, CacheMode::kRecord);
    auto chat = std::make_shared<MockChatProvider>();
    chat->add_fixture("q", {{"r", std::vector<TokenLogprob>{{"r", -0.25}}}});
    auto embedder = std::make_shared<MockEmbeddingProvider>(8);
    auto judge = std::make_shared<MockEntailmentProvider>();
    judge->add_fixture("p", "h", 0.6, 0.3, 0.1);

    CachedChatProvider cached_chat(chat, cache);
    CachedEmbeddingProvider cached_embed(embedder, cache);
    CachedEntailmentProvider cached_entail(judge, cache);
    CHECK(cached_chat.id() == "mock-chat");

    ChatRequest request = request_for("q", 3);
    request.want_logprobs = true;
    recorded_generation = cached_chat.complete(request, 0);
    recorded_embedding = cached_embed.embed_one("text");
    recorded_judgment = cached_entail.entail("p", "h");
    CHECK(cache->size() == 3);
  }

  {
    auto cache = ResponseCache::open(file.path, CacheMode::kReplay);
    auto counter = std::make_shared<TransportCounter>();
    auto offline_chat = std::make_shared<MockChatProvider>();  // would fail if called
    offline_chat->set_counter(counter);
    auto offline_embed = std::make_shared<MockEmbeddingProvider>(8);
    offline_embed->set_counter(counter);
    auto offline_judge = std::make_shared<MockEntailmentProvider>();
    offline_judge->set_counter(counter);

    CachedChatProvider cached_chat(offline_chat, cache);
    CachedEmbeddingProvider cached_embed(offline_embed, cache);
    CachedEntailmentProvider cached_entail(offline_judge, cache);

    ChatRequest request = request_for("q", 3);
    request.want_logprobs = true;
    const Generation replayed = cached_chat.complete(request, 0);
    CHECK(replayed == recorded_generation);
    CHECK(cached_embed.embed_one("text").values == recorded_embedding.values);
    const EntailmentJudgment judgment = cached_entail.entail("p", "h");
    CHECK(judgment.p_entail == recorded_judgment.p_entail);

    // every hit was served from the cache, not the inner providers
    CHECK(counter->total() == 0);

    // replay misses are errors: different request key
    CHECK_THROWS_AS(cached_chat.complete(request_for("q", 4), 0), ReplayMissError);
    CHECK_THROWS_AS(cached_chat.complete(request, 1), ReplayMissError);
    ChatRequest hotter = request;
    hotter.temperature = 0.9;
    CHECK_THROWS_AS(cached_chat.complete(hotter, 0), ReplayMissError);
  }
}

TEST_CASE("record mode reuses existing entries instead of re-calling") {
  TempFile file("uq_test_cache_reuse.bin");
  auto cache = ResponseCache::open(file.path, CacheMode::kRecord);
  auto counter = std::make_shared<TransportCounter>();
  auto chat = std::make_shared<MockChatProvider>();
  chat->set_counter(counter);
  chat->add_fixture("q", {{"r", std::nullopt}});
  CachedChatProvider cached(chat, cache);

  cached.complete(request_for("q", 0), 0);
  cached.complete(request_for("q", 0), 0);
  CHECK(counter->chat_calls() == 1);
  CHECK(cache->size() == 1);
}

TEST_CASE("replay mode requires the cache file to exist") {
  CHECK_THROWS_AS(ResponseCache::open("/nonexistent/uq_cache.bin", CacheMode::kReplay),
                  ConfigError);
}

TEST_CASE("a corrupted cache record is rejected") {
  TempFile file("uq_test_cache_corrupt.bin");
  {
    auto cache = ResponseCache::open(file.path, CacheMode::kRecord);
    cache->store(sha256("key"), "payload");
  }
  // flip one payload byte behind the digests
  {
    std::fstream stream(file.path,
                        std::ios::binary | std::ios::in | std::ios::out);
    stream.seekp(-9, std::ios::end);  // inside the trailing payload digest
    char byte = 0;
    stream.seekg(-9, std::ios::end);
    stream.get(byte);
    byte = static_cast<char>(byte ^ 0x01);
    stream.seekp(-9, std::ios::end);
    stream.put(byte);
  }
  CHECK_THROWS_AS(ResponseCache::open(file.path, CacheMode::kReplay),
                  CacheCorruptionError);
}

TEST_CASE("a truncated cache file is rejected") {
  TempFile file("uq_test_cache_trunc.bin");
  {
    auto cache = ResponseCache::open(file.path, CacheMode::kRecord);
    cache->store(sha256("key"), "some payload worth keeping");
  }
  std::error_code ec;
  const auto full = std::filesystem::file_size(file.path, ec);
  std::filesystem::resize_file(file.path, full - 5, ec);
  REQUIRE(!ec);
  CHECK_THROWS_AS(ResponseCache::open(file.path, CacheMode::kReplay), CacheCorruptionError);
}

TEST_CASE("cached providers in live pipelines stay byte-stable across processes") {
  // same store key both times: the payload written first wins and the
  // second run replays it exactly
  TempFile file("uq_test_cache_stable.bin");
  std::string first_payload;
  for (int round = 0; round < 2; ++round) {
    auto cache = ResponseCache::open(file.path,
                                     round == 0 ? CacheMode::kRecord : CacheMode::kReplay);
    auto chat = std::make_shared<MockChatProvider>();
    chat->add_fixture("q", {{"payload", std::nullopt}});
    CachedChatProvider cached(chat, cache);
    const Generation generation = cached.complete(request_for("q", 1), 0);
    if (round == 0) {
      first_payload = generation.text;
    } else {
      CHECK(generation.text == first_payload);
    }
  }
}
