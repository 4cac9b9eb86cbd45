#include "uqkit/cache.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "uqkit/errors.hpp"

namespace uq {

namespace {

constexpr char kMagic[8] = {'U', 'Q', 'C', 'A', 'C', 'H', 'E', '1'};

std::string hex_of(const std::array<unsigned char, 32>& digest) {
  static const char* kHex = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (unsigned char byte : digest) {
    out.push_back(kHex[byte >> 4]);
    out.push_back(kHex[byte & 0x0f]);
  }
  return out;
}

using json = nlohmann::json;

json generation_to_json(const Generation& generation) {
  json doc;
  doc["text"] = generation.text;
  if (generation.token_logprobs.has_value()) {
    json logprobs = json::array();
    for (const auto& entry : *generation.token_logprobs) {
      logprobs.push_back(json::array({entry.token, entry.logprob}));
    }
    doc["logprobs"] = std::move(logprobs);
  } else {
    doc["logprobs"] = nullptr;
  }
  return doc;
}

Generation generation_from_json(const json& doc) {
  Generation generation;
  generation.text = doc.at("text").get<std::string>();
  if (!doc.at("logprobs").is_null()) {
    std::vector<TokenLogprob> logprobs;
    for (const auto& pair : doc.at("logprobs")) {
      logprobs.push_back({pair.at(0).get<std::string>(), pair.at(1).get<double>()});
    }
    generation.token_logprobs = std::move(logprobs);
  }
  return generation;
}

}  // namespace

CacheMode parse_cache_mode(const std::string& name) {
  if (name == "live") return CacheMode::kLive;
  if (name == "record") return CacheMode::kRecord;
  if (name == "replay") return CacheMode::kReplay;
  throw ConfigError("unknown cache mode: '" + name + "' (expected live|record|replay)");
}

std::string cache_mode_name(CacheMode mode) {
  switch (mode) {
    case CacheMode::kLive: return "live";
    case CacheMode::kRecord: return "record";
    case CacheMode::kReplay: return "replay";
  }
  return "unknown";
}

std::array<unsigned char, 32> sha256(const std::string& data) {
  std::array<unsigned char, 32> digest{};
  unsigned int length = 0;
  EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr);
  return digest;
}

std::string sha256_hex(const std::string& data) { return hex_of(sha256(data)); }

std::shared_ptr<ResponseCache> ResponseCache::open(const std::string& path,
                                                   CacheMode mode) {
  if (mode == CacheMode::kLive) {
    throw ConfigError("live mode bypasses the cache; do not open one");
  }
  return std::shared_ptr<ResponseCache>(new ResponseCache(path, mode));
}

ResponseCache::ResponseCache(const std::string& path, CacheMode mode)
    : path_(path), mode_(mode) {
  const bool exists = std::filesystem::exists(path_);
  if (mode_ == CacheMode::kReplay && !exists) {
    throw ConfigError("replay cache file not found: " + path_);
  }
  if (exists) {
    load();
  } else {
    std::ofstream out(path_, std::ios::binary);
    if (!out) {
      throw ConfigError("cannot create cache file: " + path_);
    }
    out.write(kMagic, sizeof(kMagic));
  }
}

void ResponseCache::load() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open cache file: " + path_);
  }
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CacheCorruptionError("cache file has a bad header: " + path_);
  }
  while (true) {
    std::array<unsigned char, 32> key{};
    if (!in.read(reinterpret_cast<char*>(key.data()), key.size())) {
      if (in.eof() && in.gcount() == 0) {
        break;  // clean end of file
      }
      throw CacheCorruptionError("truncated cache record in " + path_);
    }
    std::uint64_t length = 0;
    unsigned char length_bytes[8];
    if (!in.read(reinterpret_cast<char*>(length_bytes), sizeof(length_bytes))) {
      throw CacheCorruptionError("truncated cache record in " + path_);
    }
    for (int i = 7; i >= 0; --i) {
      length = (length << 8) | length_bytes[i];
    }
    std::string payload(length, '\0');
    if (length > 0 && !in.read(payload.data(), static_cast<std::streamsize>(length))) {
      throw CacheCorruptionError("truncated cache payload in " + path_);
    }
    std::array<unsigned char, 32> stored_digest{};
    if (!in.read(reinterpret_cast<char*>(stored_digest.data()), stored_digest.size())) {
      throw CacheCorruptionError("truncated cache payload digest in " + path_);
    }
    if (sha256(payload) != stored_digest) {
      throw CacheCorruptionError("cache payload digest mismatch in " + path_);
    }
    entries_.emplace(hex_of(key), std::move(payload));
  }
}

std::optional<std::string> ResponseCache::lookup(
    const std::array<unsigned char, 32>& key) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(hex_of(key));
  if (it == entries_.end()) {
    return std::nullopt;
  }
  return it->second;
}

void ResponseCache::store(const std::array<unsigned char, 32>& key,
                          const std::string& payload) {
  if (mode_ != CacheMode::kRecord) {
    throw ConfigError("cache store is only valid in record mode");
  }
  std::unique_lock lock(mutex_);
  auto [it, inserted] = entries_.emplace(hex_of(key), payload);
  if (!inserted) {
    return;
  }
  append_record(key, payload);
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

void ResponseCache::append_record(const std::array<unsigned char, 32>& key,
                                  const std::string& payload) {
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) {
    throw ConfigError("cannot append to cache file: " + path_);
  }
  out.write(reinterpret_cast<const char*>(key.data()), key.size());
  unsigned char length_bytes[8];
  std::uint64_t length = payload.size();
  for (int i = 0; i < 8; ++i) {
    length_bytes[i] = static_cast<unsigned char>(length >> (8 * i));
  }
  out.write(reinterpret_cast<const char*>(length_bytes), sizeof(length_bytes));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  const auto digest = sha256(payload);
  out.write(reinterpret_cast<const char*>(digest.data()), digest.size());
  out.flush();
}

CachedChatProvider::CachedChatProvider(std::shared_ptr<ChatProvider> inner,
                                       std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

Generation CachedChatProvider::complete(const ChatRequest& request, int sample_index) {
  json key_doc;
  key_doc["op"] = "chat";
  key_doc["provider"] = inner_->id();
  key_doc["prompt"] = request.prompt;
  key_doc["sample_count"] = request.sample_count;
  key_doc["temperature"] = request.temperature;
  key_doc["want_logprobs"] = request.want_logprobs;
  if (request.seed.has_value()) {
    key_doc["seed"] = *request.seed;
  } else {
    key_doc["seed"] = nullptr;
  }
  key_doc["sample_index"] = sample_index;
  const auto key = sha256(key_doc.dump());

  if (auto hit = cache_->lookup(key)) {
    return generation_from_json(json::parse(*hit));
  }
  if (cache_->mode() == CacheMode::kReplay) {
    throw ReplayMissError("replay cache miss for chat request on prompt: " +
                          request.prompt);
  }
  Generation generation = inner_->complete(request, sample_index);
  cache_->store(key, generation_to_json(generation).dump());
  return generation;
}

CachedEmbeddingProvider::CachedEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner,
                                                 std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

EmbeddingVector CachedEmbeddingProvider::embed_one(const std::string& text) {
  json key_doc;
  key_doc["op"] = "embed";
  key_doc["provider"] = inner_->id();
  key_doc["text"] = text;
  const auto key = sha256(key_doc.dump());

  if (auto hit = cache_->lookup(key)) {
    json doc = json::parse(*hit);
    return EmbeddingVector{doc.at("values").get<std::vector<double>>()};
  }
  if (cache_->mode() == CacheMode::kReplay) {
    throw ReplayMissError("replay cache miss for embedding of text: " + text);
  }
  EmbeddingVector vector = inner_->embed_one(text);
  json doc;
  doc["values"] = vector.values;
  cache_->store(key, doc.dump());
  return vector;
}

CachedEntailmentProvider::CachedEntailmentProvider(
    std::shared_ptr<EntailmentProvider> inner, std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

EntailmentJudgment CachedEntailmentProvider::entail(const std::string& premise,
                                                    const std::string& hypothesis) {
  json key_doc;
  key_doc["op"] = "entail";
  key_doc["provider"] = inner_->id();
  key_doc["premise"] = premise;
  key_doc["hypothesis"] = hypothesis;
  const auto key = sha256(key_doc.dump());

  if (auto hit = cache_->lookup(key)) {
    json doc = json::parse(*hit);
    return EntailmentJudgment::validated(doc.at("p_entail").get<double>(),
                                         doc.at("p_neutral").get<double>(),
                                         doc.at("p_contradict").get<double>());
  }
  if (cache_->mode() == CacheMode::kReplay) {
    throw ReplayMissError("replay cache miss for entailment pair");
  }
  EntailmentJudgment judgment = inner_->entail(premise, hypothesis);
  json doc;
  doc["p_entail"] = judgment.p_entail;
  doc["p_neutral"] = judgment.p_neutral;
  doc["p_contradict"] = judgment.p_contradict;
  cache_->store(key, doc.dump());
  return judgment;
}

}  // namespace uq
