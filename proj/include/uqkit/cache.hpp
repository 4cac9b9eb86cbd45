#pragma once

#include <array>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "uqkit/backend.hpp"

namespace uq {

enum class CacheMode { kLive, kRecord, kReplay };

CacheMode parse_cache_mode(const std::string& name);
std::string cache_mode_name(CacheMode mode);

std::array<unsigned char, 32> sha256(const std::string& data);
std::string sha256_hex(const std::string& data);

// Append-only record/replay store. Each record on disk is
//   [32B key digest][u64 LE payload length][payload][32B payload digest]
// behind an 8-byte magic. Key digests are SHA-256 over the canonical
// request serialization; payload digests detect corruption on read.
// Writes are serialized, reads are concurrent.
class ResponseCache {
 public:
  // Record mode loads an existing file when present and appends to it;
  // replay mode requires the file to exist and never writes.
  static std::shared_ptr<ResponseCache> open(const std::string& path, CacheMode mode);

  std::optional<std::string> lookup(const std::array<unsigned char, 32>& key) const;

  // Appends the record unless the key is already present.
  void store(const std::array<unsigned char, 32>& key, const std::string& payload);

  CacheMode mode() const { return mode_; }
  std::size_t size() const;

 private:
  ResponseCache(const std::string& path, CacheMode mode);
  void load();
  void append_record(const std::array<unsigned char, 32>& key, const std::string& payload);

  std::string path_;
  CacheMode mode_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::string> entries_;  // hex digest -> payload
};

// In replay mode a hit returns the stored result bit-exactly and a miss is
// a ReplayMissError; in record mode misses invoke the provider and persist
// the result. The wrapped provider keeps its id so cache keys are stable
// whether or not a wrapper is in place.
class CachedChatProvider : public ChatProvider {
 public:
  CachedChatProvider(std::shared_ptr<ChatProvider> inner,
                     std::shared_ptr<ResponseCache> cache);

  Generation complete(const ChatRequest& request, int sample_index) override;
  bool supports_logprobs() const override { return inner_->supports_logprobs(); }
  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<ChatProvider> inner_;
  std::shared_ptr<ResponseCache> cache_;
};

class CachedEmbeddingProvider : public EmbeddingProvider {
 public:
  CachedEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner,
                          std::shared_ptr<ResponseCache> cache);

  EmbeddingVector embed_one(const std::string& text) override;
  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  std::shared_ptr<ResponseCache> cache_;
};

class CachedEntailmentProvider : public EntailmentProvider {
 public:
  CachedEntailmentProvider(std::shared_ptr<EntailmentProvider> inner,
                           std::shared_ptr<ResponseCache> cache);

  EntailmentJudgment entail(const std::string& premise,
                            const std::string& hypothesis) override;
  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<EntailmentProvider> inner_;
  std::shared_ptr<ResponseCache> cache_;
};

}  // namespace uq
