// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "graphroute/interaction_store.hpp"

namespace graphroute {

using Embedding = std::vector<double>;

enum class EncoderKind { kExternal, kDeterministicTest };

struct EncoderSpec {
  EncoderKind kind = EncoderKind::kDeterministicTest;
  int width = 768;
  std::optional<std::filesystem::path> cache_path;
  std::uint64_t seed = 0;
  /// Endpoint for the external kind: POST {"texts": [...]} -> {"embeddings": [[...]]}.
  std::string provider_url;

  void validate() const;
  std::string kind_name() const;
};

/// Text-in / vector-out boundary to a pretrained sentence encoder.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string name() const = 0;
  virtual std::vector<Embedding> embed(std::span<const std::string> texts, int width) = 0;
};

/// JSON-over-HTTP provider.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(std::string url);
  std::string name() const override { return "http:" + url_; }
  std::vector<Embedding> embed(std::span<const std::string> texts, int width) override;

 private:
  std::string url_;
};

/// Produces node embeddings for every text-bearing node.
///
/// Results are memoized in memory and, when `cache_path` is set, in a
/// content-addressed binary file:
///   magic "GRTXTEMB" | u32 version | u32 width | u64 count |
///   count x (u64 key | width x f32), all little-endian.
/// Embeddings are rounded to f32 before use so that cold and warm cache paths
/// agree bitwise. encode() is thread-safe.
class TextEncoder {
 public:
  explicit TextEncoder(EncoderSpec spec, std::shared_ptr<EmbeddingProvider> provider = nullptr);
  ~TextEncoder();

  TextEncoder(const TextEncoder&) = delete;
  TextEncoder& operator=(const TextEncoder&) = delete;

  const EncoderSpec& spec() const { return spec_; }
  int width() const { return spec_.width; }

  Embedding encode(std::string_view text) const;
  std::vector<Embedding> encode_batch(std::span<const std::string> texts) const;
  /// Encodes the description, or the id when the description is empty.
  Embedding encode_llm(const LlmInfo& llm) const;

  /// Persists the cache (write-temp-then-rename). No-op without cache_path.
  void flush() const;
  std::size_t cached_entries() const;

 private:
  std::uint64_t cache_key(std::string_view text) const;
  Embedding compute_local(std::string_view text) const;
  void load_cache();

  EncoderSpec spec_;
  std::shared_ptr<EmbeddingProvider> provider_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::uint64_t, std::vector<float>> cache_;
  mutable bool dirty_ = false;
};

/// Seeded hashed bag-of-words embedding, unit norm, f32-representable.
Embedding deterministic_embedding(std::string_view text, int width, std::uint64_t seed);

/// Lower-cased alphanumeric word tokens.
std::vector<std::string> word_tokens(std::string_view text);
/// Whitespace-delimited token count.
std::size_t whitespace_token_count(std::string_view text);

}  // namespace graphroute
