// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/text_encoder.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "graphroute/digest.hpp"
#include "graphroute/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace graphroute {

namespace {

constexpr char kCacheMagic[8] = {'G', 'R', 'T', 'X', 'T', 'E', 'M', 'B'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
bool get_le(std::istream& in, T& value) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) return false;
  std::memcpy(&value, buf, sizeof(T));
  return true;
}

// Rounds to f32 and nudges components (largest first) until the f32 vector
// has unit L2 norm to within double rounding.
std::vector<float> to_unit_f32(const std::vector<double>& v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return std::abs(v[a]) > std::abs(v[b]); });
  double s = 0.0;
  for (float x : out) s += static_cast<double>(x) * static_cast<double>(x);
  for (std::size_t idx : order) {
    if (std::abs(std::sqrt(s) - 1.0) < 1e-12) break;
    const double x = out[idx];
    const double target_sq = x * x + (1.0 - s);
    if (target_sq <= 0.0) continue;
    out[idx] = static_cast<float>(std::copysign(std::sqrt(target_sq), x));
    s += static_cast<double>(out[idx]) * static_cast<double>(out[idx]) - x * x;
  }
  return out;
}

}  // namespace

void EncoderSpec::validate() const {
  if (width < 8) throw UsageError("encoder width must be >= 8");
  if (kind == EncoderKind::kExternal && provider_url.empty()) {
    throw UsageError("external encoder requires a provider url");
  }
}

std::string EncoderSpec::kind_name() const {
  return kind == EncoderKind::kExternal ? "external" : "deterministic-test";
}

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || uc >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

Embedding deterministic_embedding(std::string_view text, int width, std::uint64_t seed) {
  const auto w = static_cast<std::size_t>(width);
  std::vector<double> acc(w, 0.0);
  auto add_feature = [&](std::string_view feature) {
    Rng rng(mix_seed(seed, digest_of(feature)));
    for (std::size_t i = 0; i < w; ++i) acc[i] += rng.normal();
  };
  const auto tokens = word_tokens(text);
  if (tokens.empty()) {
    add_feature(text);
  } else {
    for (const auto& t : tokens) add_feature(t);
  }
  double norm = 0.0;
  for (double x : acc) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : acc) x /= norm;
  const auto f = to_unit_f32(acc);
  return Embedding(f.begin(), f.end());
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url) : url_(std::move(url)) {}

std::vector<Embedding> HttpEmbeddingProvider::embed(std::span<const std::string> texts, int width) {
  // Split "scheme://host[:port]/path".
  const auto scheme_end = url_.find("://");
  const auto path_start = url_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string base = path_start == std::string::npos ? url_ : url_.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url_.substr(path_start);

  httplib::Client client(base);
  client.set_connection_timeout(5);
  client.set_read_timeout(60);
  nlohmann::json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw RuntimeError("embedding provider '" + name() + "' unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw RuntimeError("embedding provider '" + name() + "' returned HTTP " + std::to_string(res->status));
  }
  std::vector<Embedding> out;
  try {
    const auto reply = nlohmann::json::parse(res->body);
    for (const auto& row : reply.at("embeddings")) out.push_back(row.get<Embedding>());
  } catch (const nlohmann::json::exception& e) {
    throw RuntimeError("embedding provider '" + name() + "' sent a malformed reply: " + e.what());
  }
  if (out.size() != texts.size()) {
    throw RuntimeError("embedding provider '" + name() + "' returned the wrong number of vectors");
  }
  for (const auto& e : out) {
    if (static_cast<int>(e.size()) != width) {
      throw RuntimeError("embedding provider '" + name() + "' returned width " + std::to_string(e.size()) +
                         ", expected " + std::to_string(width));
    }
  }
  return out;
}

TextEncoder::TextEncoder(EncoderSpec spec, std::shared_ptr<EmbeddingProvider> provider)
    : spec_(std::move(spec)), provider_(std::move(provider)) {
  spec_.validate();
  if (spec_.kind == EncoderKind::kExternal && !provider_) {
    provider_ = std::make_shared<HttpEmbeddingProvider>(spec_.provider_url);
  }
  if (spec_.cache_path && std::filesystem::exists(*spec_.cache_path)) load_cache();
}

TextEncoder::~TextEncoder() {
  try {
    flush();
  } catch (...) {
    // Destructors must not throw; an unflushed cache only costs recomputation.
  }
}

std::uint64_t TextEncoder::cache_key(std::string_view text) const {
  Digest d;
  d.update(spec_.kind_name()).update(static_cast<std::uint64_t>(spec_.width)).update(spec_.seed);
  d.update(digest_of(text));
  return d.value();
}

Embedding TextEncoder::compute_local(std::string_view text) const {
  return deterministic_embedding(text, spec_.width, spec_.seed);
}

Embedding TextEncoder::encode(std::string_view text) const {
  const std::string owned(text);
  return encode_batch(std::span<const std::string>(&owned, 1)).front();
}

std::vector<Embedding> TextEncoder::encode_batch(std::span<const std::string> texts) const {
  std::vector<Embedding> out(texts.size());
  std::vector<std::size_t> missing;
  {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      auto it = cache_.find(cache_key(texts[i]));
      if (it != cache_.end()) {
        out[i].assign(it->second.begin(), it->second.end());
      } else {
        missing.push_back(i);
      }
    }
  }
  if (missing.empty()) return out;

  std::vector<std::vector<float>> computed(missing.size());
  if (spec_.kind == EncoderKind::kDeterministicTest) {
    for (std::size_t j = 0; j < missing.size(); ++j) {
      const auto e = compute_local(texts[missing[j]]);
      computed[j].assign(e.begin(), e.end());
    }
  } else {
    std::vector<std::string> batch;
    batch.reserve(missing.size());
    for (auto i : missing) batch.push_back(texts[i]);
    const auto vectors = provider_->embed(batch, spec_.width);
    for (std::size_t j = 0; j < missing.size(); ++j) {
      computed[j].assign(vectors[j].begin(), vectors[j].end());
    }
  }
  std::lock_guard lock(mutex_);
  for (std::size_t j = 0; j < missing.size(); ++j) {
    out[missing[j]].assign(computed[j].begin(), computed[j].end());
    cache_.emplace(cache_key(texts[missing[j]]), std::move(computed[j]));
  }
  dirty_ = true;
  return out;
}

Embedding TextEncoder::encode_llm(const LlmInfo& llm) const {
  return encode(llm.description.empty() ? llm.id.value : llm.description);
}

std::size_t TextEncoder::cached_entries() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

void TextEncoder::load_cache() {
  const auto& path = *spec_.cache_path;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open encoder cache '" + path.string() + "'");
  char magic[8];
  std::uint32_t version = 0, width = 0;
  std::uint64_t count = 0;
  if (!in.read(magic, 8) || std::memcmp(magic, kCacheMagic, 8) != 0) {
    throw DataError("encoder cache '" + path.string() + "': bad magic");
  }
  if (!get_le(in, version) || version != kCacheVersion) {
    throw DataError("encoder cache '" + path.string() + "': unsupported version");
  }
  if (!get_le(in, width) || !get_le(in, count)) throw DataError("encoder cache '" + path.string() + "': truncated header");
  if (static_cast<int>(width) != spec_.width) {
    throw DataError("encoder cache '" + path.string() + "': width " + std::to_string(width) +
                    " does not match configured width " + std::to_string(spec_.width));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t key = 0;
    std::vector<float> values(width);
    if (!get_le(in, key) ||
        !in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(width * sizeof(float)))) {
      throw DataError("encoder cache '" + path.string() + "': truncated entry " + std::to_string(i));
    }
    cache_.emplace(key, std::move(values));
  }
}

void TextEncoder::flush() const {
  if (!spec_.cache_path) return;
  std::lock_guard lock(mutex_);
  if (!dirty_) return;
  std::vector<std::uint64_t> keys;
  keys.reserve(cache_.size());
  for (const auto& [k, _] : cache_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  std::string blob;
  blob.append(kCacheMagic, 8);
  put_le(blob, kCacheVersion);
  put_le(blob, static_cast<std::uint32_t>(spec_.width));
  put_le(blob, static_cast<std::uint64_t>(keys.size()));
  for (auto k : keys) {
    put_le(blob, k);
    const auto& v = cache_.at(k);
    blob.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
  }
  write_text_file_atomic(*spec_.cache_path, blob);
  dirty_ = false;
}

}  // namespace graphroute
