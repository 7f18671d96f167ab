// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "graphroute/hetero_graph.hpp"
#include "graphroute/hgt.hpp"
#include "graphroute/prediction_head.hpp"

namespace graphroute {

/// Everything needed to rebuild the model around stored tensors.
struct ModelConfig {
  int embedding_width = 768;
  std::string encoder_kind = "deterministic-test";
  std::uint64_t encoder_seed = 0;
  GraphConfig graph;
  HgtConfig hgt;
  HeadConfig head;
  HgtSchema schema;
  double temperature = 0.5;

  /// Canonical JSON; the config digest is FNV-1a over its compact dump.
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  std::uint64_t digest() const;
  /// "full" or a '+'-joined list of active ablations.
  std::string variant_name() const;
};

struct Model {
  ModelConfig config;
  HgtParams hgt;
  HeadParams head;

  /// Digest over both parameter sets (names, shapes, bits).
  std::uint64_t parameter_digest() const;
};

/// Fresh parameters for `config`.
Model init_model(const ModelConfig& config);

struct TrainingMetadata {
  int epoch = 0;
  int best_epoch = 0;
  std::optional<double> valid_accuracy;
  std::optional<double> valid_auc;
  std::optional<double> train_loss;
  long optimizer_steps = 0;
};

struct Checkpoint {
  Model model;
  TrainingMetadata training;
};

/// Little-endian layout:
///   "GRCKPT\0\0" | u32 version | u64 config digest | u64 schema digest |
///   u64 payload digest | u64 payload size | payload
/// payload:
///   u64 metadata length | metadata JSON | u32 tensor count |
///   per tensor: u32 name length | name | u64 rows | u64 cols | f64 values
/// The payload digest covers every payload byte. Tensor names start with
/// "hgt." or "head."; none is indexed by node identity.
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes atomically (temp file then rename).
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws DataError on bad magic, version, digests, truncation or roster
/// mismatch; never returns a partially read checkpoint.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& source_name);

struct TensorInfo {
  std::string name;
  std::int64_t rows = 0;
  std::int64_t cols = 0;
};
std::vector<TensorInfo> tensor_roster(const Checkpoint& checkpoint);

}  // namespace graphroute
