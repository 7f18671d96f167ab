// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "graphroute/checkpoint.hpp"
#include "graphroute/feedback_norm.hpp"
#include "graphroute/interaction_store.hpp"
#include "graphroute/metrics.hpp"
#include "graphroute/text_encoder.hpp"

namespace graphroute {

struct Ablations {
  bool no_preference_feature = false;
  bool dot_product_head = false;
  bool homogeneous_backbone = false;
  bool no_user_embedding = false;
};

struct TrainConfig {
  int epochs = 350;
  double learning_rate = 5e-4;
  int k = 10;
  /// Supervision triples per optimizer step.
  int supervision_batch = 256;
  int steps_per_epoch = 1;
  double temperature = 0.5;
  std::uint64_t seed = 0;

  int hidden = 768;
  int layers = 3;
  int heads = 4;
  int head_hidden = 256;
  int head_heads = 4;
  double dropout = 0.1;
  int preference_width = 16;
  Ablations ablations;

  void validate() const;
  /// Model shape for an encoder of the given width; seeds derive from `seed`.
  ModelConfig model_config(int embedding_width) const;
};

struct EpochLog {
  int epoch = 0;
  /// Mean loss over the epoch's steps; absent for epoch 0 (initialization).
  std::optional<double> loss;
  std::optional<double> valid_accuracy;
  std::optional<double> valid_auc;
  int skipped_batches = 0;
  std::string variant;

  std::string to_json() const;
};

/// Read-only inputs shared by training and evaluation.
struct DataView {
  const InteractionStore& store;
  const DatasetSplit& split;
  const RatingTable& ratings;
  const TextEncoder& encoder;
};

struct TrainResult {
  /// Best epoch by validation AUC, then accuracy.
  Checkpoint best;
  std::vector<EpochLog> log;

  /// One JSON object per line.
  std::string log_jsonl() const;
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
  std::function<void(const std::string&)> warn;
  /// Observes each step's visible records and supervision record ids.
  std::function<void(int epoch, const std::set<std::string>& visible, const std::vector<std::string>& supervision)>
      on_step;
};

TrainResult train(const DataView& data, const TrainConfig& config, const TrainHooks& hooks = {});

/// Ranking groups of `ids`: records sharing (user, first query), members in
/// record-id order, groups in key order.
std::vector<std::vector<std::string>> ranking_groups(const InteractionStore& store, const std::set<std::string>& ids);

/// Whole groups drawn from `groups` after removing `visible` members, until
/// adding another group would exceed `batch` triples (at least one group is
/// taken). Groups left with fewer than two members are never drawn.
std::vector<std::vector<std::string>> sample_supervision(const std::vector<std::vector<std::string>>& groups,
                                                         const std::set<std::string>& visible, int batch,
                                                         std::uint64_t seed);

/// Scores every group of `ids` against `graph`.
std::vector<ScoredGroup> score_groups(const Model& model, const HeteroGraph& graph, const DataView& data,
                                      const std::vector<std::vector<std::string>>& groups);

struct EvalOptions {
  int k = 10;
  std::uint64_t seed = 0;
};

struct EvalResult {
  int k = 0;
  EvalReport overall;
  std::optional<EvalReport> old_users;
  std::optional<EvalReport> new_users;
  /// Few-shot records consumed from new users' test data.
  std::size_t history_records = 0;

  std::string to_json() const;
  std::string to_text() const;
};

/// Evaluates the groups of `target` (normally the test split). Old users are
/// scored on a k-per-user visible sample of train records. Each new user
/// contributes whole ranking groups from `target` as few-shot history until
/// it holds at least k records; the rest of that user's groups are scored on
/// the visible subgraph extended with the history. No parameter updates.
EvalResult evaluate(const Model& model, const DataView& data, const std::set<std::string>& target,
                    const EvalOptions& options);

inline constexpr std::array<int, 6> kSweepK{3, 5, 8, 10, 15, 20};

}  // namespace graphroute
