// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "graphroute/interaction_store.hpp"
#include "graphroute/tensor.hpp"

namespace graphroute {

class TextEncoder;

using WinRates = std::map<LlmId, double>;

/// Per-LLM wins / comparisons over pairwise ranking feedback (group_size 2).
/// Ties count as half a win for both sides; LLMs without comparisons are
/// omitted.
WinRates win_rates(std::span<const InteractionRecord> records);

/// Spearman rank correlation over the keys shared by both maps, with
/// average ranks for ties. Throws UsageError with fewer than 3 shared keys.
/// Returns 0 when either ranking is constant.
double spearman(const WinRates& a, const WinRates& b);

/// Spearman between the win-rate rankings of two record halves.
double self_spearman(std::span<const InteractionRecord> first_half, std::span<const InteractionRecord> second_half);

/// Seeded k-means (Lloyd iterations, k-means++ seeding) over matrix rows.
std::vector<int> kmeans(const Matrix& points, int clusters, std::uint64_t seed, int max_iterations = 100);

struct ConsistencyReport {
  double self_spearman = 0.0;
  double global_spearman = 0.0;
  double intra_cluster_spearman = 0.0;
  double inter_cluster_spearman = 0.0;
  std::map<std::string, int> clusters;
  std::map<std::string, double> per_user_self;
  std::map<std::string, WinRates> user_win_rates;
  std::size_t users_analyzed = 0;
  std::size_t pairs_skipped = 0;

  std::string to_json() const;
  std::string to_text() const;
  /// user x llm win-rate matrix; empty cells for missing comparisons.
  std::string heatmap_csv() const;
};

struct ConsistencyOptions {
  int clusters = 3;
  std::uint64_t seed = 0;
  /// Users need at least 2 * min_records_per_half records.
  std::size_t min_records_per_half = 25;
};

ConsistencyReport consistency_report(const InteractionStore& store, const TextEncoder& encoder,
                                     const ConsistencyOptions& options);

}  // namespace graphroute
