// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "graphroute/feedback_norm.hpp"
#include "graphroute/hetero_graph.hpp"
#include "graphroute/interaction_store.hpp"
#include "graphroute/metrics.hpp"
#include "graphroute/parameters.hpp"
#include "graphroute/text_encoder.hpp"

namespace graphroute::testing {

/// One record with a scalar score per turn. Queries are "<query>" then
/// "<query> / turn t" for follow-ups.
InteractionRecord scored_record(const std::string& id, const std::string& user, const std::string& llm,
                                const std::string& query, std::vector<double> scores);

std::vector<LlmInfo> catalog(std::initializer_list<const char*> ids);

std::unique_ptr<TextEncoder> test_encoder(int width = 16, std::uint64_t seed = 0);

/// Random store: 1..6 users, 2..4 LLMs, a few queries per user answered by a
/// random subset of LLMs, 1..4 turns per record. Groups with two or more
/// members get ranking feedback on their first turn about half the time.
InteractionStore random_store(std::uint64_t seed);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// Structural checks on a built graph; one message per violation.
std::vector<std::string> graph_violations(const HeteroGraph& graph, std::span<const InteractionRecord> records);

// Independent oracles.

struct GradCheck {
  /// max over tensors of |g - fd|_2 / max(|g|_2, |fd|_2, 1e-7)
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t entries_checked = 0;
};

/// Central differences against the tape gradient. `per_tensor` caps the
/// entries probed in each tensor (0 means all of them).
GradCheck finite_difference_check(const ParameterSet& params,
                                  const std::function<ad::Var(ad::Tape&, const BoundParameters&)>& loss,
                                  double step, std::size_t per_tensor = 0, std::uint64_t seed = 0);

/// All unequal-rating pairs, counted one by one.
double brute_force_auc(const std::vector<ScoredGroup>& groups);

/// Ranks with tie averaging by explicit counting, then Pearson on the ranks.
double rank_then_pearson(const std::map<std::string, double>& a, const std::map<std::string, double>& b);

}  // namespace graphroute::testing
