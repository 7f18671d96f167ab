// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "graphroute/checkpoint.hpp"
#include "graphroute/hetero_graph.hpp"
#include "graphroute/text_encoder.hpp"

namespace graphroute {

struct ScoredCandidate {
  LlmId llm;
  double score = 0.0;
};

/// Eval-mode encoder pass. Throws UsageError when the graph schema differs
/// from the one the model was built for.
NodeStates embed(const Model& model, const HeteroGraph& graph);

/// Scores (user row, query row, llm row) triples in eval mode.
std::vector<double> score_batch(const Model& model, const NodeStates& states, const Matrix& query_embeddings,
                                const ScoreBatch& batch);

/// Descending by score; equal scores in ascending LLM id order.
void sort_candidates(std::vector<ScoredCandidate>& candidates);

/// Inference over a fixed visible subgraph. States are computed once; the
/// object is immutable afterwards, so concurrent calls are safe.
class Router {
 public:
  Router(const Model& model, VisibleSubgraph visible, const TextEncoder& encoder);

  const VisibleSubgraph& visible() const { return visible_; }
  const Model& model() const { return model_; }

  /// Empty `candidates` means every LLM in the catalog. Throws UsageError for
  /// unknown users or LLMs.
  std::vector<ScoredCandidate> rank(const UserId& user, std::string_view query,
                                    std::span<const LlmId> candidates) const;

  /// Cold start: scores against the visible subgraph extended with the user's
  /// few-shot history. No parameter changes.
  std::vector<ScoredCandidate> rank_with_history(const UserId& user, std::string_view query,
                                                 std::span<const LlmId> candidates,
                                                 std::span<const InteractionRecord> history,
                                                 const RatingTable& history_ratings,
                                                 std::span<const LlmInfo> llms) const;

 private:
  std::vector<ScoredCandidate> rank_on(const HeteroGraph& graph, const NodeStates& states, const UserId& user,
                                       std::string_view query, std::span<const LlmId> candidates) const;

  const Model& model_;
  VisibleSubgraph visible_;
  const TextEncoder& encoder_;
  NodeStates states_;
};

std::vector<ScoredCandidate> rank_candidates(const UserId& user, std::string_view query,
                                             std::span<const LlmId> candidates, const Model& model,
                                             const VisibleSubgraph& visible, const TextEncoder& encoder);

/// First element of rank_candidates.
LlmId route(const UserId& user, std::string_view query, std::span<const LlmId> candidates, const Model& model,
            const VisibleSubgraph& visible, const TextEncoder& encoder);

}  // namespace graphroute
