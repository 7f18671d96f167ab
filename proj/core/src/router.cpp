// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/router.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "graphroute/error.hpp"

namespace graphroute {

NodeStates embed(const Model& model, const HeteroGraph& graph) {
  if (HgtSchema::for_graph(graph).digest() != model.config.schema.digest()) {
    throw UsageError("checkpoint schema does not match the graph schema (feature widths differ)");
  }
  return forward(graph, model.hgt, model.config.hgt, Mode::kEval);
}

std::vector<double> score_batch(const Model& model, const NodeStates& states, const Matrix& query_embeddings,
                                const ScoreBatch& batch) {
  if (batch.size() == 0) return {};
  if (query_embeddings.cols() != model.config.embedding_width) {
    throw UsageError("query embedding width " + std::to_string(query_embeddings.cols()) + " != model width " +
                     std::to_string(model.config.embedding_width));
  }
  ad::Tape tape;
  BoundParameters bound(tape, model.head.tensors, false);
  const auto users = tape.constant(states.of(NodeType::kUser));
  const auto queries = tape.constant(query_embeddings);
  const auto llms = tape.constant(states.of(NodeType::kLlm));
  const auto& out = tape.value(head_scores(tape, bound, users, queries, llms, batch, model.config.head, Mode::kEval));
  std::vector<double> scores(out.data(), out.data() + out.size());
  for (double s : scores) {
    if (!std::isfinite(s)) throw RuntimeError("non-finite score from prediction head");
  }
  return scores;
}

void sort_candidates(std::vector<ScoredCandidate>& candidates) {
  std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.llm < b.llm;
  });
}

Router::Router(const Model& model, VisibleSubgraph visible, const TextEncoder& encoder)
    : model_(model), visible_(std::move(visible)), encoder_(encoder), states_(embed(model_, visible_.graph)) {
  if (encoder.width() != model.config.embedding_width) {
    throw UsageError("encoder width " + std::to_string(encoder.width()) + " != model width " +
                     std::to_string(model.config.embedding_width));
  }
}

std::vector<ScoredCandidate> Router::rank_on(const HeteroGraph& graph, const NodeStates& states, const UserId& user,
                                             std::string_view query, std::span<const LlmId> candidates) const {
  const int u = graph.user_node(user);
  if (u < 0) throw UsageError("unknown user '" + user.value + "': supply few-shot history records");
  std::vector<LlmId> pool(candidates.begin(), candidates.end());
  if (pool.empty()) pool = graph.llms;
  if (pool.empty()) throw UsageError("empty candidate set");
  std::set<LlmId> seen;
  ScoreBatch batch;
  for (const auto& llm : pool) {
    if (!seen.insert(llm).second) throw UsageError("duplicate candidate llm '" + llm.value + "'");
    const int m = graph.llm_node(llm);
    if (m < 0) throw UsageError("unknown llm '" + llm.value + "'");
    batch.user.push_back(u);
    batch.query.push_back(0);
    batch.llm.push_back(m);
  }
  const auto e = encoder_.encode(query);
  const Matrix q = Eigen::Map<const RowVector>(e.data(), static_cast<Eigen::Index>(e.size()));
  const auto scores = score_batch(model_, states, q, batch);
  std::vector<ScoredCandidate> out;
  for (std::size_t i = 0; i < pool.size(); ++i) out.push_back({pool[i], scores[i]});
  sort_candidates(out);
  return out;
}

std::vector<ScoredCandidate> Router::rank(const UserId& user, std::string_view query,
                                          std::span<const LlmId> candidates) const {
  return rank_on(visible_.graph, states_, user, query, candidates);
}

std::vector<ScoredCandidate> Router::rank_with_history(const UserId& user, std::string_view query,
                                                       std::span<const LlmId> candidates,
                                                       std::span<const InteractionRecord> history,
                                                       const RatingTable& history_ratings,
                                                       std::span<const LlmInfo> llms) const {
  const auto extended = extend_for_user(visible_, user, history, history_ratings, llms, encoder_, model_.config.graph);
  const auto states = embed(model_, extended.graph);
  return rank_on(extended.graph, states, user, query, candidates);
}

std::vector<ScoredCandidate> rank_candidates(const UserId& user, std::string_view query,
                                             std::span<const LlmId> candidates, const Model& model,
                                             const VisibleSubgraph& visible, const TextEncoder& encoder) {
  if (candidates.empty()) throw UsageError("empty candidate set");
  return Router(model, visible, encoder).rank(user, query, candidates);
}

LlmId route(const UserId& user, std::string_view query, std::span<const LlmId> candidates, const Model& model,
            const VisibleSubgraph& visible, const TextEncoder& encoder) {
  return rank_candidates(user, query, candidates, model, visible, encoder).front().llm;
}

}  // namespace graphroute
