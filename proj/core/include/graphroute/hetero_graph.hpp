// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graphroute/feedback_norm.hpp"
#include "graphroute/interaction_store.hpp"
#include "graphroute/tensor.hpp"

namespace graphroute {

class TextEncoder;

enum class NodeType : int { kUser = 0, kLlm, kQuery, kResponse, kTurn };
inline constexpr int kNodeTypeCount = 5;
inline constexpr std::array<NodeType, kNodeTypeCount> kNodeTypes{NodeType::kUser, NodeType::kLlm, NodeType::kQuery,
                                                                 NodeType::kResponse, NodeType::kTurn};
std::string_view node_type_name(NodeType type);

enum class Relation : int {
  kUserToTurn = 0,
  kLlmToTurn,
  kQueryToTurn,
  kResponseToTurn,
  kTurnNext,
  kTurnToUser,
  kTurnToLlm,
  kTurnToQuery,
  kTurnToResponse,
  kTurnPrev,
};
inline constexpr int kRelationCount = 10;

struct RelationInfo {
  Relation relation;
  NodeType source;
  NodeType target;
  std::string_view name;
  Relation reverse;
};

/// The fixed typed schema: five forward relations and their mirrors.
const std::array<RelationInfo, kRelationCount>& relation_schema();
const RelationInfo& relation_info(Relation relation);

struct NodeRef {
  NodeType type;
  int index;
  auto operator<=>(const NodeRef&) const = default;
};

struct EdgeList {
  std::vector<int> source;
  std::vector<int> target;
  std::size_t size() const { return source.size(); }
};

struct TurnRef {
  std::string record_id;
  int turn = 0;
};

struct GraphConfig {
  /// Width of the preference feature appended to response features.
  int preference_width = 16;
  /// Ablation: replace every preference feature with zeros.
  bool zero_preference_feature = false;
};

/// Typed interaction graph. Node indices are dense per type; turn, query and
/// response nodes share an index (one of each per dialogue turn) ordered
/// lexicographically by (record_id, turn). Graphs are values: build once,
/// share as const.
struct HeteroGraph {
  std::array<int, kNodeTypeCount> node_counts{};
  std::array<Matrix, kNodeTypeCount> features;
  std::array<EdgeList, kRelationCount> edges;

  std::vector<UserId> users;
  std::vector<LlmId> llms;
  std::vector<TurnRef> turns;

  int count(NodeType type) const { return node_counts[static_cast<int>(type)]; }
  const Matrix& feature(NodeType type) const { return features[static_cast<int>(type)]; }
  const EdgeList& edge_list(Relation rel) const { return edges[static_cast<int>(rel)]; }
  int feature_width(NodeType type) const { return static_cast<int>(feature(type).cols()); }
  std::size_t edge_count() const;

  /// Node index or -1.
  int user_node(const UserId& user) const;
  int llm_node(const LlmId& llm) const;

  /// Per-type counts, edge lists and feature digests.
  std::string dump_json() const;
};

/// Raw feature widths per node type for a given encoder width.
std::array<int, kNodeTypeCount> feature_widths(int embedding_width, const GraphConfig& config);

/// Builds the graph over `records`. Every catalog LLM gets a node; users come
/// from the records plus `extra_users` (isolated when they have no records).
HeteroGraph build_graph(std::span<const InteractionRecord> records, std::span<const LlmInfo> llms,
                        const TextEncoder& encoder, const RatingTable& ratings, const GraphConfig& config,
                        std::span<const UserId> extra_users = {});

/// k-per-user sample of the visible interaction records plus its graph.
struct VisibleSubgraph {
  HeteroGraph graph;
  std::vector<InteractionRecord> records;
  RatingTable ratings;
  std::set<std::string> included_records;
  int k = 0;
};

/// Seeded uniform sample without replacement of min(k, n_u) records per user
/// among `candidate_ids`.
std::set<std::string> sample_visible_records(const InteractionStore& store, const std::set<std::string>& candidate_ids,
                                             int k, std::uint64_t seed);

VisibleSubgraph sample_visible(const InteractionStore& store, const std::set<std::string>& candidate_ids, int k,
                               std::uint64_t seed, const TextEncoder& encoder, const RatingTable& ratings,
                               const GraphConfig& config);

/// Adds one user's few-shot records to a visible subgraph (cold start). Record
/// ids are namespaced as "history/<user>/<id>" so they cannot collide with
/// stored records; `new_ratings` is keyed by the original ids.
VisibleSubgraph extend_for_user(const VisibleSubgraph& base, const UserId& user,
                                std::span<const InteractionRecord> new_records, const RatingTable& new_ratings,
                                std::span<const LlmInfo> llms,
                                const TextEncoder& encoder, const GraphConfig& config);

}  // namespace graphroute
