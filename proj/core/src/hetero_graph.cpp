// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/hetero_graph.hpp"

#include <algorithm>

#include "graphroute/digest.hpp"
#include "graphroute/error.hpp"
#include "graphroute/text_encoder.hpp"
#include "json.hpp"

namespace graphroute {

std::string_view node_type_name(NodeType type) {
  switch (type) {
    case NodeType::kUser:
      return "user";
    case NodeType::kLlm:
      return "llm";
    case NodeType::kQuery:
      return "query";
    case NodeType::kResponse:
      return "response";
    case NodeType::kTurn:
      return "turn";
  }
  return "?";
}

const std::array<RelationInfo, kRelationCount>& relation_schema() {
  using N = NodeType;
  using R = Relation;
  static const std::array<RelationInfo, kRelationCount> schema{{
      {R::kUserToTurn, N::kUser, N::kTurn, "user_to_turn", R::kTurnToUser},
      {R::kLlmToTurn, N::kLlm, N::kTurn, "llm_to_turn", R::kTurnToLlm},
      {R::kQueryToTurn, N::kQuery, N::kTurn, "query_to_turn", R::kTurnToQuery},
      {R::kResponseToTurn, N::kResponse, N::kTurn, "response_to_turn", R::kTurnToResponse},
      {R::kTurnNext, N::kTurn, N::kTurn, "turn_next", R::kTurnPrev},
      {R::kTurnToUser, N::kTurn, N::kUser, "turn_to_user", R::kUserToTurn},
      {R::kTurnToLlm, N::kTurn, N::kLlm, "turn_to_llm", R::kLlmToTurn},
      {R::kTurnToQuery, N::kTurn, N::kQuery, "turn_to_query", R::kQueryToTurn},
      {R::kTurnToResponse, N::kTurn, N::kResponse, "turn_to_response", R::kResponseToTurn},
      {R::kTurnPrev, N::kTurn, N::kTurn, "turn_prev", R::kTurnNext},
  }};
  return schema;
}

const RelationInfo& relation_info(Relation relation) { return relation_schema()[static_cast<int>(relation)]; }

std::size_t HeteroGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& e : edges) n += e.size();
  return n;
}

int HeteroGraph::user_node(const UserId& user) const {
  auto it = std::lower_bound(users.begin(), users.end(), user);
  return (it != users.end() && *it == user) ? static_cast<int>(it - users.begin()) : -1;
}

int HeteroGraph::llm_node(const LlmId& llm) const {
  auto it = std::lower_bound(llms.begin(), llms.end(), llm);
  return (it != llms.end() && *it == llm) ? static_cast<int>(it - llms.begin()) : -1;
}

std::string HeteroGraph::dump_json() const {
  nlohmann::json out;
  for (auto type : kNodeTypes) {
    const auto& f = feature(type);
    out["nodes"][std::string(node_type_name(type))] = {
        {"count", count(type)},
        {"feature_width", f.cols()},
        {"feature_digest", to_hex(Digest{}.update(std::span<const double>(f.data(), static_cast<std::size_t>(f.size()))).value())},
    };
  }
  for (const auto& info : relation_schema()) {
    const auto& e = edge_list(info.relation);
    nlohmann::json pairs = nlohmann::json::array();
    for (std::size_t i = 0; i < e.size(); ++i) pairs.push_back({e.source[i], e.target[i]});
    out["edges"][std::string(info.name)] = pairs;
  }
  return out.dump(2);
}

std::array<int, kNodeTypeCount> feature_widths(int embedding_width, const GraphConfig& config) {
  return {embedding_width, embedding_width, embedding_width, embedding_width + config.preference_width,
          embedding_width};
}

HeteroGraph build_graph(std::span<const InteractionRecord> records, std::span<const LlmInfo> llms,
                        const TextEncoder& encoder, const RatingTable& ratings, const GraphConfig& config,
                        std::span<const UserId> extra_users) {
  if (records.empty() && extra_users.empty()) throw UsageError("build_graph: empty record set");
  if (config.preference_width < 1) throw UsageError("build_graph: preference_width must be >= 1");

  HeteroGraph g;
  std::vector<const InteractionRecord*> order;
  order.reserve(records.size());
  for (const auto& r : records) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->record_id < b->record_id; });

  std::set<UserId> users(extra_users.begin(), extra_users.end());
  for (const auto* r : order) users.insert(r->user);
  g.users.assign(users.begin(), users.end());
  for (const auto& l : llms) g.llms.push_back(l.id);
  std::sort(g.llms.begin(), g.llms.end());
  g.llms.erase(std::unique(g.llms.begin(), g.llms.end()), g.llms.end());

  std::vector<std::string> queries;
  std::vector<std::string> responses;
  std::vector<double> turn_ratings;
  for (const auto* r : order) {
    if (g.llm_node(r->llm) < 0) {
      throw DataError("record '" + r->record_id + "': llm '" + r->llm.value + "' is not in the catalog");
    }
    auto it = ratings.find(r->record_id);
    for (std::size_t t = 0; t < r->turns.size(); ++t) {
      if (it == ratings.end() || it->second.size() <= t) {
        throw DataError("missing rating for record '" + r->record_id + "' turn " + std::to_string(t));
      }
      g.turns.push_back(TurnRef{r->record_id, static_cast<int>(t)});
      queries.push_back(r->turns[t].query);
      responses.push_back(r->turns[t].response);
      turn_ratings.push_back(it->second[t].value);
    }
  }

  const int n_turns = static_cast<int>(g.turns.size());
  const int e = encoder.width();
  const auto widths = feature_widths(e, config);
  g.node_counts = {static_cast<int>(g.users.size()), static_cast<int>(g.llms.size()), n_turns, n_turns, n_turns};
  for (auto type : kNodeTypes) {
    const int ti = static_cast<int>(type);
    g.features[ti] = Matrix::Zero(g.node_counts[ti], widths[ti]);
  }

  std::vector<LlmInfo> sorted_llms(llms.begin(), llms.end());
  std::sort(sorted_llms.begin(), sorted_llms.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  sorted_llms.erase(std::unique(sorted_llms.begin(), sorted_llms.end(),
                                [](const auto& a, const auto& b) { return a.id == b.id; }),
                    sorted_llms.end());
  auto& llm_f = g.features[static_cast<int>(NodeType::kLlm)];
  for (std::size_t i = 0; i < sorted_llms.size(); ++i) {
    const auto emb = encoder.encode_llm(sorted_llms[i]);
    llm_f.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const RowVector>(emb.data(), e);
  }

  const auto q_emb = encoder.encode_batch(queries);
  const auto r_emb = encoder.encode_batch(responses);
  auto& q_f = g.features[static_cast<int>(NodeType::kQuery)];
  auto& r_f = g.features[static_cast<int>(NodeType::kResponse)];
  for (int i = 0; i < n_turns; ++i) {
    q_f.row(i) = Eigen::Map<const RowVector>(q_emb[static_cast<std::size_t>(i)].data(), e);
    r_f.row(i).head(e) = Eigen::Map<const RowVector>(r_emb[static_cast<std::size_t>(i)].data(), e);
    if (!config.zero_preference_feature) {
      const auto pref = preference_feature(Rating{turn_ratings[static_cast<std::size_t>(i)]}, config.preference_width);
      r_f.row(i).tail(config.preference_width) = Eigen::Map<const RowVector>(pref.data(), config.preference_width);
    }
  }

  auto add_edge = [&g](Relation rel, int src, int dst) {
    auto& fwd = g.edges[static_cast<int>(rel)];
    fwd.source.push_back(src);
    fwd.target.push_back(dst);
    auto& rev = g.edges[static_cast<int>(relation_info(rel).reverse)];
    rev.source.push_back(dst);
    rev.target.push_back(src);
  };
  int turn = 0;
  for (const auto* r : order) {
    const int u = g.user_node(r->user);
    const int m = g.llm_node(r->llm);
    for (std::size_t t = 0; t < r->turns.size(); ++t, ++turn) {
      add_edge(Relation::kUserToTurn, u, turn);
      add_edge(Relation::kLlmToTurn, m, turn);
      add_edge(Relation::kQueryToTurn, turn, turn);
      add_edge(Relation::kResponseToTurn, turn, turn);
      if (t > 0) add_edge(Relation::kTurnNext, turn - 1, turn);
    }
  }
  return g;
}

std::set<std::string> sample_visible_records(const InteractionStore& store, const std::set<std::string>& candidate_ids,
                                             int k, std::uint64_t seed) {
  if (k < 1) throw UsageError("sample_visible: k must be >= 1");
  std::set<std::string> included;
  for (const auto& [user, indices] : store.records_by_user()) {
    std::vector<const std::string*> pool;
    for (auto i : indices) {
      const auto& id = store.records()[i].record_id;
      if (candidate_ids.contains(id)) pool.push_back(&id);
    }
    std::sort(pool.begin(), pool.end(), [](auto* a, auto* b) { return *a < *b; });
    Rng rng(mix_seed(seed, digest_of(user.value)));
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), pool.size());
    // Partial Fisher-Yates: the first `take` slots are the sample.
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      included.insert(*pool[i]);
    }
  }
  return included;
}

VisibleSubgraph sample_visible(const InteractionStore& store, const std::set<std::string>& candidate_ids, int k,
                               std::uint64_t seed, const TextEncoder& encoder, const RatingTable& ratings,
                               const GraphConfig& config) {
  VisibleSubgraph out;
  out.k = k;
  out.included_records = sample_visible_records(store, candidate_ids, k, seed);
  for (const auto& id : out.included_records) {
    out.records.push_back(store.record(id));
    auto it = ratings.find(id);
    if (it == ratings.end()) throw DataError("missing rating for record '" + id + "' turn 0");
    out.ratings.emplace(id, it->second);
  }
  out.graph = build_graph(out.records, store.llms(), encoder, out.ratings, config);
  return out;
}

VisibleSubgraph extend_for_user(const VisibleSubgraph& base, const UserId& user,
                                std::span<const InteractionRecord> new_records, const RatingTable& new_ratings,
                                std::span<const LlmInfo> llms, const TextEncoder& encoder, const GraphConfig& config) {
  VisibleSubgraph out;
  out.k = base.k;
  out.records = base.records;
  out.ratings = base.ratings;
  out.included_records = base.included_records;
  for (const auto& rec : new_records) {
    if (rec.user != user) {
      throw DataError("extend_for_user: record '" + rec.record_id + "' belongs to '" + rec.user.value + "', not '" +
                      user.value + "'");
    }
    auto it = new_ratings.find(rec.record_id);
    if (it == new_ratings.end()) throw DataError("missing rating for record '" + rec.record_id + "' turn 0");
    InteractionRecord copy = rec;
    copy.record_id = "history/" + user.value + "/" + rec.record_id;
    if (!out.included_records.insert(copy.record_id).second) {
      throw DataError("extend_for_user: duplicate history record '" + rec.record_id + "'");
    }
    out.ratings.emplace(copy.record_id, it->second);
    out.records.push_back(std::move(copy));
  }
  const UserId extra[] = {user};
  out.graph = build_graph(out.records, llms, encoder, out.ratings, config, extra);
  return out;
}

}  // namespace graphroute
