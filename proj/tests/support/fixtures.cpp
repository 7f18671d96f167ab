// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "graphroute/digest.hpp"
#include "graphroute/hgt.hpp"

namespace graphroute::testing {

InteractionRecord scored_record(const std::string& id, const std::string& user, const std::string& llm,
                                const std::string& query, std::vector<double> scores) {
  InteractionRecord r;
  r.record_id = id;
  r.user = UserId{user};
  r.llm = LlmId{llm};
  for (std::size_t t = 0; t < scores.size(); ++t) {
    Turn turn;
    turn.query = t == 0 ? query : query + " / turn " + std::to_string(t);
    turn.response = llm + " answers " + turn.query;
    turn.feedback = ScalarScore{scores[t]};
    r.turns.push_back(std::move(turn));
  }
  return r;
}

std::vector<LlmInfo> catalog(std::initializer_list<const char*> ids) {
  std::vector<LlmInfo> out;
  for (const char* id : ids) out.push_back({LlmId{id}, std::string("model ") + id, 1e-5});
  return out;
}

std::unique_ptr<TextEncoder> test_encoder(int width, std::uint64_t seed) {
  EncoderSpec spec;
  spec.width = width;
  spec.seed = seed;
  return std::make_unique<TextEncoder>(spec);
}

InteractionStore random_store(std::uint64_t seed) {
  Rng rng(seed);
  const int n_users = 1 + static_cast<int>(rng.below(6));
  const int n_llms = 2 + static_cast<int>(rng.below(3));
  std::vector<LlmInfo> llms;
  for (int m = 0; m < n_llms; ++m) llms.push_back({LlmId{"m" + std::to_string(m)}, "", 1e-5});
  std::vector<InteractionRecord> records;
  for (int u = 0; u < n_users; ++u) {
    const std::string user = "u" + std::to_string(u);
    const int n_queries = 1 + static_cast<int>(rng.below(8));
    for (int q = 0; q < n_queries; ++q) {
      std::vector<int> members(static_cast<std::size_t>(n_llms));
      std::iota(members.begin(), members.end(), 0);
      rng.shuffle(members.begin(), members.end());
      members.resize(1 + rng.below(static_cast<std::size_t>(n_llms)));
      const bool ranked = members.size() >= 2 && rng.uniform() < 0.5;
      std::vector<int> positions(members.size());
      std::iota(positions.begin(), positions.end(), 1);
      rng.shuffle(positions.begin(), positions.end());
      const std::string query = user + " asks question " + std::to_string(q);
      for (std::size_t i = 0; i < members.size(); ++i) {
        const std::string llm = "m" + std::to_string(members[i]);
        std::vector<double> scores(1 + rng.below(4));
        for (auto& s : scores) s = std::round(rng.uniform(0.0, 10.0));
        auto rec = scored_record(user + "/" + std::to_string(q) + "/" + llm, user, llm, query, scores);
        if (ranked) {
          rec.turns[0].feedback =
              RankingFeedback{positions[i], static_cast<int>(members.size()), user + "/" + std::to_string(q)};
        }
        records.push_back(std::move(rec));
      }
    }
  }
  return InteractionStore(std::move(records), std::move(llms));
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("graphroute_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<std::string> graph_violations(const HeteroGraph& graph, std::span<const InteractionRecord> records) {
  std::vector<std::string> out;
  std::size_t turns = 0, chain_edges = 0;
  for (const auto& r : records) {
    turns += r.turns.size();
    chain_edges += r.turns.size() - 1;
  }
  const int n = graph.count(NodeType::kTurn);
  if (static_cast<std::size_t>(n) != turns) out.push_back("turn count");
  if (graph.count(NodeType::kQuery) != n || graph.count(NodeType::kResponse) != n) out.push_back("query/response count");

  // Every turn has exactly one incident user, llm, query and response.
  for (auto rel : {Relation::kUserToTurn, Relation::kLlmToTurn, Relation::kQueryToTurn, Relation::kResponseToTurn}) {
    std::vector<int> degree(static_cast<std::size_t>(n), 0);
    for (int t : graph.edge_list(rel).target) ++degree[static_cast<std::size_t>(t)];
    for (int t = 0; t < n; ++t) {
      if (degree[static_cast<std::size_t>(t)] != 1) {
        out.push_back("turn " + std::to_string(t) + " has degree " + std::to_string(degree[static_cast<std::size_t>(t)]) +
                      " under " + std::string(relation_info(rel).name));
      }
    }
  }

  // Chains: consecutive turns of one record, in-/out-degree <= 1, no cycles.
  const auto& next = graph.edge_list(Relation::kTurnNext);
  if (next.size() != chain_edges) out.push_back("chain edge count");
  std::vector<int> succ(static_cast<std::size_t>(n), -1), indeg(static_cast<std::size_t>(n), 0);
  for (std::size_t i = 0; i < next.size(); ++i) {
    const int s = next.source[i], t = next.target[i];
    const auto& a = graph.turns[static_cast<std::size_t>(s)];
    const auto& b = graph.turns[static_cast<std::size_t>(t)];
    if (a.record_id != b.record_id || b.turn != a.turn + 1) out.push_back("chain edge crosses records");
    if (succ[static_cast<std::size_t>(s)] != -1) out.push_back("turn with two successors");
    succ[static_cast<std::size_t>(s)] = t;
    ++indeg[static_cast<std::size_t>(t)];
  }
  for (int t = 0; t < n; ++t) {
    if (indeg[static_cast<std::size_t>(t)] > 1) out.push_back("turn with two predecessors");
    int steps = 0;
    for (int v = t; v != -1 && steps <= n; v = succ[static_cast<std::size_t>(v)]) ++steps;
    if (steps > n) out.push_back("cycle through turn " + std::to_string(t));
  }

  // Each forward edge has exactly one mirrored reverse edge.
  for (const auto& info : relation_schema()) {
    const auto& fwd = graph.edge_list(info.relation);
    const auto& rev = graph.edge_list(info.reverse);
    std::multiset<std::pair<int, int>> a, b;
    for (std::size_t i = 0; i < fwd.size(); ++i) a.emplace(fwd.source[i], fwd.target[i]);
    for (std::size_t i = 0; i < rev.size(); ++i) b.emplace(rev.target[i], rev.source[i]);
    if (a != b) out.push_back("reverse closure of " + std::string(info.name));
    if (relation_info(info.reverse).reverse != info.relation) out.push_back("reverse of reverse");
  }

  for (auto type : {NodeType::kUser, NodeType::kTurn}) {
    if (!graph.feature(type).isZero(0.0)) out.push_back(std::string(node_type_name(type)) + " features not zero");
  }
  return out;
}

GradCheck finite_difference_check(const ParameterSet& params,
                                  const std::function<ad::Var(ad::Tape&, const BoundParameters&)>& loss,
                                  double step, std::size_t per_tensor, std::uint64_t seed) {
  auto value_at = [&](const ParameterSet& p) {
    ad::Tape tape;
    BoundParameters bound(tape, p, false);
    return tape.value(loss(tape, bound))(0, 0);
  };
  const auto analytic = grad(params, loss);
  GradCheck out;
  Rng rng(seed);
  ParameterSet probe = params;
  for (std::size_t t = 0; t < params.entries().size(); ++t) {
    const auto& name = params.entries()[t].name;
    const auto n = static_cast<std::size_t>(params.entries()[t].value.size());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (per_tensor > 0 && per_tensor < n) {
      rng.shuffle(idx.begin(), idx.end());
      idx.resize(per_tensor);
    }
    double diff2 = 0.0, g2 = 0.0, f2 = 0.0;
    for (auto i : idx) {
      double& x = probe.entries()[t].value.data()[i];
      const double saved = x;
      x = saved + step;
      const double up = value_at(probe);
      x = saved - step;
      const double down = value_at(probe);
      x = saved;
      const double fd = (up - down) / (2.0 * step);
      const double g = analytic.at(name).data()[i];
      diff2 += (g - fd) * (g - fd);
      g2 += g * g;
      f2 += fd * fd;
    }
    out.entries_checked += idx.size();
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(g2), std::sqrt(f2), 1e-7});
    if (rel > out.max_relative_error || out.worst_tensor.empty()) {
      out.max_relative_error = std::max(out.max_relative_error, rel);
      if (rel >= out.max_relative_error) out.worst_tensor = name;
    }
  }
  return out;
}

double brute_force_auc(const std::vector<ScoredGroup>& groups) {
  double hits = 0.0;
  long pairs = 0;
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.scores.size(); ++i) {
      for (std::size_t j = 0; j < g.scores.size(); ++j) {
        if (!(g.ratings[i] > g.ratings[j])) continue;
        ++pairs;
        if (g.scores[i] > g.scores[j]) hits += 1.0;
        else if (g.scores[i] == g.scores[j]) hits += 0.5;
      }
    }
  }
  if (pairs == 0) throw std::invalid_argument("no comparable pair");
  return hits / static_cast<double>(pairs);
}

namespace {

// rank(x) = 1 + #{y < x} + (#{y == x} - 1) / 2
std::vector<double> counted_ranks(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v) {
    double below = 0.0, equal = 0.0;
    for (double y : v) {
      below += y < x ? 1.0 : 0.0;
      equal += y == x ? 1.0 : 0.0;
    }
    out.push_back(1.0 + below + (equal - 1.0) / 2.0);
  }
  return out;
}

}  // namespace

double rank_then_pearson(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  std::vector<double> xa, xb;
  for (const auto& [k, v] : a) {
    if (auto it = b.find(k); it != b.end()) {
      xa.push_back(v);
      xb.push_back(it->second);
    }
  }
  const auto ra = counted_ranks(xa);
  const auto rb = counted_ranks(xb);
  const double n = static_cast<double>(ra.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace graphroute::testing
