// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "graphroute/consistency.hpp"
#include "graphroute/error.hpp"
#include "graphroute/metrics.hpp"

namespace graphroute {
namespace {

ScoredGroup group(std::vector<double> scores, std::vector<double> ratings, const std::string& user = "u") {
  ScoredGroup g;
  g.user = user;
  for (std::size_t i = 0; i < scores.size(); ++i) g.llms.push_back(LlmId{"m" + std::to_string(i)});
  g.scores = std::move(scores);
  g.ratings = std::move(ratings);
  return g;
}

TEST(Accuracy, Counts) {
  const std::vector<ScoredGroup> all{group({0.9, 0.1}, {1, 0}), group({0.2, 0.8}, {0, 1})};
  EXPECT_EQ(accuracy(all).accuracy, 1.0);
  const std::vector<ScoredGroup> four{group({0.9, 0.1}, {1, 0}), group({0.2, 0.8}, {0, 1}),
                                      group({0.9, 0.1, 0.5}, {0, 0.5, 1}), group({0.3, 0.1}, {1, 0})};
  EXPECT_EQ(accuracy(four).accuracy, 0.75);
  // Tied truth is excluded and reported.
  const std::vector<ScoredGroup> tied{group({0.9, 0.1}, {1, 1}), group({0.9, 0.1}, {1, 0})};
  const auto r = accuracy(tied);
  EXPECT_EQ(r.evaluated, 1u);
  EXPECT_EQ(r.tied_excluded, 1u);
  EXPECT_THROW(accuracy(std::vector<ScoredGroup>{group({1, 2}, {1, 1})}), UsageError);
}

TEST(Accuracy, RandomPredictionsNearHalf) {
  Rng rng(5);
  std::vector<ScoredGroup> groups;
  for (int i = 0; i < 20000; ++i) groups.push_back(group({rng.uniform(), rng.uniform()}, {1, 0}));
  EXPECT_NEAR(accuracy(groups).accuracy, 0.5, 0.02);
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(std::vector<ScoredGroup>{group({0.9, 0.2, 0.5}, {1, 0, 0})}).auc, 1.0);
  EXPECT_EQ(auc(std::vector<ScoredGroup>{group({0.3, 0.3, 0.3}, {1, 0, 0.5})}).auc, 0.5);
  EXPECT_EQ(auc(std::vector<ScoredGroup>{group({0.1, 0.2, 0.3}, {1, 0.5, 0})}).auc, 0.0);
  EXPECT_THROW(auc(std::vector<ScoredGroup>{group({0.1, 0.2}, {1, 1})}), UsageError);
}

TEST(Auc, MatchesBruteForce) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ScoredGroup> groups;
    for (int g = 0; g < 10; ++g) {
      const auto n = 2 + rng.below(15);
      std::vector<double> s(n), r(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = std::round(rng.uniform() * 8) / 8;  // score ties happen
        r[i] = static_cast<double>(rng.below(4)) / 3;
      }
      r[0] = 1.0;
      r[1] = 0.0;
      groups.push_back(group(s, r));
    }
    EXPECT_NEAR(auc(groups).auc, testing::brute_force_auc(groups), 1e-9);
  }
}

TEST(Report, PerUserAndJson) {
  const std::vector<ScoredGroup> groups{group({0.9, 0.1}, {1, 0}, "a"), group({0.1, 0.9}, {1, 0}, "b")};
  const auto r = make_report(groups);
  EXPECT_EQ(r.groups, 2u);
  EXPECT_EQ(*r.per_user.at("a").accuracy, 1.0);
  EXPECT_EQ(*r.per_user.at("b").accuracy, 0.0);
  EXPECT_NE(r.to_json().find("pooled-pairs"), std::string::npos);
  EXPECT_NE(r.to_text().find("ALL"), std::string::npos);
}

InteractionRecord pair_record(const std::string& id, const std::string& user, const std::string& llm,
                              const std::string& group_id, int position) {
  auto r = testing::scored_record(id, user, llm, "query " + group_id, {1.0});
  r.turns[0].feedback = RankingFeedback{position, 2, group_id};
  return r;
}

// A beats B `wins` times out of `total`.
std::vector<InteractionRecord> duel(const std::string& user, const std::string& a, const std::string& b, int wins,
                                    int total, const std::string& tag) {
  std::vector<InteractionRecord> out;
  for (int i = 0; i < total; ++i) {
    const auto g = user + "/" + tag + std::to_string(i);
    out.push_back(pair_record(g + "/" + a, user, a, g, i < wins ? 1 : 2));
    out.push_back(pair_record(g + "/" + b, user, b, g, i < wins ? 2 : 1));
  }
  return out;
}

TEST(WinRates, Examples) {
  const auto recs = duel("u", "A", "B", 3, 4, "x");
  const auto w = win_rates(recs);
  EXPECT_EQ(w.at(LlmId{"A"}), 0.75);
  EXPECT_EQ(w.at(LlmId{"B"}), 0.25);
  EXPECT_TRUE(win_rates({}).empty());
  std::vector<InteractionRecord> ties{pair_record("1", "u", "A", "g", 1), pair_record("2", "u", "B", "g", 1)};
  const auto t = win_rates(ties);
  EXPECT_EQ(t.at(LlmId{"A"}), 0.5);
  EXPECT_EQ(t.at(LlmId{"B"}), 0.5);
}

TEST(Spearman, Examples) {
  const WinRates a{{LlmId{"a"}, 0.1}, {LlmId{"b"}, 0.5}, {LlmId{"c"}, 0.7}, {LlmId{"d"}, 0.2}, {LlmId{"e"}, 0.9}};
  WinRates rev;
  for (const auto& [k, v] : a) rev[k] = -v;
  EXPECT_DOUBLE_EQ(spearman(a, a), 1.0);
  EXPECT_DOUBLE_EQ(spearman(a, rev), -1.0);
  const WinRates b{{LlmId{"a"}, 0.3}, {LlmId{"b"}, 0.3}, {LlmId{"c"}, 0.1}, {LlmId{"d"}, 0.8}, {LlmId{"e"}, 0.6}};
  std::map<std::string, double> ma, mb;
  for (const auto& [k, v] : a) ma[k.value] = v;
  for (const auto& [k, v] : b) mb[k.value] = v;
  EXPECT_NEAR(spearman(a, b), testing::rank_then_pearson(ma, mb), 1e-12);
  EXPECT_DOUBLE_EQ(spearman(a, b), spearman(b, a));
  const WinRates two{{LlmId{"a"}, 0.1}, {LlmId{"b"}, 0.5}};
  EXPECT_THROW(spearman(two, two), UsageError);
}

TEST(Spearman, RandomAgainstRankPearson) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = 3 + rng.below(10);
    WinRates a, b;
    std::map<std::string, double> ma, mb;
    for (std::size_t i = 0; i < n; ++i) {
      const auto key = "k" + std::to_string(i);
      const double x = static_cast<double>(rng.below(6)) / 5, y = rng.uniform();
      a[LlmId{key}] = ma[key] = x;
      b[LlmId{key}] = mb[key] = y;
    }
    if (std::all_of(ma.begin(), ma.end(), [&](auto& kv) { return kv.second == ma.begin()->second; })) continue;
    EXPECT_NEAR(spearman(a, b), testing::rank_then_pearson(ma, mb), 1e-12);
  }
}

TEST(SelfSpearman, DuplicatedHalves) {
  std::vector<InteractionRecord> half;
  for (auto& r : duel("u", "A", "B", 3, 4, "x")) half.push_back(r);
  for (auto& r : duel("u", "A", "C", 1, 4, "y")) half.push_back(r);
  for (auto& r : duel("u", "B", "C", 2, 4, "z")) half.push_back(r);
  EXPECT_DOUBLE_EQ(self_spearman(half, half), 1.0);
}

TEST(KMeans, SeparatesClusters) {
  Matrix pts(6, 2);
  pts << 0, 0, 0.1, 0, 0, 0.1, 10, 10, 10.1, 10, 10, 10.1;
  const auto a = kmeans(pts, 2, 3);
  EXPECT_EQ(a[0], a[1]);
  EXPECT_EQ(a[1], a[2]);
  EXPECT_EQ(a[3], a[4]);
  EXPECT_NE(a[0], a[3]);
  EXPECT_EQ(kmeans(pts, 2, 3), a);
  EXPECT_THROW(kmeans(pts, 7, 0), UsageError);
}

TEST(ConsistencyReportTest, IdenticalUsersAgree) {
  std::vector<InteractionRecord> recs;
  for (const char* user : {"u1", "u2", "u3"}) {
    for (auto& r : duel(user, "A", "B", 20, 30, "x")) recs.push_back(r);
    for (auto& r : duel(user, "A", "C", 10, 30, "y")) recs.push_back(r);
    for (auto& r : duel(user, "B", "C", 25, 30, "z")) recs.push_back(r);
  }
  const InteractionStore store(recs, testing::catalog({"A", "B", "C"}));
  const auto enc = testing::test_encoder(16);
  ConsistencyOptions o;
  o.clusters = 2;
  o.min_records_per_half = 10;
  const auto r = consistency_report(store, *enc, o);
  EXPECT_EQ(r.users_analyzed, 3u);
  EXPECT_DOUBLE_EQ(r.global_spearman, 1.0);
  for (double v : {r.self_spearman, r.global_spearman, r.intra_cluster_spearman}) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_NE(r.heatmap_csv().find("user,A,B,C"), std::string::npos);
  EXPECT_NE(r.to_json().find("ratio_to_self"), std::string::npos);
  o.clusters = 4;
  EXPECT_THROW(consistency_report(store, *enc, o), UsageError);
}

}  // namespace
}  // namespace graphroute
