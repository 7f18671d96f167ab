// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "graphroute/error.hpp"
#include "graphroute/interaction_store.hpp"

namespace graphroute {
namespace {

using testing::scored_record;

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name, const std::string& body) {
  const auto path = dir / name;
  std::ofstream(path) << body;
  return path;
}

TEST(Ingest, OneRecordTwoTurns) {
  const auto dir = testing::scratch_dir("ingest_one");
  const auto path = write_file(dir, "h.jsonl",
                               R"({"record_id":"r1","user":"alice","llm":"m1","turns":[)"
                               R"({"query":"hi","response":"hello","feedback":{"kind":"score","value":7}},)"
                               R"({"query":"more","response":"sure","feedback":{"kind":"score","value":3}}]})"
                               "\n");
  const auto store = ingest(path);
  EXPECT_EQ(store.size(), 1u);
  EXPECT_EQ(store.users().size(), 1u);
  EXPECT_EQ(store.llms().size(), 1u);
  EXPECT_EQ(store.records()[0].turns.size(), 2u);
}

TEST(Ingest, RankingPositionBeyondGroupNamesTheField) {
  const auto dir = testing::scratch_dir("ingest_rank");
  const auto path = write_file(dir, "h.jsonl",
                               R"({"record_id":"r1","user":"a","llm":"m1","turns":[{"query":"q","response":"r",)"
                               R"("feedback":{"kind":"ranking","position":3,"group_size":2,"group_id":"g"}}]})"
                               "\n");
  try {
    (void)ingest(path);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("position"), std::string::npos) << e.what();
  }
}

TEST(Ingest, MalformedLineReportsLineNumber) {
  const auto dir = testing::scratch_dir("ingest_bad");
  const auto good = record_to_json(scored_record("r1", "a", "m", "q", {1.0}));
  const auto path = write_file(dir, "h.jsonl", good + "\n{not json\n");
  try {
    (void)ingest(path);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
}

TEST(Ingest, DuplicateRecordIdRejected) {
  std::vector<InteractionRecord> recs{scored_record("r1", "a", "m", "q", {1.0}),
                                      scored_record("r1", "b", "m", "q2", {1.0})};
  EXPECT_THROW(InteractionStore(recs, {}), DataError);
}

TEST(Ingest, EmptyTurnTextRejected) {
  auto rec = scored_record("r1", "a", "m", "q", {1.0});
  rec.turns[0].response.clear();
  EXPECT_THROW(validate_record(rec), DataError);
}

TEST(Ingest, ArenaScaleCatalogs) {
  std::vector<InteractionRecord> recs;
  std::vector<LlmInfo> llms;
  for (int m = 0; m < 16; ++m) llms.push_back({LlmId{"llm" + std::to_string(m)}, "", 0.0});
  for (int u = 0; u < 11; ++u) {
    for (int m = 0; m < 16; ++m) {
      const auto id = std::to_string(u) + "/" + std::to_string(m);
      recs.push_back(scored_record(id, "user" + std::to_string(u), "llm" + std::to_string(m), "q" + id, {1.0}));
    }
  }
  const InteractionStore store(recs, llms);
  EXPECT_EQ(store.users().size(), 11u);
  EXPECT_EQ(store.llms().size(), 16u);
}

TEST(Ingest, RoundTripThroughJsonLines) {
  const auto dir = testing::scratch_dir("ingest_roundtrip");
  auto rec = scored_record("r1", "a", "m", "q", {1.0, 2.0});
  rec.turns[1].feedback = GroundTruth{"the answer"};
  write_records(dir / "h.jsonl", {rec});
  const auto back = ingest(dir / "h.jsonl");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(std::get<GroundTruth>(back.records()[0].turns[1].feedback).text, "the answer");
  EXPECT_EQ(std::get<ScalarScore>(back.records()[0].turns[0].feedback).value, 1.0);
}

InteractionStore one_user_store(int n) {
  std::vector<InteractionRecord> recs;
  for (int i = 0; i < n; ++i) {
    recs.push_back(scored_record("r" + std::to_string(i), "solo", "m", "query " + std::to_string(i), {1.0}));
  }
  return InteractionStore(recs, {});
}

TEST(Split, SevenOneTwo) {
  const auto s = split(one_user_store(100), {}, 0.0, 7);
  EXPECT_EQ(s.train.size(), 70u);
  EXPECT_EQ(s.valid.size(), 10u);
  EXPECT_EQ(s.test.size(), 20u);
  EXPECT_TRUE(s.new_users.empty());
}

TEST(Split, ThirtyPercentNewUsersAreTestOnly) {
  std::vector<InteractionRecord> recs;
  for (int u = 0; u < 10; ++u) {
    for (int i = 0; i < 10; ++i) {
      const auto id = std::to_string(u) + "/" + std::to_string(i);
      recs.push_back(scored_record(id, "user" + std::to_string(u), "m", "q" + id, {1.0}));
    }
  }
  const InteractionStore store(recs, {});
  const auto s = split(store, {}, 0.3, 11);
  ASSERT_EQ(s.new_users.size(), 3u);
  for (const auto& r : store.records()) {
    if (s.new_users.contains(r.user)) EXPECT_TRUE(s.test.contains(r.record_id)) << r.record_id;
  }
}

TEST(Split, PartitionAndDeterminism) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto store = testing::random_store(seed);
    const auto a = split(store, {}, 0.3, seed);
    const auto b = split(store, {}, 0.3, seed);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    EXPECT_EQ(a.train.size() + a.valid.size() + a.test.size(), store.size());
    for (const auto& r : store.records()) {
      const int hits = a.train.contains(r.record_id) + a.valid.contains(r.record_id) + a.test.contains(r.record_id);
      EXPECT_EQ(hits, 1);
    }
  }
}

TEST(Split, RankingGroupsStayTogether) {
  const auto store = testing::random_store(3);
  const auto s = split(store, {}, 0.0, 3);
  std::map<std::string, std::set<int>> parts;
  for (const auto& r : store.records()) {
    parts[r.group_key()].insert(s.train.contains(r.record_id) ? 0 : s.valid.contains(r.record_id) ? 1 : 2);
  }
  for (const auto& [key, p] : parts) EXPECT_EQ(p.size(), 1u) << key;
}

TEST(Split, JsonRoundTrip) {
  const auto s = split(testing::random_store(5), {}, 0.3, 5);
  const auto back = split_from_json(split_to_json(s));
  EXPECT_EQ(back.train, s.train);
  EXPECT_EQ(back.valid, s.valid);
  EXPECT_EQ(back.test, s.test);
  EXPECT_EQ(back.new_users, s.new_users);
}

TEST(Split, Apportion) {
  EXPECT_EQ(apportion(100, {}), (std::array<std::size_t, 3>{70, 10, 20}));
  const auto a = apportion(7, {});
  EXPECT_EQ(a[0] + a[1] + a[2], 7u);
}

}  // namespace
}  // namespace graphroute
