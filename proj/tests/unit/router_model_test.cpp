// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "fixtures.hpp"
#include "graphroute/checkpoint.hpp"
#include "graphroute/error.hpp"
#include "graphroute/router.hpp"
#include "graphroute/synth_data.hpp"
#include "graphroute/trainer.hpp"

namespace graphroute {
namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

TEST(PredictScore, DeterministicAndValidated) {
  HeadConfig hc;
  hc.hidden = 16;
  const auto head = init_head_params(hc, 8, 12);
  Rng rng(1);
  const auto u = random_vec(8, rng), q = random_vec(12, rng), m = random_vec(8, rng);
  EXPECT_EQ(predict_score(u, q, m, head, hc), predict_score(u, q, m, head, hc));
  auto bad = u;
  bad[0] = std::nan("");
  EXPECT_THROW(predict_score(bad, q, m, head, hc), RuntimeError);
  EXPECT_THROW(predict_score(q, q, m, head, hc), UsageError);
}

TEST(PredictScore, ZeroUserStateIgnoresUser) {
  HeadConfig hc;
  hc.hidden = 16;
  hc.zero_user_state = true;
  const auto head = init_head_params(hc, 8, 12);
  Rng rng(2);
  const auto q = random_vec(12, rng), m = random_vec(8, rng);
  const double a = predict_score(random_vec(8, rng), q, m, head, hc);
  const double b = predict_score(random_vec(8, rng), q, m, head, hc);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, predict_score(random_vec(8, rng), q, random_vec(8, rng), head, hc));
}

TEST(PredictScore, DotProductByHand) {
  HeadConfig hc;
  hc.kind = HeadKind::kDotProduct;
  auto head = init_head_params(hc, 4, 3);
  ASSERT_EQ(head.tensors.tensor_count(), 1u);
  auto& proj = head.tensors.at("head.query_projection");
  proj << 1, 0, 2, -1,  //
      0, 1, 0, 3,       //
      -2, 0, 1, 1;
  const std::vector<double> u{1, 2, 3, 4}, q{1, -1, 2}, m{0.5, -1, 2, 1};
  // q . P = (1 - 4, -1, 2 + 2, -1 - 3 + 2) = (-3, -1, 4, -2); u + qP = (-2, 1, 7, 2)
  // dot with m = -1 - 1 + 14 + 2 = 14
  EXPECT_DOUBLE_EQ(predict_score(u, q, m, head, hc), 14.0);
}

TEST(SortCandidates, TiesByAscendingId) {
  std::vector<ScoredCandidate> c{{LlmId{"b"}, 1.0}, {LlmId{"c"}, 2.0}, {LlmId{"a"}, 1.0}};
  sort_candidates(c);
  EXPECT_EQ(c[0].llm.value, "c");
  EXPECT_EQ(c[1].llm.value, "a");
  EXPECT_EQ(c[2].llm.value, "b");
}

// A small planted dataset and a tiny model, shared across tests.
struct Planted {
  PlantedCorpus pc;
  InteractionStore store;
  DatasetSplit sp;
  std::unique_ptr<TextEncoder> enc = testing::test_encoder(16);
  RatingTable ratings;

  explicit Planted(double new_user_fraction = 0.0, int n_llms = 2) {
    PlantedOptions po;
    po.n_queries = 40;
    po.n_llms = n_llms;
    pc = planted_corpus(po);
    store = InteractionStore(score_corpus(pc.corpus, pc.weights), pc.llms);
    sp = split(store, {}, new_user_fraction, 0);
    ratings = compute_ratings(store, enc.get());
  }
  DataView view() const { return {store, sp, ratings, *enc}; }
};

TrainConfig tiny_config(int epochs) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.hidden = 16;
  tc.heads = 2;
  tc.layers = 2;
  tc.head_hidden = 16;
  tc.head_heads = 2;
  tc.supervision_batch = 32;
  return tc;
}

TEST(Train, ZeroEpochsReturnsInitializedModel) {
  Planted d;
  const auto tc = tiny_config(0);
  const auto r = train(d.view(), tc);
  EXPECT_EQ(r.best.training.best_epoch, 0);
  EXPECT_TRUE(r.best.training.valid_auc.has_value());
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_FALSE(r.log[0].loss.has_value());
  EXPECT_EQ(r.best.model.parameter_digest(), init_model(r.best.model.config).parameter_digest());
}

TEST(Train, SeededRunsAreIdentical) {
  Planted d;
  const auto a = train(d.view(), tiny_config(3));
  const auto b = train(d.view(), tiny_config(3));
  EXPECT_EQ(a.log_jsonl(), b.log_jsonl());
  EXPECT_EQ(a.best.model.parameter_digest(), b.best.model.parameter_digest());
  EXPECT_EQ(serialize_checkpoint(a.best), serialize_checkpoint(b.best));
}

TEST(Train, AblationNameIsLogged) {
  Planted d;
  auto tc = tiny_config(1);
  tc.ablations.dot_product_head = true;
  tc.ablations.no_user_embedding = true;
  const auto r = train(d.view(), tc);
  EXPECT_NE(r.log.back().variant.find("dot_product_head"), std::string::npos) << r.log.back().variant;
  EXPECT_NE(r.log_jsonl().find("no_user_embedding"), std::string::npos);
}

TEST(Train, SupervisionNeverVisible) {
  Planted d;
  int steps = 0;
  TrainHooks hooks;
  hooks.on_step = [&](int, const std::set<std::string>& visible, const std::vector<std::string>& supervision) {
    ++steps;
    for (const auto& id : supervision) {
      EXPECT_FALSE(visible.contains(id)) << id;
      EXPECT_TRUE(d.sp.train.contains(id)) << id;
    }
  };
  auto tc = tiny_config(2);
  tc.steps_per_epoch = 2;
  (void)train(d.view(), tc, hooks);
  EXPECT_EQ(steps, 4);
}

TEST(Train, RejectsBadConfig) {
  Planted d;
  auto tc = tiny_config(1);
  tc.learning_rate = -1;
  EXPECT_THROW(train(d.view(), tc), UsageError);
  tc = tiny_config(1);
  tc.hidden = 15;
  EXPECT_THROW(train(d.view(), tc), UsageError);
}

TEST(SampleSupervision, WholeGroupsWithinBudget) {
  Planted d;
  const auto groups = ranking_groups(d.store, d.sp.train);
  const auto visible = sample_visible_records(d.store, d.sp.train, 3, 1);
  const auto picked = sample_supervision(groups, visible, 9, 4);
  std::size_t total = 0;
  for (const auto& g : picked) {
    EXPECT_GE(g.size(), 2u);
    total += g.size();
    for (const auto& id : g) EXPECT_FALSE(visible.contains(id));
  }
  EXPECT_LE(total, 9u);
  EXPECT_FALSE(picked.empty());
}

struct TrainedTiny : ::testing::Test {
  static inline std::unique_ptr<Planted> data;
  static inline std::unique_ptr<Checkpoint> ckpt;

  static void SetUpTestSuite() {
    data = std::make_unique<Planted>(0.2, 3);
    ckpt = std::make_unique<Checkpoint>(train(data->view(), tiny_config(4)).best);
  }
  static void TearDownTestSuite() {
    ckpt.reset();
    data.reset();
  }

  VisibleSubgraph visible() const {
    return sample_visible(data->store, data->sp.train, 10, 0, *data->enc, data->ratings, ckpt->model.config.graph);
  }
  UserId old_user() const {
    for (const auto& u : data->store.users()) {
      if (!data->sp.new_users.contains(u)) return u;
    }
    return {};
  }
};

TEST_F(TrainedTiny, RankingContract) {
  const Router router(ckpt->model, visible(), *data->enc);
  const auto all = router.rank(old_user(), "a fresh question", {});
  ASSERT_EQ(all.size(), 3u);
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_GE(all[i - 1].score, all[i].score);

  const LlmId one[] = {LlmId{"llm_b"}};
  const auto single = router.rank(old_user(), "a fresh question", one);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].llm.value, "llm_b");
  EXPECT_EQ(route(old_user(), "q", one, ckpt->model, router.visible(), *data->enc).value, "llm_b");

  const LlmId unknown[] = {LlmId{"nope"}};
  EXPECT_THROW(router.rank(old_user(), "q", unknown), UsageError);
  const LlmId dup[] = {LlmId{"llm_a"}, LlmId{"llm_a"}};
  EXPECT_THROW(router.rank(old_user(), "q", dup), UsageError);
  try {
    (void)router.rank(UserId{"stranger"}, "q", {});
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("history"), std::string::npos);
  }
}

TEST_F(TrainedTiny, ColdStartNeedsNoRetraining) {
  const Router router(ckpt->model, visible(), *data->enc);
  std::vector<InteractionRecord> history;
  for (const auto& r : data->store.records()) {
    if (r.user == old_user() && history.size() < 10) {
      auto copy = r;
      copy.user = UserId{"newcomer"};
      history.push_back(copy);
    }
  }
  const auto hr = compute_ratings(history, data->enc.get());
  const auto digest = ckpt->model.parameter_digest();
  const auto ranked = router.rank_with_history(UserId{"newcomer"}, "q", {}, history, hr, data->store.llms());
  EXPECT_EQ(ranked.size(), 3u);
  EXPECT_EQ(ckpt->model.parameter_digest(), digest);
}

TEST_F(TrainedTiny, ArenaScaleCandidates) {
  // 16 LLMs: scores for all, sorted, finite.
  std::vector<LlmInfo> llms;
  std::vector<InteractionRecord> recs;
  for (int m = 0; m < 16; ++m) {
    const auto id = "m" + std::to_string(m);
    llms.push_back({LlmId{id}, "model number " + std::to_string(m), 0});
    recs.push_back(testing::scored_record("r" + std::to_string(m), "u", id, "q", {1.0 * m}));
  }
  const InteractionStore store(recs, llms);
  const auto enc = testing::test_encoder(16);
  const auto config = ckpt->model.config;
  const auto model = init_model(config);
  std::set<std::string> ids;
  for (const auto& r : recs) ids.insert(r.record_id);
  const auto v = sample_visible(store, ids, 16, 0, *enc, compute_ratings(store, enc.get()), config.graph);
  std::vector<LlmId> candidates;
  for (const auto& l : llms) candidates.push_back(l.id);
  const auto ranked = rank_candidates(UserId{"u"}, "which one", candidates, model, v, *enc);
  ASSERT_EQ(ranked.size(), 16u);
  for (std::size_t i = 1; i < ranked.size(); ++i) EXPECT_GT(ranked[i - 1].score, ranked[i].score);
  EXPECT_THROW(rank_candidates(UserId{"u"}, "q", std::span<const LlmId>{}, model, v, *enc), UsageError);
}

TEST_F(TrainedTiny, CheckpointRoundTrip) {
  const auto dir = testing::scratch_dir("ckpt");
  save_checkpoint(*ckpt, dir / "m.ckpt");
  const auto back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.model.parameter_digest(), ckpt->model.parameter_digest());
  EXPECT_EQ(back.model.config.digest(), ckpt->model.config.digest());
  EXPECT_EQ(back.training.best_epoch, ckpt->training.best_epoch);
  const Router a(ckpt->model, visible(), *data->enc);
  const Router b(back.model, visible(), *data->enc);
  const auto ra = a.rank(old_user(), "round trip", {});
  const auto rb = b.rank(old_user(), "round trip", {});
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) EXPECT_NEAR(ra[i].score, rb[i].score, 1e-6);
}

TEST_F(TrainedTiny, CheckpointHeaderAndSize) {
  const auto bytes = serialize_checkpoint(*ckpt);
  ASSERT_GE(bytes.size(), 44u);
  EXPECT_EQ(bytes.substr(0, 6), "GRCKPT");
  std::uint64_t config_digest = 0;
  std::memcpy(&config_digest, bytes.data() + 12, 8);
  EXPECT_EQ(config_digest, ckpt->model.config.digest());
  std::size_t scalars = ckpt->model.hgt.tensors.scalar_count() + ckpt->model.head.tensors.scalar_count();
  EXPECT_GT(bytes.size(), 8 * scalars);
  EXPECT_LT(bytes.size(), 8 * scalars + 64 * 1024);
}

TEST_F(TrainedTiny, CorruptCheckpointsAreRejected) {
  const auto bytes = serialize_checkpoint(*ckpt);
  for (std::size_t cut : {std::size_t{0}, std::size_t{10}, std::size_t{43}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, cut), "cut"), DataError) << cut;
  }
  auto flipped = bytes;
  flipped[flipped.size() - 3] ^= 0x40;
  EXPECT_THROW(deserialize_checkpoint(flipped, "flip"), DataError);
  EXPECT_THROW(deserialize_checkpoint(bytes + "x", "trailing"), DataError);
  auto version = bytes;
  version[8] = 9;
  EXPECT_THROW(deserialize_checkpoint(version, "version"), DataError);

  const auto dir = testing::scratch_dir("ckpt_trunc");
  std::ofstream(dir / "t.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 100);
  EXPECT_THROW(load_checkpoint(dir / "t.ckpt"), DataError);
}

TEST_F(TrainedTiny, RosterHasNoNodeTables) {
  const auto roster = tensor_roster(*ckpt);
  for (const auto& t : roster) {
    EXPECT_TRUE(t.name.starts_with("hgt.") || t.name.starts_with("head.")) << t.name;
    for (const auto& u : data->store.users()) EXPECT_EQ(t.name.find(u.value), std::string::npos) << t.name;
    for (const auto& l : data->store.llms()) EXPECT_EQ(t.name.find(l.id.value), std::string::npos) << t.name;
  }
  // Same config on a different store: identical roster.
  const auto fresh = init_model(ckpt->model.config);
  EXPECT_EQ(fresh.hgt.tensors.schema_digest(), ckpt->model.hgt.tensors.schema_digest());
  EXPECT_EQ(fresh.head.tensors.schema_digest(), ckpt->model.head.tensors.schema_digest());
}

TEST_F(TrainedTiny, EvaluationReportsNewUsersIffPresent) {
  const auto r = evaluate(ckpt->model, data->view(), data->sp.test, {10, 0});
  ASSERT_FALSE(data->sp.new_users.empty());
  EXPECT_TRUE(r.new_users.has_value());
  EXPECT_TRUE(r.old_users.has_value());
  EXPECT_GT(r.history_records, 0u);
  EXPECT_EQ(r.to_json(), evaluate(ckpt->model, data->view(), data->sp.test, {10, 0}).to_json());

  Planted plain;
  const auto m = train(plain.view(), tiny_config(0)).best;
  const auto q = evaluate(m.model, plain.view(), plain.sp.test, {10, 0});
  EXPECT_FALSE(q.new_users.has_value());
  EXPECT_FALSE(q.old_users.has_value());
}

TEST(ModelConfigTest, JsonRoundTripAndVariant) {
  TrainConfig tc = tiny_config(1);
  tc.ablations.homogeneous_backbone = true;
  const auto c = tc.model_config(16);
  const auto back = ModelConfig::from_json(c.to_json());
  EXPECT_EQ(back.digest(), c.digest());
  EXPECT_EQ(back.variant_name(), "homogeneous_backbone");
  EXPECT_EQ(tiny_config(1).model_config(16).variant_name(), "full");
  EXPECT_THROW(ModelConfig::from_json(R"({"bogus": 1})"), DataError);
}

TEST(CheckpointScale, PaperConfigIsHundredsOfMegabytes) {
  TrainConfig tc;  // d 768, 3 layers, head 256
  const auto c = tc.model_config(768);
  const auto m = init_model(c);
  const double bytes = 8.0 * static_cast<double>(m.hgt.tensors.scalar_count() + m.head.tensors.scalar_count());
  EXPECT_GT(bytes, 1e7);
  EXPECT_LT(bytes, 1e9);
}

}  // namespace
}  // namespace graphroute
