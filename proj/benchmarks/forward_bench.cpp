// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <vector>

#include "graphroute/feedback_norm.hpp"
#include "graphroute/router.hpp"
#include "graphroute/synth_data.hpp"
#include "graphroute/trainer.hpp"

namespace {

using namespace graphroute;

// Planted store with a k-per-user visible subgraph, as seen during training.
struct Fixture {
  PlantedCorpus planted = planted_corpus(PlantedOptions{});
  InteractionStore store{score_corpus(planted.corpus, planted.weights), planted.llms};
  TextEncoder encoder{EncoderSpec{EncoderKind::kDeterministicTest, 128, std::nullopt, 0, ""}};
  RatingTable ratings = compute_ratings(store, &encoder);

  VisibleSubgraph visible(int k, const ModelConfig& config) const {
    std::set<std::string> all;
    for (const auto& r : store.records()) all.insert(r.record_id);
    return sample_visible(store, all, k, 0, encoder, ratings, config.graph);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

ModelConfig config_for(int hidden) {
  TrainConfig tc;
  tc.hidden = hidden;
  tc.head_hidden = 64;
  return tc.model_config(128);
}

void BM_EncoderForward(benchmark::State& state) {
  const auto config = config_for(static_cast<int>(state.range(1)));
  const auto model = init_model(config);
  const auto visible = fixture().visible(static_cast<int>(state.range(0)), config);
  for (auto _ : state) {
    auto states = embed(model, visible.graph);
    benchmark::DoNotOptimize(&states);
  }
  state.counters["turns"] = static_cast<double>(visible.graph.turns.size());
}
BENCHMARK(BM_EncoderForward)->Args({10, 32})->Args({10, 128})->Args({40, 128})->Unit(benchmark::kMillisecond);

void BM_RankCandidates(benchmark::State& state) {
  const auto config = config_for(128);
  const auto model = init_model(config);
  const Router router(model, fixture().visible(10, config), fixture().encoder);
  const auto& llms = fixture().planted.llms;
  std::vector<LlmId> candidates;
  for (const auto& l : llms) candidates.push_back(l.id);
  const UserId user{"user_1"};
  for (auto _ : state) {
    auto ranked = router.rank(user, "what is the capital of australia", candidates);
    benchmark::DoNotOptimize(ranked.data());
  }
}
BENCHMARK(BM_RankCandidates)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
