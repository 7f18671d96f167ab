// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

#include "graphroute/autodiff.hpp"
#include "graphroute/hgt.hpp"
#include "graphroute/parameters.hpp"

namespace graphroute {

enum class HeadKind {
  /// The LLM state attends over a fused (user, query) context sequence.
  kCrossAttention,
  /// Ablation: dot(user_state + query_projection, llm_state).
  kDotProduct,
};

struct HeadConfig {
  int hidden = 256;
  int heads = 4;
  double dropout = 0.1;
  HeadKind kind = HeadKind::kCrossAttention;
  /// Ablation: the head sees a zero user state.
  bool zero_user_state = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct HeadParams {
  ParameterSet tensors;
};

/// `state_width` is the encoder hidden width; `query_width` the raw embedding width.
HeadParams init_head_params(const HeadConfig& config, int state_width, int query_width);

/// Index triples into the state and query matrices.
struct ScoreBatch {
  std::vector<int> user;
  std::vector<int> query;
  std::vector<int> llm;
  std::size_t size() const { return user.size(); }
};

/// Scores every triple: an n x 1 column.
ad::Var head_scores(ad::Tape& tape, const BoundParameters& params, ad::Var user_states, ad::Var query_embeddings,
                    ad::Var llm_states, const ScoreBatch& batch, const HeadConfig& config, Mode mode,
                    std::uint64_t epoch = 0);

/// Single (user, query, llm) score in eval mode. Throws on non-finite inputs or
/// width mismatches.
double predict_score(std::span<const double> user_state, std::span<const double> query_embedding,
                     std::span<const double> llm_state, const HeadParams& head, const HeadConfig& config);

}  // namespace graphroute
