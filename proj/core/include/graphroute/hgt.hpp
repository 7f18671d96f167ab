// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

#include "graphroute/autodiff.hpp"
#include "graphroute/hetero_graph.hpp"
#include "graphroute/parameters.hpp"

namespace graphroute {

enum class Mode { kTrain, kEval };

enum class Backbone {
  /// Relation-aware multi-head attention (heterogeneous graph transformer).
  kHeterogeneous,
  /// Ablation: one shared relation with mean aggregation over all neighbors.
  kHomogeneousMean,
};

struct HgtConfig {
  int hidden = 768;
  int heads = 4;
  int layers = 3;
  double dropout = 0.1;
  std::uint64_t seed = 0;
  bool residual = true;
  Backbone backbone = Backbone::kHeterogeneous;

  void validate() const;
  int head_width() const { return hidden / heads; }
};

/// Raw input width per node type; relations are the fixed relation_schema().
struct HgtSchema {
  std::array<int, kNodeTypeCount> input_widths{};

  static HgtSchema for_graph(const HeteroGraph& graph);
  std::uint64_t digest() const;
};

/// Encoder weights. Holds no per-node or per-user tables: every tensor shape
/// depends only on (config, schema).
struct HgtParams {
  ParameterSet tensors;
};

/// h^(L) per node type.
struct NodeStates {
  std::array<Matrix, kNodeTypeCount> states;
  const Matrix& of(NodeType type) const { return states[static_cast<int>(type)]; }
};

/// Seeded uniform initialization scaled by fan-in.
HgtParams init_hgt_params(const HgtConfig& config, const HgtSchema& schema);

/// Records the encoder on `tape`. `epoch` salts the dropout masks, which are a
/// pure function of (config.seed, epoch, layer, node type).
std::array<ad::Var, kNodeTypeCount> hgt_forward(ad::Tape& tape, const BoundParameters& params,
                                                const HeteroGraph& graph, const HgtConfig& config, Mode mode,
                                                std::uint64_t epoch = 0);

/// Untracked forward pass. Throws RuntimeError naming the layer on NaN/Inf.
NodeStates forward(const HeteroGraph& graph, const HgtParams& params, const HgtConfig& config, Mode mode,
                   std::uint64_t epoch = 0);

/// Builds a tape with tracked parameters, evaluates `loss`, and returns
/// d(loss)/d(params) for every tensor. Throws RuntimeError on a non-finite loss.
ParameterSet grad(const ParameterSet& params,
                  const std::function<ad::Var(ad::Tape&, const BoundParameters&)>& loss);

}  // namespace graphroute
