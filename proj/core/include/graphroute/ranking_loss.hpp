// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "graphroute/autodiff.hpp"

namespace graphroute {

/// Per-group listwise cross-entropy between softmax(scores) and
/// softmax(ratings / temperature). Groups with fewer than two members are
/// dropped; the loss is the mean over the remaining groups.
struct RankingLoss {
  double temperature = 0.5;

  /// Throws UsageError when no group has two members, RuntimeError on
  /// non-finite inputs.
  double operator()(std::span<const double> scores, std::span<const double> ratings,
                    std::span<const int> group) const;

  /// Tape version over an n x 1 score column.
  ad::Var operator()(ad::Tape& tape, ad::Var scores, std::span<const double> ratings,
                     std::span<const int> group) const;
};

/// Rows that belong to groups with at least two members, and dense group ids
/// for them.
struct GroupLayout {
  std::vector<int> rows;
  std::vector<int> dense_group;
  int groups = 0;
};
GroupLayout layout_groups(std::span<const int> group);

}  // namespace graphroute
