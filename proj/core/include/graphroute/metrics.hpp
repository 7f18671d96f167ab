// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "graphroute/interaction_store.hpp"

namespace graphroute {

/// Candidates scored for one (user, query).
struct ScoredGroup {
  std::string user;
  std::vector<LlmId> llms;
  std::vector<double> scores;
  std::vector<double> ratings;
};

struct AccuracyResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t evaluated = 0;
  /// Groups whose top rating is tied; excluded from the denominator.
  std::size_t tied_excluded = 0;
};

struct AucResult {
  double auc = 0.0;
  std::size_t pairs = 0;
};

/// Predicted top-1 equals the unique top-rated candidate. Score ties are
/// broken by ascending LLM id. Throws UsageError when nothing is evaluable.
AccuracyResult accuracy(std::span<const ScoredGroup> groups);

/// Pooled pairwise AUC: over all within-group pairs with unequal ratings, the
/// fraction where the higher-rated candidate scores higher (score ties count
/// 0.5). Throws UsageError when no such pair exists.
AucResult auc(std::span<const ScoredGroup> groups);

/// Index of the predicted top candidate under the tie rule above.
std::size_t predicted_top(const ScoredGroup& group);

struct UserBreakdown {
  std::size_t groups = 0;
  std::optional<double> accuracy;
  std::optional<double> auc;
};

struct EvalReport {
  double accuracy = 0.0;
  double auc = 0.0;
  std::size_t groups = 0;
  std::size_t accuracy_groups = 0;
  std::size_t tied_groups = 0;
  std::size_t auc_pairs = 0;
  std::map<std::string, UserBreakdown> per_user;

  static constexpr const char* kAucAveraging = "pooled-pairs (micro-average over all within-group pairs)";

  std::string to_json() const;
  std::string to_text() const;
};

EvalReport make_report(std::span<const ScoredGroup> groups);

}  // namespace graphroute
