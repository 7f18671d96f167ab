// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/ranking_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "graphroute/error.hpp"

namespace graphroute {

GroupLayout layout_groups(std::span<const int> group) {
  std::map<int, int> size;
  for (int g : group) ++size[g];
  std::map<int, int> dense;
  for (const auto& [g, n] : size) {
    if (n >= 2) dense.emplace(g, static_cast<int>(dense.size()));
  }
  GroupLayout out;
  out.groups = static_cast<int>(dense.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    auto it = dense.find(group[i]);
    if (it == dense.end()) continue;
    out.rows.push_back(static_cast<int>(i));
    out.dense_group.push_back(it->second);
  }
  return out;
}

namespace {

Matrix target_distribution(std::span<const double> ratings, const GroupLayout& layout, double temperature) {
  std::vector<double> mx(static_cast<std::size_t>(layout.groups), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < layout.rows.size(); ++i) {
    auto& m = mx[static_cast<std::size_t>(layout.dense_group[i])];
    m = std::max(m, ratings[static_cast<std::size_t>(layout.rows[i])] / temperature);
  }
  Matrix target(static_cast<Eigen::Index>(layout.rows.size()), 1);
  std::vector<double> denom(static_cast<std::size_t>(layout.groups), 0.0);
  for (std::size_t i = 0; i < layout.rows.size(); ++i) {
    const auto g = static_cast<std::size_t>(layout.dense_group[i]);
    target(static_cast<Eigen::Index>(i), 0) = std::exp(ratings[static_cast<std::size_t>(layout.rows[i])] / temperature - mx[g]);
    denom[g] += target(static_cast<Eigen::Index>(i), 0);
  }
  for (std::size_t i = 0; i < layout.rows.size(); ++i) {
    target(static_cast<Eigen::Index>(i), 0) /= denom[static_cast<std::size_t>(layout.dense_group[i])];
  }
  return target;
}

void check_inputs(std::size_t n_scores, std::span<const double> ratings, std::span<const int> group, double temperature) {
  if (n_scores != ratings.size() || n_scores != group.size()) {
    throw UsageError("ranking loss: scores, ratings and groups must have equal length");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw UsageError("ranking loss: temperature must be > 0");
  for (double r : ratings) {
    if (!std::isfinite(r)) throw RuntimeError("ranking loss: non-finite rating");
  }
}

}  // namespace

double RankingLoss::operator()(std::span<const double> scores, std::span<const double> ratings,
                               std::span<const int> group) const {
  ad::Tape tape;
  Matrix s(static_cast<Eigen::Index>(scores.size()), 1);
  for (std::size_t i = 0; i < scores.size(); ++i) s(static_cast<Eigen::Index>(i), 0) = scores[i];
  return tape.value((*this)(tape, tape.constant(std::move(s)), ratings, group))(0, 0);
}

ad::Var RankingLoss::operator()(ad::Tape& tape, ad::Var scores, std::span<const double> ratings,
                                std::span<const int> group) const {
  const auto& s = tape.value(scores);
  check_inputs(static_cast<std::size_t>(s.rows()), ratings, group, temperature);
  if (!s.allFinite()) throw RuntimeError("ranking loss: non-finite score");
  const auto layout = layout_groups(group);
  if (layout.groups == 0) throw UsageError("ranking loss: no group has two or more candidates");
  const auto target = target_distribution(ratings, layout, temperature);
  const auto kept = static_cast<std::size_t>(s.rows()) == layout.rows.size() ? scores : tape.gather_rows(scores, layout.rows);
  return tape.grouped_cross_entropy(kept, layout.dense_group, layout.groups, target);
}

}  // namespace graphroute
