// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "graphroute/error.hpp"
#include "json.hpp"

namespace graphroute {

namespace {

void check_group(const ScoredGroup& g) {
  if (g.scores.size() != g.ratings.size() || (!g.llms.empty() && g.llms.size() != g.scores.size())) {
    throw UsageError("scored group for user '" + g.user + "' has inconsistent lengths");
  }
}

}  // namespace

std::size_t predicted_top(const ScoredGroup& group) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < group.scores.size(); ++i) {
    if (group.scores[i] > group.scores[best]) {
      best = i;
    } else if (group.scores[i] == group.scores[best] && !group.llms.empty() && group.llms[i] < group.llms[best]) {
      best = i;
    }
  }
  return best;
}

AccuracyResult accuracy(std::span<const ScoredGroup> groups) {
  if (groups.empty()) throw UsageError("accuracy: empty evaluation set");
  AccuracyResult out;
  for (const auto& g : groups) {
    check_group(g);
    if (g.scores.size() < 2) continue;
    const auto top = std::max_element(g.ratings.begin(), g.ratings.end());
    if (std::count(g.ratings.begin(), g.ratings.end(), *top) > 1) {
      ++out.tied_excluded;
      continue;
    }
    ++out.evaluated;
    if (predicted_top(g) == static_cast<std::size_t>(top - g.ratings.begin())) ++out.correct;
  }
  if (out.evaluated == 0) throw UsageError("accuracy: no group has a unique top-rated candidate");
  out.accuracy = static_cast<double>(out.correct) / static_cast<double>(out.evaluated);
  return out;
}

AucResult auc(std::span<const ScoredGroup> groups) {
  double credit = 0.0;
  AucResult out;
  for (const auto& g : groups) {
    check_group(g);
    for (std::size_t i = 0; i < g.scores.size(); ++i) {
      for (std::size_t j = i + 1; j < g.scores.size(); ++j) {
        if (g.ratings[i] == g.ratings[j]) continue;
        const bool i_better = g.ratings[i] > g.ratings[j];
        const double hi = i_better ? g.scores[i] : g.scores[j];
        const double lo = i_better ? g.scores[j] : g.scores[i];
        credit += hi > lo ? 1.0 : (hi == lo ? 0.5 : 0.0);
        ++out.pairs;
      }
    }
  }
  if (out.pairs == 0) throw UsageError("auc: no candidate pair with differing ratings");
  out.auc = credit / static_cast<double>(out.pairs);
  return out;
}

EvalReport make_report(std::span<const ScoredGroup> groups) {
  EvalReport report;
  report.groups = groups.size();
  const auto acc = accuracy(groups);
  report.accuracy = acc.accuracy;
  report.accuracy_groups = acc.evaluated;
  report.tied_groups = acc.tied_excluded;
  const auto a = auc(groups);
  report.auc = a.auc;
  report.auc_pairs = a.pairs;

  std::map<std::string, std::vector<ScoredGroup>> by_user;
  for (const auto& g : groups) by_user[g.user].push_back(g);
  for (const auto& [user, gs] : by_user) {
    UserBreakdown b;
    b.groups = gs.size();
    try {
      b.accuracy = accuracy(gs).accuracy;
    } catch (const UsageError&) {
    }
    try {
      b.auc = auc(gs).auc;
    } catch (const UsageError&) {
    }
    report.per_user.emplace(user, b);
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json out = {
      {"accuracy", accuracy},   {"auc", auc},
      {"groups", groups},       {"accuracy_groups", accuracy_groups},
      {"tied_groups", tied_groups}, {"auc_pairs", auc_pairs},
      {"auc_averaging", kAucAveraging},
  };
  nlohmann::json users = nlohmann::json::object();
  for (const auto& [user, b] : per_user) {
    users[user] = {{"groups", b.groups},
                   {"accuracy", b.accuracy ? nlohmann::json(*b.accuracy) : nlohmann::json()},
                   {"auc", b.auc ? nlohmann::json(*b.auc) : nlohmann::json()}};
  }
  out["per_user"] = users;
  return out.dump(2);
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  char line[160];
  os << "# AUC averaging: " << kAucAveraging << "\n";
  std::snprintf(line, sizeof(line), "%-24s %8s %8s %8s\n", "user", "groups", "accuracy", "auc");
  os << line;
  auto fmt = [](const std::optional<double>& v) {
    char b[16];
    if (v) {
      std::snprintf(b, sizeof(b), "%.4f", *v);
    } else {
      std::snprintf(b, sizeof(b), "-");
    }
    return std::string(b);
  };
  for (const auto& [user, b] : per_user) {
    std::snprintf(line, sizeof(line), "%-24s %8zu %8s %8s\n", user.c_str(), b.groups, fmt(b.accuracy).c_str(),
                  fmt(b.auc).c_str());
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-24s %8zu %8.4f %8.4f\n", "ALL", groups, accuracy, auc);
  os << line;
  return os.str();
}

}  // namespace graphroute
