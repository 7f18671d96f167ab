// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "graphroute/digest.hpp"
#include "graphroute/error.hpp"
#include "graphroute/text_encoder.hpp"
#include "json.hpp"

namespace graphroute {

WinRates win_rates(std::span<const InteractionRecord> records) {
  std::map<std::string, std::vector<std::pair<LlmId, int>>> groups;
  for (const auto& rec : records) {
    for (const auto& turn : rec.turns) {
      if (const auto* r = std::get_if<RankingFeedback>(&turn.feedback); r != nullptr && r->group_size == 2) {
        groups[r->group_id].emplace_back(rec.llm, r->position);
      }
    }
  }
  std::map<LlmId, std::pair<double, double>> tally;  // wins, comparisons
  for (const auto& [_, entries] : groups) {
    if (entries.size() != 2) continue;
    const auto& [a, pa] = entries[0];
    const auto& [b, pb] = entries[1];
    const double wa = pa < pb ? 1.0 : (pa == pb ? 0.5 : 0.0);
    tally[a].first += wa;
    tally[a].second += 1.0;
    tally[b].first += 1.0 - wa;
    tally[b].second += 1.0;
  }
  WinRates out;
  for (const auto& [llm, t] : tally) out.emplace(llm, t.first / t.second);
  return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double mean_or_nan(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double squared_distance(const Matrix& points, Eigen::Index row, const RowVector& center) {
  return (points.row(row) - center).squaredNorm();
}

}  // namespace

double spearman(const WinRates& a, const WinRates& b) {
  std::vector<double> x, y;
  for (const auto& [key, va] : a) {
    auto it = b.find(key);
    if (it == b.end()) continue;
    x.push_back(va);
    y.push_back(it->second);
  }
  if (x.size() < 3) throw UsageError("spearman: fewer than 3 shared keys");
  return pearson(average_ranks(x), average_ranks(y));
}

double self_spearman(std::span<const InteractionRecord> first_half, std::span<const InteractionRecord> second_half) {
  return spearman(win_rates(first_half), win_rates(second_half));
}

std::vector<int> kmeans(const Matrix& points, int clusters, std::uint64_t seed, int max_iterations) {
  const auto n = points.rows();
  if (clusters < 1) throw UsageError("kmeans: cluster count must be >= 1");
  if (n < clusters) throw UsageError("kmeans: fewer points than clusters");
  Rng rng(mix_seed(seed, 0x6b6d));
  std::vector<RowVector> centers;
  centers.push_back(points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(n)))));
  while (static_cast<int>(centers.size()) < clusters) {
    std::vector<double> d2(static_cast<std::size_t>(n));
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, squared_distance(points, i, c));
      d2[static_cast<std::size_t>(i)] = best;
      total += best;
    }
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        r -= d2[static_cast<std::size_t>(i)];
        if (r <= 0.0) {
          pick = i;
          break;
        }
        pick = i;
      }
    } else {
      pick = static_cast<Eigen::Index>(centers.size());
    }
    centers.push_back(points.row(pick));
  }
  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < clusters; ++c) {
        const double d = squared_distance(points, i, centers[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    for (int c = 0; c < clusters; ++c) {
      RowVector sum = RowVector::Zero(points.cols());
      int count = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (assign[static_cast<std::size_t>(i)] == c) {
          sum += points.row(i);
          ++count;
        }
      }
      if (count > 0) centers[static_cast<std::size_t>(c)] = sum / count;
    }
  }
  return assign;
}

ConsistencyReport consistency_report(const InteractionStore& store, const TextEncoder& encoder,
                                     const ConsistencyOptions& options) {
  ConsistencyReport report;
  std::vector<UserId> users;
  std::vector<std::vector<InteractionRecord>> user_records;
  for (const auto& [user, indices] : store.records_by_user()) {
    if (indices.size() < 2 * options.min_records_per_half) continue;
    users.push_back(user);
    auto& recs = user_records.emplace_back();
    for (auto i : indices) recs.push_back(store.records()[i]);
  }
  if (static_cast<int>(users.size()) < options.clusters) {
    throw UsageError("consistency: " + std::to_string(users.size()) + " eligible users but " +
                     std::to_string(options.clusters) + " clusters requested");
  }
  report.users_analyzed = users.size();

  std::vector<double> self_values;
  Matrix centroids(static_cast<Eigen::Index>(users.size()), encoder.width());
  for (std::size_t u = 0; u < users.size(); ++u) {
    auto shuffled = user_records[u];
    Rng rng(mix_seed(options.seed, digest_of(users[u].value)));
    rng.shuffle(shuffled.begin(), shuffled.end());
    const auto half = shuffled.size() / 2;
    try {
      const double s = self_spearman(std::span(shuffled).first(half), std::span(shuffled).subspan(half));
      self_values.push_back(s);
      report.per_user_self[users[u].value] = s;
    } catch (const UsageError&) {
      ++report.pairs_skipped;
    }
    report.user_win_rates[users[u].value] = win_rates(user_records[u]);

    RowVector mean = RowVector::Zero(encoder.width());
    std::size_t n_queries = 0;
    for (const auto& rec : user_records[u]) {
      for (const auto& turn : rec.turns) {
        const auto e = encoder.encode(turn.query);
        mean += Eigen::Map<const RowVector>(e.data(), encoder.width());
        ++n_queries;
      }
    }
    centroids.row(static_cast<Eigen::Index>(u)) = mean / static_cast<double>(std::max<std::size_t>(1, n_queries));
  }
  const auto assignment = kmeans(centroids, options.clusters, options.seed);
  for (std::size_t u = 0; u < users.size(); ++u) report.clusters[users[u].value] = assignment[u];

  std::vector<double> global, intra, inter;
  for (std::size_t a = 0; a < users.size(); ++a) {
    for (std::size_t b = a + 1; b < users.size(); ++b) {
      double s = 0.0;
      try {
        s = spearman(report.user_win_rates[users[a].value], report.user_win_rates[users[b].value]);
      } catch (const UsageError&) {
        ++report.pairs_skipped;
        continue;
      }
      global.push_back(s);
      (assignment[a] == assignment[b] ? intra : inter).push_back(s);
    }
  }
  report.self_spearman = mean_or_nan(self_values);
  report.global_spearman = mean_or_nan(global);
  report.intra_cluster_spearman = mean_or_nan(intra);
  report.inter_cluster_spearman = mean_or_nan(inter);
  return report;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace

std::string ConsistencyReport::to_json() const {
  nlohmann::json out = {
      {"self_spearman", number_or_null(self_spearman)},
      {"global_spearman", number_or_null(global_spearman)},
      {"intra_cluster_spearman", number_or_null(intra_cluster_spearman)},
      {"inter_cluster_spearman", number_or_null(inter_cluster_spearman)},
      {"users_analyzed", users_analyzed},
      {"pairs_skipped", pairs_skipped},
      {"clusters", clusters},
      {"per_user_self", per_user_self},
  };
  nlohmann::json ratio;
  for (const auto& [k, v] : {std::pair{"global", global_spearman}, std::pair{"intra_cluster", intra_cluster_spearman},
                             std::pair{"inter_cluster", inter_cluster_spearman}}) {
    ratio[k] = number_or_null(v / self_spearman);
  }
  out["ratio_to_self"] = ratio;
  return out.dump(2);
}

std::string ConsistencyReport::to_text() const {
  const auto cell = [](double v, bool percent) {
    char buf[32];
    if (!std::isfinite(v)) return std::string("n/a");
    std::snprintf(buf, sizeof(buf), percent ? "%.2f%%" : "%.4f", percent ? 100.0 * v : v);
    return std::string(buf);
  };
  const double values[] = {self_spearman, global_spearman, intra_cluster_spearman, inter_cluster_spearman};
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-10s %14s %14s %14s %14s\n", "metric", "self", "global", "intra-cluster",
                "inter-cluster");
  os << line;
  for (const bool percent : {false, true}) {
    std::snprintf(line, sizeof(line), "%-10s", percent ? "percent" : "value");
    os << line;
    for (const double v : values) {
      std::snprintf(line, sizeof(line), " %14s", cell(percent ? v / self_spearman : v, percent).c_str());
      os << line;
    }
    os << '\n';
  }
  if (users_analyzed > 0 && !std::isfinite(self_spearman)) {
    os << "note: no user had enough pairwise (2-candidate ranking) feedback over >= 3 LLMs\n";
  }
  return os.str();
}

std::string ConsistencyReport::heatmap_csv() const {
  std::set<LlmId> llms;
  for (const auto& [_, rates] : user_win_rates) {
    for (const auto& [llm, _r] : rates) llms.insert(llm);
  }
  std::ostringstream os;
  os << "user";
  for (const auto& l : llms) os << ',' << l.value;
  os << '\n';
  for (const auto& [user, rates] : user_win_rates) {
    os << user;
    for (const auto& l : llms) {
      os << ',';
      if (auto it = rates.find(l); it != rates.end()) os << it->second;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace graphroute
