// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "graphroute/interaction_store.hpp"

namespace graphroute {

class TextEncoder;

/// Normalized feedback in [0, 1].
struct Rating {
  double value = 0.0;
  auto operator<=>(const Rating&) const = default;
};

/// Affine map of a clamped score onto [0, 1]. Throws UsageError if min >= max.
Rating rating_from_score(double value, double min, double max);

/// Linear discretization: (group_size - position) / (group_size - 1).
Rating rating_from_ranking(int position, int group_size);

/// (1 + cosine) / 2 between response and reference embeddings.
Rating rating_from_ground_truth(std::span<const double> response_embedding,
                                std::span<const double> truth_embedding);

/// First entry is the rating; the remaining entries alternate sin/cos of the
/// rating at geometrically spaced frequencies. Parameter-free.
std::vector<double> preference_feature(Rating rating, int width);

/// Per-record, per-turn ratings.
using RatingTable = std::map<std::string, std::vector<Rating>>;

struct ScoreRange {
  double min = 0.0;
  double max = 1.0;
};

/// Min/max over scalar-score feedback; a single distinct value v gives
/// [v - 1, v + 1]. nullopt when no scalar feedback exists.
std::optional<ScoreRange> observed_score_range(std::span<const InteractionRecord> records);

/// Converts every turn's feedback. Scalar scores use `score_range` when given,
/// else the observed min/max of all scalar scores in the store. Ground-truth
/// feedback needs an encoder.
RatingTable compute_ratings(const InteractionStore& store, const TextEncoder* encoder,
                            std::optional<ScoreRange> score_range = std::nullopt);

/// Same as above over an arbitrary record list (used for few-shot histories).
RatingTable compute_ratings(std::span<const InteractionRecord> records, const TextEncoder* encoder,
                            std::optional<ScoreRange> score_range = std::nullopt);

std::string ratings_to_json(const RatingTable& table);
RatingTable ratings_from_json(const std::string& text);
void write_ratings(const std::filesystem::path& path, const RatingTable& table);
RatingTable read_ratings(const std::filesystem::path& path);

}  // namespace graphroute
