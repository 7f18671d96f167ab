// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/feedback_norm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "graphroute/error.hpp"
#include "graphroute/text_encoder.hpp"
#include "json.hpp"

namespace graphroute {

Rating rating_from_score(double value, double min, double max) {
  if (!(min < max)) throw UsageError("rating_from_score: min must be < max");
  if (!std::isfinite(value)) throw UsageError("rating_from_score: value must be finite");
  const double clamped = std::clamp(value, min, max);
  return Rating{(clamped - min) / (max - min)};
}

Rating rating_from_ranking(int position, int group_size) {
  if (group_size < 2) throw UsageError("rating_from_ranking: group_size must be >= 2");
  if (position < 1 || position > group_size) {
    throw UsageError("rating_from_ranking: position must lie in [1, group_size]");
  }
  return Rating{static_cast<double>(group_size - position) / static_cast<double>(group_size - 1)};
}

Rating rating_from_ground_truth(std::span<const double> response_embedding, std::span<const double> truth_embedding) {
  if (response_embedding.size() != truth_embedding.size()) {
    throw UsageError("rating_from_ground_truth: embedding widths differ");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < response_embedding.size(); ++i) {
    dot += response_embedding[i] * truth_embedding[i];
    na += response_embedding[i] * response_embedding[i];
    nb += truth_embedding[i] * truth_embedding[i];
  }
  if (na == 0.0 || nb == 0.0) throw UsageError("rating_from_ground_truth: zero-norm embedding");
  const double cosine = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
  return Rating{(1.0 + cosine) / 2.0};
}

std::vector<double> preference_feature(Rating rating, int width) {
  if (width < 1) throw UsageError("preference_feature: width must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(width));
  out[0] = rating.value;
  const int pairs = width / 2;
  for (int i = 1; i < width; ++i) {
    const int k = (i - 1) / 2;
    // Geometric spacing from pi/2 to 4*pi: coarse-to-fine resolution over [0, 1].
    const double freq = 0.5 * std::numbers::pi * std::pow(8.0, static_cast<double>(k) / std::max(1, pairs - 1));
    const double phase = freq * rating.value;
    out[static_cast<std::size_t>(i)] = ((i - 1) % 2 == 0) ? std::sin(phase) : std::cos(phase);
  }
  return out;
}

RatingTable compute_ratings(const InteractionStore& store, const TextEncoder* encoder,
                            std::optional<ScoreRange> score_range) {
  return compute_ratings(std::span<const InteractionRecord>(store.records()), encoder, score_range);
}

std::optional<ScoreRange> observed_score_range(std::span<const InteractionRecord> records) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& rec : records) {
    for (const auto& turn : rec.turns) {
      if (const auto* s = std::get_if<ScalarScore>(&turn.feedback)) {
        lo = std::min(lo, s->value);
        hi = std::max(hi, s->value);
      }
    }
  }
  if (lo < hi) return ScoreRange{lo, hi};
  // A single observed score value: place it in the middle of the scale.
  if (lo == hi) return ScoreRange{lo - 1.0, hi + 1.0};
  return std::nullopt;
}

RatingTable compute_ratings(std::span<const InteractionRecord> records, const TextEncoder* encoder,
                            std::optional<ScoreRange> score_range) {
  if (!score_range) score_range = observed_score_range(records);
  RatingTable table;
  for (const auto& rec : records) {
    auto& out = table[rec.record_id];
    out.reserve(rec.turns.size());
    for (const auto& turn : rec.turns) {
      if (const auto* s = std::get_if<ScalarScore>(&turn.feedback)) {
        out.push_back(rating_from_score(s->value, score_range->min, score_range->max));
      } else if (const auto* r = std::get_if<RankingFeedback>(&turn.feedback)) {
        out.push_back(rating_from_ranking(r->position, r->group_size));
      } else {
        const auto& truth = std::get<GroundTruth>(turn.feedback);
        if (encoder == nullptr) {
          throw UsageError("record '" + rec.record_id + "': ground-truth feedback requires a text encoder");
        }
        const auto response = encoder->encode(turn.response);
        const auto reference = encoder->encode(truth.text);
        out.push_back(rating_from_ground_truth(response, reference));
      }
    }
  }
  return table;
}

std::string ratings_to_json(const RatingTable& table) {
  nlohmann::json obj = nlohmann::json::object();
  for (const auto& [id, ratings] : table) {
    auto& arr = obj[id] = nlohmann::json::array();
    for (auto r : ratings) arr.push_back(r.value);
  }
  return obj.dump();
}

RatingTable ratings_from_json(const std::string& text) {
  RatingTable table;
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("ratings file: invalid JSON: ") + e.what());
  }
  for (const auto& [id, arr] : obj.items()) {
    auto& out = table[id];
    for (const auto& v : arr) {
      const double value = v.get<double>();
      if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
        throw DataError("ratings file: record '" + id + "' has a rating outside [0, 1]");
      }
      out.push_back(Rating{value});
    }
  }
  return table;
}

void write_ratings(const std::filesystem::path& path, const RatingTable& table) {
  write_text_file_atomic(path, ratings_to_json(table));
}

RatingTable read_ratings(const std::filesystem::path& path) { return ratings_from_json(read_text_file(path)); }

}  // namespace graphroute
