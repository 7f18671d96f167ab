// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "graphroute/interaction_store.hpp"

namespace graphroute {

struct ResponseMetrics {
  double quality = 0.0;
  double cost = 0.0;
  double tokens = 0.0;
  double rare_words = 0.0;
};

struct UserWeights {
  double w_rating = 0.0;
  double w_tokens = 0.0;
  double w_diff = 0.0;
  double w_cost = 0.0;
  bool operator==(const UserWeights&) const = default;
};

/// w_rating*quality + w_tokens*tokens + w_diff*rare_words + w_cost*cost.
double utility(const ResponseMetrics& metrics, const UserWeights& weights);

struct CorpusResponse {
  LlmId llm;
  std::string text;
  ResponseMetrics metrics;
};

struct CorpusEntry {
  std::string query;
  std::vector<CorpusResponse> responses;
};

using WeightTable = std::map<std::string, UserWeights>;

/// Words with corpus frequency >= 1e-6; anything else counts as rare.
class RareWordCounter {
 public:
  /// Loads a `word<TAB>frequency` list; '#' lines are comments.
  explicit RareWordCounter(const std::filesystem::path& frequency_list);
  /// The list bundled with the library.
  static const RareWordCounter& bundled();

  bool is_rare(std::string_view lowercase_word) const;
  std::size_t count(std::string_view text) const;
  std::size_t vocabulary_size() const { return common_.size(); }
  /// The most frequent words, in file order.
  const std::vector<std::string>& top_words() const { return top_; }

  static constexpr double kThreshold = 1e-6;

 private:
  std::unordered_set<std::string> common_;
  std::vector<std::string> top_;
};

std::filesystem::path bundled_data_dir();

/// Parses `{"query", "responses": [{"llm", "text", "quality"}]}` lines.
/// tokens and rare words are counted from the text; cost is tokens times the
/// catalog price (0 for LLMs missing from an empty catalog).
std::vector<CorpusEntry> parse_corpus(const std::string& jsonl, const std::string& source_name,
                                      std::span<const LlmInfo> llms, const RareWordCounter& counter);
std::vector<CorpusEntry> read_corpus(const std::filesystem::path& path, std::span<const LlmInfo> llms,
                                     const RareWordCounter& counter);
void write_corpus(const std::filesystem::path& path, const std::vector<CorpusEntry>& corpus);

WeightTable parse_weights(const std::string& json_text, const std::string& source_name);
WeightTable read_weights(const std::filesystem::path& path);

enum class MetricScaling {
  /// Utilities over raw metric values.
  kRaw,
  /// Each metric z-scored across every response in the corpus first.
  kStandardize,
};

/// Metrics after the chosen dataset-level scaling, entry by entry.
std::vector<std::vector<ResponseMetrics>> scaled_metrics(const std::vector<CorpusEntry>& corpus,
                                                         MetricScaling scaling);

/// One single-turn record per (user, query, llm) with a ScalarScore holding
/// the utility min-max normalized within its (user, query) group; constant
/// groups get 0.5. Record ids are "<user>/q<index>/<llm>".
std::vector<InteractionRecord> score_corpus(const std::vector<CorpusEntry>& corpus, const WeightTable& users,
                                            MetricScaling scaling = MetricScaling::kStandardize);

/// Best LLM per (user, query index); nullopt when the top utility is tied.
using OracleTable = std::map<std::string, std::vector<std::optional<LlmId>>>;

OracleTable oracle_table(const std::vector<CorpusEntry>& corpus, const WeightTable& users, MetricScaling scaling);

struct PlantedOptions {
  int n_users = 5;
  int n_llms = 2;
  int n_queries = 600;
  std::uint64_t seed = 0;
  /// Share of queries where responses carry equal rare-word counts.
  double flat_fraction = 0.05;
  /// When set, the rare-word ranking of LLMs reverses in category 1.
  bool flip_by_category = false;
  /// Overrides the default rows; must hold at least n_users entries.
  std::optional<WeightTable> weights;
};

struct PlantedCorpus {
  std::vector<CorpusEntry> corpus;
  std::vector<LlmInfo> llms;
  WeightTable weights;
  /// Category of each query.
  std::vector<int> category;
  OracleTable oracle;
};

/// Two query categories with distinct vocabularies. Within a query every LLM
/// writes the same number of tokens at the same price, and the rare-word lead
/// switches LLMs between categories. Users whose w_diff has opposite signs
/// therefore prefer opposite LLMs, and the preference flips with the category.
PlantedCorpus planted_corpus(const PlantedOptions& options);

/// GSM8K rows 1, 6, 3, 8, 9, 4, 7, 5, 10, 2; mixes both w_diff signs early.
WeightTable default_planted_weights(int n_users);

}  // namespace graphroute
