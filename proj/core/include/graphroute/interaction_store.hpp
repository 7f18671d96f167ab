// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace graphroute {

struct UserId {
  std::string value;
  auto operator<=>(const UserId&) const = default;
};

struct LlmId {
  std::string value;
  auto operator<=>(const LlmId&) const = default;
};

/// Catalog entry for a candidate model.
struct LlmInfo {
  LlmId id;
  std::string description;
  /// Price per generated token, used to derive response cost.
  double price_per_token = 0.0;
};

struct ScalarScore {
  double value = 0.0;
  bool operator==(const ScalarScore&) const = default;
};

struct RankingFeedback {
  int position = 1;
  int group_size = 2;
  std::string group_id;
  bool operator==(const RankingFeedback&) const = default;
};

struct GroundTruth {
  std::string text;
  bool operator==(const GroundTruth&) const = default;
};

using Feedback = std::variant<ScalarScore, RankingFeedback, GroundTruth>;

struct Turn {
  std::string query;
  std::string response;
  Feedback feedback;
};

struct InteractionRecord {
  std::string record_id;
  UserId user;
  LlmId llm;
  std::vector<Turn> turns;

  /// Ranking-group key: records sharing (user, first query) compete.
  std::string group_key() const;
};

/// Immutable Interaction History Table plus its user and LLM catalogs.
class InteractionStore {
 public:
  InteractionStore() = default;

  /// Validates every record; throws DataError on the first violation.
  InteractionStore(std::vector<InteractionRecord> records, std::vector<LlmInfo> llms);

  const std::vector<InteractionRecord>& records() const { return records_; }
  const std::vector<UserId>& users() const { return users_; }
  const std::vector<LlmInfo>& llms() const { return llms_; }

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const InteractionRecord& record(const std::string& record_id) const;
  const InteractionRecord* find(const std::string& record_id) const;
  const LlmInfo* find_llm(const LlmId& id) const;
  bool has_user(const UserId& user) const;

  /// Record indices per user, in store order.
  const std::map<UserId, std::vector<std::size_t>>& records_by_user() const { return by_user_; }

 private:
  std::vector<InteractionRecord> records_;
  std::vector<UserId> users_;
  std::vector<LlmInfo> llms_;
  std::map<std::string, std::size_t> by_id_;
  std::map<UserId, std::vector<std::size_t>> by_user_;
};

/// Checks the Feedback invariants for a single value.
void validate_feedback(const Feedback& feedback, const std::string& context);

/// Throws DataError naming the violated field.
void validate_record(const InteractionRecord& record);

/// Parses a JSON-lines history file. `llms_path`, when present, is the
/// `llms.jsonl` sidecar; LLMs referenced by records but absent from the
/// sidecar get an empty description.
InteractionStore ingest(const std::filesystem::path& path,
                        const std::optional<std::filesystem::path>& llms_path = std::nullopt);

/// Parses records from JSON-lines text. Records without `record_id` get the
/// zero-based index of their record among the file's non-blank lines.
std::vector<InteractionRecord> parse_records(const std::string& jsonl, const std::string& source_name);
std::vector<LlmInfo> parse_llm_catalog(const std::string& jsonl, const std::string& source_name);
std::vector<LlmInfo> read_llm_catalog(const std::filesystem::path& path);

std::string record_to_json(const InteractionRecord& record);
std::string llm_to_json(const LlmInfo& llm);
void write_records(const std::filesystem::path& path, const std::vector<InteractionRecord>& records);
void write_llm_catalog(const std::filesystem::path& path, const std::vector<LlmInfo>& llms);

struct SplitRatio {
  int train = 7;
  int valid = 1;
  int test = 2;
};

struct DatasetSplit {
  std::set<std::string> train;
  std::set<std::string> valid;
  std::set<std::string> test;
  std::set<UserId> new_users;
};

/// Deterministic per-user split. The allocation unit is a ranking group
/// (records sharing user and first query), so candidates for one query never
/// straddle splits. Users drawn as new keep all their records in test.
DatasetSplit split(const InteractionStore& store, SplitRatio ratio, double new_user_fraction,
                   std::uint64_t seed);

/// Largest-remainder apportionment of `n` items over the three ratio parts.
std::array<std::size_t, 3> apportion(std::size_t n, SplitRatio ratio);

std::string split_to_json(const DatasetSplit& split);
DatasetSplit split_from_json(const std::string& text);
void write_split(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit read_split(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it over `path`.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace graphroute
