// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/interaction_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "graphroute/digest.hpp"
#include "graphroute/error.hpp"
#include "json.hpp"

namespace graphroute {

using nlohmann::json;

std::string InteractionRecord::group_key() const {
  return user.value + '\x1f' + (turns.empty() ? std::string{} : turns.front().query);
}

void validate_feedback(const Feedback& feedback, const std::string& context) {
  if (const auto* s = std::get_if<ScalarScore>(&feedback)) {
    if (!std::isfinite(s->value)) throw DataError(context + ": feedback.value must be finite");
  } else if (const auto* r = std::get_if<RankingFeedback>(&feedback)) {
    if (r->group_size < 2) throw DataError(context + ": feedback.group_size must be >= 2");
    if (r->position < 1) throw DataError(context + ": feedback.position must be >= 1");
    if (r->position > r->group_size) {
      throw DataError(context + ": feedback.position exceeds feedback.group_size");
    }
  } else if (const auto* g = std::get_if<GroundTruth>(&feedback)) {
    if (g->text.empty()) throw DataError(context + ": feedback.text must be non-empty");
  }
}

void validate_record(const InteractionRecord& record) {
  const std::string ctx = "record '" + record.record_id + "'";
  if (record.record_id.empty()) throw DataError(ctx + ": record_id must be non-empty");
  if (record.user.value.empty()) throw DataError(ctx + ": user must be non-empty");
  if (record.llm.value.empty()) throw DataError(ctx + ": llm must be non-empty");
  if (record.turns.empty()) throw DataError(ctx + ": turns must be non-empty");
  for (std::size_t t = 0; t < record.turns.size(); ++t) {
    const auto& turn = record.turns[t];
    const std::string tctx = ctx + " turn " + std::to_string(t);
    if (turn.query.empty()) throw DataError(tctx + ": query must be non-empty");
    if (turn.response.empty()) throw DataError(tctx + ": response must be non-empty");
    validate_feedback(turn.feedback, tctx);
  }
}

InteractionStore::InteractionStore(std::vector<InteractionRecord> records, std::vector<LlmInfo> llms)
    : records_(std::move(records)) {
  std::map<LlmId, LlmInfo> catalog;
  for (auto& llm : llms) {
    if (llm.id.value.empty()) throw DataError("llm catalog: llm must be non-empty");
    catalog.emplace(llm.id, llm);
  }
  std::map<std::string, int> group_sizes;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& rec = records_[i];
    validate_record(rec);
    if (!by_id_.emplace(rec.record_id, i).second) {
      throw DataError("duplicate record_id '" + rec.record_id + "'");
    }
    by_user_[rec.user].push_back(i);
    if (!catalog.contains(rec.llm)) catalog.emplace(rec.llm, LlmInfo{rec.llm, "", 0.0});
    for (const auto& turn : rec.turns) {
      if (const auto* r = std::get_if<RankingFeedback>(&turn.feedback)) {
        auto [it, inserted] = group_sizes.emplace(r->group_id, r->group_size);
        if (!inserted && it->second != r->group_size) {
          throw DataError("record '" + rec.record_id + "': feedback.group_size disagrees within group '" +
                          r->group_id + "'");
        }
      }
    }
  }
  for (const auto& [user, _] : by_user_) users_.push_back(user);
  for (auto& [_, info] : catalog) llms_.push_back(std::move(info));
}

const InteractionRecord& InteractionStore::record(const std::string& record_id) const {
  const auto* rec = find(record_id);
  if (rec == nullptr) throw DataError("unknown record_id '" + record_id + "'");
  return *rec;
}

const InteractionRecord* InteractionStore::find(const std::string& record_id) const {
  auto it = by_id_.find(record_id);
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

const LlmInfo* InteractionStore::find_llm(const LlmId& id) const {
  auto it = std::lower_bound(llms_.begin(), llms_.end(), id,
                             [](const LlmInfo& info, const LlmId& key) { return info.id < key; });
  return (it != llms_.end() && it->id == id) ? &*it : nullptr;
}

bool InteractionStore::has_user(const UserId& user) const { return by_user_.contains(user); }

namespace {

[[noreturn]] void fail_line(const std::string& source, std::size_t line, const std::string& what) {
  throw DataError(source + ":" + std::to_string(line) + ": " + what);
}

const json& require(const json& obj, const char* field, const std::string& source, std::size_t line) {
  if (!obj.is_object() || !obj.contains(field)) fail_line(source, line, std::string("missing field '") + field + "'");
  return obj.at(field);
}

std::string require_string(const json& obj, const char* field, const std::string& source, std::size_t line) {
  const auto& v = require(obj, field, source, line);
  if (!v.is_string()) fail_line(source, line, std::string("field '") + field + "' must be a string");
  return v.get<std::string>();
}

Feedback parse_feedback(const json& fb, const std::string& source, std::size_t line) {
  const std::string kind = require_string(fb, "kind", source, line);
  if (kind == "score") {
    const auto& v = require(fb, "value", source, line);
    if (!v.is_number()) fail_line(source, line, "field 'feedback.value' must be a number");
    return ScalarScore{v.get<double>()};
  }
  if (kind == "ranking") {
    const auto& pos = require(fb, "position", source, line);
    const auto& size = require(fb, "group_size", source, line);
    if (!pos.is_number_integer()) fail_line(source, line, "field 'feedback.position' must be an integer");
    if (!size.is_number_integer()) fail_line(source, line, "field 'feedback.group_size' must be an integer");
    return RankingFeedback{pos.get<int>(), size.get<int>(), require_string(fb, "group_id", source, line)};
  }
  if (kind == "ground_truth") return GroundTruth{require_string(fb, "text", source, line)};
  fail_line(source, line, "field 'feedback.kind' has unknown value '" + kind + "'");
}

json feedback_to_json(const Feedback& feedback) {
  return std::visit(
      [](const auto& f) -> json {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ScalarScore>) {
          return {{"kind", "score"}, {"value", f.value}};
        } else if constexpr (std::is_same_v<T, RankingFeedback>) {
          return {{"kind", "ranking"}, {"position", f.position}, {"group_size", f.group_size}, {"group_id", f.group_id}};
        } else {
          return {{"kind", "ground_truth"}, {"text", f.text}};
        }
      },
      feedback);
}

template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(line, line_no);
  }
}

}  // namespace

std::vector<InteractionRecord> parse_records(const std::string& jsonl, const std::string& source_name) {
  std::vector<InteractionRecord> out;
  std::set<std::string> seen;
  for_each_line(jsonl, [&](const std::string& line, std::size_t line_no) {
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_line(source_name, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) fail_line(source_name, line_no, "record must be a JSON object");
    InteractionRecord rec;
    if (obj.contains("record_id") && !obj["record_id"].is_null()) {
      rec.record_id = require_string(obj, "record_id", source_name, line_no);
    } else {
      rec.record_id = std::to_string(out.size());
    }
    rec.user.value = require_string(obj, "user", source_name, line_no);
    rec.llm.value = require_string(obj, "llm", source_name, line_no);
    const auto& turns = require(obj, "turns", source_name, line_no);
    if (!turns.is_array()) fail_line(source_name, line_no, "field 'turns' must be an array");
    for (const auto& t : turns) {
      Turn turn;
      turn.query = require_string(t, "query", source_name, line_no);
      turn.response = require_string(t, "response", source_name, line_no);
      turn.feedback = parse_feedback(require(t, "feedback", source_name, line_no), source_name, line_no);
      rec.turns.push_back(std::move(turn));
    }
    try {
      validate_record(rec);
    } catch (const DataError& e) {
      fail_line(source_name, line_no, e.what());
    }
    if (!seen.insert(rec.record_id).second) {
      fail_line(source_name, line_no, "duplicate record_id '" + rec.record_id + "'");
    }
    out.push_back(std::move(rec));
  });
  return out;
}

std::vector<LlmInfo> parse_llm_catalog(const std::string& jsonl, const std::string& source_name) {
  std::vector<LlmInfo> out;
  for_each_line(jsonl, [&](const std::string& line, std::size_t line_no) {
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_line(source_name, line_no, std::string("invalid JSON: ") + e.what());
    }
    LlmInfo info;
    info.id.value = require_string(obj, "llm", source_name, line_no);
    if (info.id.value.empty()) fail_line(source_name, line_no, "field 'llm' must be non-empty");
    if (obj.contains("description")) info.description = require_string(obj, "description", source_name, line_no);
    if (obj.contains("price_per_token")) {
      const auto& p = obj["price_per_token"];
      if (!p.is_number() || p.get<double>() < 0.0) {
        fail_line(source_name, line_no, "field 'price_per_token' must be a non-negative number");
      }
      info.price_per_token = p.get<double>();
    }
    out.push_back(std::move(info));
  });
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeError("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out) throw RuntimeError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::vector<LlmInfo> read_llm_catalog(const std::filesystem::path& path) {
  return parse_llm_catalog(read_text_file(path), path.string());
}

InteractionStore ingest(const std::filesystem::path& path, const std::optional<std::filesystem::path>& llms_path) {
  auto records = parse_records(read_text_file(path), path.string());
  std::vector<LlmInfo> llms;
  if (llms_path) llms = read_llm_catalog(*llms_path);
  return InteractionStore(std::move(records), std::move(llms));
}

std::string record_to_json(const InteractionRecord& record) {
  json turns = json::array();
  for (const auto& t : record.turns) {
    turns.push_back({{"query", t.query}, {"response", t.response}, {"feedback", feedback_to_json(t.feedback)}});
  }
  json obj = {{"record_id", record.record_id}, {"user", record.user.value}, {"llm", record.llm.value}, {"turns", turns}};
  return obj.dump();
}

std::string llm_to_json(const LlmInfo& llm) {
  json obj = {{"llm", llm.id.value}, {"description", llm.description}};
  if (llm.price_per_token != 0.0) obj["price_per_token"] = llm.price_per_token;
  return obj.dump();
}

void write_records(const std::filesystem::path& path, const std::vector<InteractionRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r);
    out += '\n';
  }
  write_text_file_atomic(path, out);
}

void write_llm_catalog(const std::filesystem::path& path, const std::vector<LlmInfo>& llms) {
  std::string out;
  for (const auto& l : llms) {
    out += llm_to_json(l);
    out += '\n';
  }
  write_text_file_atomic(path, out);
}

std::array<std::size_t, 3> apportion(std::size_t n, SplitRatio ratio) {
  const std::array<int, 3> parts{ratio.train, ratio.valid, ratio.test};
  const double total = static_cast<double>(parts[0] + parts[1] + parts[2]);
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double quota = static_cast<double>(n) * parts[i] / total;
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    remainders[i] = quota - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];
  return counts;
}

DatasetSplit split(const InteractionStore& store, SplitRatio ratio, double new_user_fraction, std::uint64_t seed) {
  if (ratio.train <= 0 || ratio.valid <= 0 || ratio.test <= 0) {
    throw UsageError("split ratio entries must all be positive");
  }
  if (!(new_user_fraction >= 0.0 && new_user_fraction < 1.0)) {
    throw UsageError("new_user_fraction must lie in [0, 1)");
  }
  if (store.empty()) throw UsageError("cannot split an empty store");

  DatasetSplit out;
  std::vector<UserId> users = store.users();
  Rng user_rng(mix_seed(seed, 0x5e1ec7));
  user_rng.shuffle(users.begin(), users.end());
  const auto n_new = static_cast<std::size_t>(std::llround(new_user_fraction * static_cast<double>(users.size())));
  for (std::size_t i = 0; i < n_new && i < users.size(); ++i) out.new_users.insert(users[i]);

  for (const auto& [user, indices] : store.records_by_user()) {
    if (out.new_users.contains(user)) {
      for (auto i : indices) out.test.insert(store.records()[i].record_id);
      continue;
    }
    std::map<std::string, std::vector<std::string>> groups;
    for (auto i : indices) {
      const auto& rec = store.records()[i];
      groups[rec.group_key()].push_back(rec.record_id);
    }
    std::vector<const std::vector<std::string>*> order;
    order.reserve(groups.size());
    for (const auto& [_, ids] : groups) order.push_back(&ids);
    Rng rng(mix_seed(seed, digest_of(user.value)));
    rng.shuffle(order.begin(), order.end());

    auto counts = apportion(order.size(), ratio);
    if (indices.size() < 10 && counts[2] == 0 && !order.empty()) {
      const int donor = counts[0] >= counts[1] ? 0 : 1;
      --counts[donor];
      ++counts[2];
    }
    std::size_t g = 0;
    std::array<std::set<std::string>*, 3> targets{&out.train, &out.valid, &out.test};
    for (int part = 0; part < 3; ++part) {
      for (std::size_t c = 0; c < counts[part]; ++c, ++g) {
        for (const auto& id : *order[g]) targets[part]->insert(id);
      }
    }
  }
  return out;
}

std::string split_to_json(const DatasetSplit& split) {
  json obj;
  obj["train"] = split.train;
  obj["valid"] = split.valid;
  obj["test"] = split.test;
  json users = json::array();
  for (const auto& u : split.new_users) users.push_back(u.value);
  obj["new_users"] = users;
  return obj.dump(2);
}

DatasetSplit split_from_json(const std::string& text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("split file: invalid JSON: ") + e.what());
  }
  DatasetSplit out;
  auto read_set = [&](const char* field, std::set<std::string>& dst) {
    if (!obj.contains(field) || !obj[field].is_array()) {
      throw DataError(std::string("split file: field '") + field + "' must be an array");
    }
    for (const auto& v : obj[field]) dst.insert(v.get<std::string>());
  };
  read_set("train", out.train);
  read_set("valid", out.valid);
  read_set("test", out.test);
  std::set<std::string> users;
  if (obj.contains("new_users")) read_set("new_users", users);
  for (auto& u : users) out.new_users.insert(UserId{u});
  return out;
}

void write_split(const std::filesystem::path& path, const DatasetSplit& split) {
  write_text_file_atomic(path, split_to_json(split));
}

DatasetSplit read_split(const std::filesystem::path& path) { return split_from_json(read_text_file(path)); }

}  // namespace graphroute
