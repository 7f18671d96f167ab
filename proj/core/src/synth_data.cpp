// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/synth_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "graphroute/digest.hpp"
#include "graphroute/error.hpp"
#include "graphroute/text_encoder.hpp"
#include "json.hpp"

namespace graphroute {

using nlohmann::json;

double utility(const ResponseMetrics& m, const UserWeights& w) {
  return w.w_rating * m.quality + w.w_tokens * m.tokens + w.w_diff * m.rare_words + w.w_cost * m.cost;
}

std::filesystem::path bundled_data_dir() {
  if (const char* env = std::getenv("GRAPHROUTE_DATA_DIR"); env != nullptr && *env != '\0') return env;
#ifdef GRAPHROUTE_DATA_DIR
  if (std::filesystem::is_directory(GRAPHROUTE_DATA_DIR)) return GRAPHROUTE_DATA_DIR;
#endif
#ifdef GRAPHROUTE_INSTALL_DATA_DIR
  return GRAPHROUTE_INSTALL_DATA_DIR;
#else
  return "data";
#endif
}

RareWordCounter::RareWordCounter(const std::filesystem::path& frequency_list) {
  std::ifstream in(frequency_list);
  if (!in) throw DataError("cannot open word frequency list " + frequency_list.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(frequency_list.string() + ":" + std::to_string(line_no) + ": expected word<TAB>frequency");
    }
    std::string word = line.substr(0, tab);
    double freq = 0.0;
    try {
      freq = std::stod(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw DataError(frequency_list.string() + ":" + std::to_string(line_no) + ": bad frequency");
    }
    if (freq < kThreshold) continue;
    if (top_.size() < 2000) top_.push_back(word);
    common_.insert(std::move(word));
  }
  if (common_.empty()) throw DataError("word frequency list " + frequency_list.string() + " is empty");
}

const RareWordCounter& RareWordCounter::bundled() {
  static const RareWordCounter counter(bundled_data_dir() / "word_frequencies.tsv");
  return counter;
}

bool RareWordCounter::is_rare(std::string_view word) const { return !common_.contains(std::string(word)); }

std::size_t RareWordCounter::count(std::string_view text) const {
  std::size_t n = 0;
  for (const auto& w : word_tokens(text)) n += is_rare(w) ? 1 : 0;
  return n;
}

namespace {

std::string located(const std::string& source, std::size_t line) { return source + ":" + std::to_string(line) + ": "; }

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(where + "missing field '" + key + "'");
  return *it;
}

ResponseMetrics measure(const std::string& text, double quality, double price, const RareWordCounter& counter) {
  ResponseMetrics m;
  m.quality = quality;
  m.tokens = static_cast<double>(whitespace_token_count(text));
  m.rare_words = static_cast<double>(counter.count(text));
  m.rare_words = std::min(m.rare_words, m.tokens);
  m.cost = m.tokens * price;
  return m;
}

}  // namespace

std::vector<CorpusEntry> parse_corpus(const std::string& jsonl, const std::string& source,
                                      std::span<const LlmInfo> llms, const RareWordCounter& counter) {
  std::map<std::string, double> prices;
  for (const auto& l : llms) prices[l.id.value] = l.price_per_token;
  std::vector<CorpusEntry> out;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = located(source, line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + "invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw DataError(where + "expected an object");
    CorpusEntry entry;
    const auto& q = require(j, "query", where);
    if (!q.is_string()) throw DataError(where + "field 'query' must be a string");
    entry.query = q.get<std::string>();
    const auto& responses = require(j, "responses", where);
    if (!responses.is_array()) throw DataError(where + "field 'responses' must be an array");
    for (std::size_t i = 0; i < responses.size(); ++i) {
      const auto& r = responses[i];
      const auto rw = where + "responses[" + std::to_string(i) + "]: ";
      if (!r.is_object()) throw DataError(rw + "expected an object");
      const auto& llm = require(r, "llm", rw);
      const auto& text = require(r, "text", rw);
      const auto& quality = require(r, "quality", rw);
      if (!llm.is_string() || llm.get<std::string>().empty()) throw DataError(rw + "field 'llm' must be a non-empty string");
      if (!text.is_string()) throw DataError(rw + "field 'text' must be a string");
      if (!quality.is_number() || !std::isfinite(quality.get<double>())) {
        throw DataError(rw + "field 'quality' must be a finite number");
      }
      double price = 0.0;
      if (!prices.empty()) {
        auto it = prices.find(llm.get<std::string>());
        if (it == prices.end()) throw DataError(rw + "field 'llm': '" + llm.get<std::string>() + "' not in catalog");
        price = it->second;
      }
      entry.responses.push_back(
          {LlmId{llm.get<std::string>()}, text.get<std::string>(),
           measure(text.get<std::string>(), quality.get<double>(), price, counter)});
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<CorpusEntry> read_corpus(const std::filesystem::path& path, std::span<const LlmInfo> llms,
                                     const RareWordCounter& counter) {
  return parse_corpus(read_text_file(path), path.string(), llms, counter);
}

void write_corpus(const std::filesystem::path& path, const std::vector<CorpusEntry>& corpus) {
  std::string out;
  for (const auto& e : corpus) {
    json j{{"query", e.query}, {"responses", json::array()}};
    for (const auto& r : e.responses) {
      j["responses"].push_back({{"llm", r.llm.value}, {"text", r.text}, {"quality", r.metrics.quality}});
    }
    out += j.dump();
    out += '\n';
  }
  write_text_file_atomic(path, out);
}

WeightTable parse_weights(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(source + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw DataError(source + ": expected an object of users");
  static constexpr std::array<const char*, 4> kKeys{"w_rating", "w_tokens", "w_diff", "w_cost"};
  WeightTable table;
  for (const auto& [user, row] : j.items()) {
    const auto where = source + ": " + user + ": ";
    if (!row.is_object()) throw DataError(where + "expected an object");
    for (const auto& [key, _] : row.items()) {
      if (std::find_if(kKeys.begin(), kKeys.end(), [&](const char* k) { return key == k; }) == kKeys.end()) {
        throw DataError(where + "unknown field '" + key + "'");
      }
    }
    std::array<double, 4> v{};
    for (std::size_t i = 0; i < kKeys.size(); ++i) {
      const auto& x = require(row, kKeys[i], where);
      if (!x.is_number() || !std::isfinite(x.get<double>())) {
        throw DataError(where + "field '" + kKeys[i] + "' must be a finite number");
      }
      v[i] = x.get<double>();
    }
    table[user] = UserWeights{v[0], v[1], v[2], v[3]};
  }
  if (table.empty()) throw DataError(source + ": no users");
  return table;
}

WeightTable read_weights(const std::filesystem::path& path) {
  return parse_weights(read_text_file(path), path.string());
}

std::vector<std::vector<ResponseMetrics>> scaled_metrics(const std::vector<CorpusEntry>& corpus,
                                                         MetricScaling scaling) {
  std::vector<std::vector<ResponseMetrics>> out;
  out.reserve(corpus.size());
  for (const auto& e : corpus) {
    auto& row = out.emplace_back();
    for (const auto& r : e.responses) row.push_back(r.metrics);
  }
  if (scaling == MetricScaling::kRaw) return out;

  using Field = double ResponseMetrics::*;
  for (Field f : {&ResponseMetrics::quality, &ResponseMetrics::cost, &ResponseMetrics::tokens,
                  &ResponseMetrics::rare_words}) {
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (const auto& row : out) {
      for (const auto& m : row) {
        sum += m.*f;
        n += 1.0;
      }
    }
    if (n == 0.0) continue;
    const double mean = sum / n;
    for (const auto& row : out) {
      for (const auto& m : row) sq += (m.*f - mean) * (m.*f - mean);
    }
    const double sd = std::sqrt(sq / n);
    for (auto& row : out) {
      for (auto& m : row) m.*f = sd > 0.0 ? (m.*f - mean) / sd : 0.0;
    }
  }
  return out;
}

namespace {

void check_corpus(const std::vector<CorpusEntry>& corpus) {
  std::set<std::string> queries;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& e = corpus[i];
    const auto where = "corpus entry " + std::to_string(i) + ": ";
    if (e.responses.size() < 2) {
      throw DataError(where + "needs at least 2 responses, has " + std::to_string(e.responses.size()));
    }
    if (!queries.insert(e.query).second) throw DataError(where + "duplicate query text");
    std::set<LlmId> seen;
    for (const auto& r : e.responses) {
      if (!seen.insert(r.llm).second) throw DataError(where + "duplicate response from llm '" + r.llm.value + "'");
      const auto& m = r.metrics;
      if (!std::isfinite(m.quality) || !std::isfinite(m.cost) || !std::isfinite(m.tokens) ||
          !std::isfinite(m.rare_words)) {
        throw DataError(where + "non-finite metric");
      }
      if (m.tokens < 0 || m.cost < 0 || m.rare_words < 0 || m.rare_words > m.tokens) {
        throw DataError(where + "metrics violate 0 <= rare_words <= tokens, cost >= 0");
      }
    }
  }
}

}  // namespace

std::vector<InteractionRecord> score_corpus(const std::vector<CorpusEntry>& corpus, const WeightTable& users,
                                            MetricScaling scaling) {
  check_corpus(corpus);
  if (users.empty()) throw UsageError("score_corpus: no users");
  const auto scaled = scaled_metrics(corpus, scaling);
  std::vector<InteractionRecord> records;
  records.reserve(users.size() * corpus.size() * 2);
  for (const auto& [user, weights] : users) {
    for (std::size_t q = 0; q < corpus.size(); ++q) {
      const auto& entry = corpus[q];
      std::vector<double> u;
      for (const auto& m : scaled[q]) u.push_back(utility(m, weights));
      const auto [lo, hi] = std::minmax_element(u.begin(), u.end());
      const double min = *lo, max = *hi;
      for (std::size_t r = 0; r < entry.responses.size(); ++r) {
        const double rating = max > min ? (u[r] - min) / (max - min) : 0.5;
        InteractionRecord rec;
        rec.record_id = user + "/q" + std::to_string(q) + "/" + entry.responses[r].llm.value;
        rec.user = UserId{user};
        rec.llm = entry.responses[r].llm;
        rec.turns.push_back(Turn{entry.query, entry.responses[r].text, ScalarScore{rating}});
        records.push_back(std::move(rec));
      }
    }
  }
  return records;
}

OracleTable oracle_table(const std::vector<CorpusEntry>& corpus, const WeightTable& users, MetricScaling scaling) {
  check_corpus(corpus);
  const auto scaled = scaled_metrics(corpus, scaling);
  OracleTable table;
  for (const auto& [user, weights] : users) {
    auto& row = table[user];
    for (std::size_t q = 0; q < corpus.size(); ++q) {
      std::optional<std::size_t> best;
      bool tied = false;
      double best_u = 0.0;
      for (std::size_t r = 0; r < scaled[q].size(); ++r) {
        const double u = utility(scaled[q][r], weights);
        if (!best || u > best_u) {
          best = r;
          best_u = u;
          tied = false;
        } else if (u == best_u) {
          tied = true;
        }
      }
      row.push_back(tied ? std::nullopt : std::optional<LlmId>(corpus[q].responses[*best].llm));
    }
  }
  return table;
}

WeightTable default_planted_weights(int n_users) {
  if (n_users < 1) throw UsageError("planted corpus: n_users must be >= 1");
  static constexpr std::array<int, 10> kOrder{1, 6, 3, 8, 9, 4, 7, 5, 10, 2};
  const auto gsm8k = read_weights(bundled_data_dir() / "weights" / "gsm8k.json");
  WeightTable out;
  for (int i = 0; i < n_users; ++i) {
    const int row = kOrder[static_cast<std::size_t>(i) % kOrder.size()];
    out["user_" + std::to_string(i + 1)] = gsm8k.at("user_" + std::to_string(row));
  }
  return out;
}

namespace {

constexpr std::array<std::array<const char*, 8>, 2> kCategoryWords{{
    {"apples", "train", "speed", "marbles", "boxes", "distance", "dollars", "hours"},
    {"poem", "castle", "melody", "river", "painting", "novel", "garden", "legend"},
}};

constexpr std::array<const char*, 24> kFillerWords{
    "please", "explain", "what", "how", "many", "would", "could", "each",  "about", "your", "this",   "there",
    "which",  "after",   "before", "then", "some", "every", "also", "given", "find",  "tell", "answer", "should",
};

constexpr std::array<const char*, 12> kSyllables{"zu", "vor", "qix", "blor", "fen", "gra", "tyk", "mlo", "pruv", "dax",
                                                  "kesh", "wob"};

std::string made_up_word(Rng& rng, const RareWordCounter& counter) {
  for (;;) {
    std::string w;
    const auto n = 2 + rng.below(2);
    for (std::size_t i = 0; i < n; ++i) w += kSyllables[rng.below(kSyllables.size())];
    if (counter.is_rare(w)) return w;
  }
}

std::string llm_name(int i) {
  if (i < 26) return std::string("llm_") + static_cast<char>('a' + i);
  return "llm_" + std::to_string(i);
}

}  // namespace

PlantedCorpus planted_corpus(const PlantedOptions& o) {
  if (o.n_llms < 2) throw UsageError("planted corpus: n_llms must be >= 2");
  if (o.n_queries < 1) throw UsageError("planted corpus: n_queries must be >= 1");
  if (o.flat_fraction < 0.0 || o.flat_fraction > 1.0) throw UsageError("planted corpus: flat_fraction must be in [0, 1]");

  PlantedCorpus out;
  if (o.weights) {
    if (static_cast<int>(o.weights->size()) < o.n_users) {
      throw UsageError("planted corpus: weight table has fewer than n_users rows");
    }
    auto it = o.weights->begin();
    for (int i = 0; i < o.n_users; ++i, ++it) out.weights.insert(*it);
  } else {
    out.weights = default_planted_weights(o.n_users);
  }

  const auto& counter = RareWordCounter::bundled();
  std::vector<std::string> common;
  for (const auto& w : counter.top_words()) {
    if (w.size() >= 3 && std::all_of(w.begin(), w.end(), [](char c) { return c >= 'a' && c <= 'z'; })) {
      common.push_back(w);
      if (common.size() == 400) break;
    }
  }

  constexpr double kPrice = 1e-5;
  for (int m = 0; m < o.n_llms; ++m) {
    out.llms.push_back({LlmId{llm_name(m)}, llm_name(m) + " general assistant model", kPrice});
  }

  Rng rng(mix_seed(o.seed, 0x706c616e74ULL));
  std::set<std::string> used;
  for (int q = 0; q < o.n_queries; ++q) {
    const int category = static_cast<int>(rng.below(2));
    std::string query;
    do {
      std::vector<const char*> words(kCategoryWords[static_cast<std::size_t>(category)].begin(),
                                     kCategoryWords[static_cast<std::size_t>(category)].end());
      rng.shuffle(words.begin(), words.end());
      std::vector<std::string> parts{kFillerWords[rng.below(kFillerWords.size())], words[0], words[1], words[2],
                                     kFillerWords[rng.below(kFillerWords.size())]};
      query.clear();
      for (const auto& p : parts) query += (query.empty() ? "" : " ") + p;
      query += '?';
    } while (!used.insert(query).second);

    const bool flat = rng.uniform() < o.flat_fraction;
    const int base = 1 + static_cast<int>(rng.below(4));
    const int step = 2 + static_cast<int>(rng.below(3));
    int tokens = 30 + static_cast<int>(rng.below(51));
    tokens = std::max(tokens, base + step * (o.n_llms - 1) + 5);

    CorpusEntry entry;
    entry.query = query;
    for (int m = 0; m < o.n_llms; ++m) {
      // Rare-word rank: LLM order in category 0, reversed in category 1.
      const int rank = (category == 0 || !o.flip_by_category) ? m : o.n_llms - 1 - m;
      const int rare = flat ? base : base + step * (o.n_llms - 1 - rank);
      const double quality = rng.uniform() < 0.7 ? 1.0 : 0.0;
      std::vector<std::string> words;
      for (int i = 0; i < rare; ++i) words.push_back(made_up_word(rng, counter));
      for (int i = rare; i < tokens; ++i) words.push_back(common[rng.below(common.size())]);
      rng.shuffle(words.begin(), words.end());
      std::string text;
      for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
      text += '.';
      entry.responses.push_back({out.llms[static_cast<std::size_t>(m)].id, text, measure(text, quality, kPrice, counter)});
    }
    out.category.push_back(category);
    out.corpus.push_back(std::move(entry));
  }
  out.oracle = oracle_table(out.corpus, out.weights, MetricScaling::kStandardize);
  return out;
}

}  // namespace graphroute
