// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "graphroute/digest.hpp"
#include "graphroute/error.hpp"
#include "graphroute/ranking_loss.hpp"
#include "graphroute/router.hpp"
#include "json.hpp"

namespace graphroute {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 0) throw UsageError("train: epochs must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw UsageError("train: learning_rate must be > 0");
  if (k < 1) throw UsageError("train: k must be >= 1");
  if (supervision_batch < 2) throw UsageError("train: supervision_batch must be >= 2");
  if (steps_per_epoch < 1) throw UsageError("train: steps_per_epoch must be >= 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw UsageError("train: temperature must be > 0");
  if (preference_width < 1) throw UsageError("train: preference_width must be >= 1");
  model_config(8).hgt.validate();
  model_config(8).head.validate();
}

ModelConfig TrainConfig::model_config(int embedding_width) const {
  ModelConfig c;
  c.embedding_width = embedding_width;
  c.graph.preference_width = preference_width;
  c.graph.zero_preference_feature = ablations.no_preference_feature;
  c.hgt.hidden = hidden;
  c.hgt.heads = heads;
  c.hgt.layers = layers;
  c.hgt.dropout = dropout;
  c.hgt.seed = mix_seed(seed, 0x686774);
  c.hgt.backbone = ablations.homogeneous_backbone ? Backbone::kHomogeneousMean : Backbone::kHeterogeneous;
  c.head.hidden = head_hidden;
  c.head.heads = head_heads;
  c.head.dropout = dropout;
  c.head.kind = ablations.dot_product_head ? HeadKind::kDotProduct : HeadKind::kCrossAttention;
  c.head.zero_user_state = ablations.no_user_embedding;
  c.head.seed = mix_seed(seed, 0x68656164);
  c.schema.input_widths = feature_widths(embedding_width, c.graph);
  c.temperature = temperature;
  return c;
}

namespace {

json optional_number(const std::optional<double>& v) { return v && std::isfinite(*v) ? json(*v) : json(); }

double first_rating(const RatingTable& ratings, const std::string& id) {
  auto it = ratings.find(id);
  if (it == ratings.end() || it->second.empty()) throw DataError("missing rating for record '" + id + "' turn 0");
  return it->second.front().value;
}

VisibleSubgraph visible_for(const DataView& d, const std::set<std::string>& pool, int k, std::uint64_t seed,
                            const GraphConfig& graph_config, std::span<const UserId> extra_users) {
  VisibleSubgraph v;
  v.k = k;
  v.included_records = sample_visible_records(d.store, pool, k, seed);
  for (const auto& id : v.included_records) {
    v.records.push_back(d.store.record(id));
    auto it = d.ratings.find(id);
    if (it == d.ratings.end()) throw DataError("missing rating for record '" + id + "' turn 0");
    v.ratings.emplace(id, it->second);
  }
  v.graph = build_graph(v.records, d.store.llms(), d.encoder, v.ratings, graph_config, extra_users);
  return v;
}

std::vector<UserId> non_new_users(const DataView& d) {
  std::vector<UserId> out;
  for (const auto& u : d.store.users()) {
    if (!d.split.new_users.contains(u)) out.push_back(u);
  }
  return out;
}

ParameterSet combine(const Model& m) {
  ParameterSet all;
  for (const auto* set : {&m.hgt.tensors, &m.head.tensors}) {
    for (const auto& e : set->entries()) all.add(e.name, e.value);
  }
  return all;
}

void scatter_back(const ParameterSet& all, Model& m) {
  for (auto* set : {&m.hgt.tensors, &m.head.tensors}) {
    for (auto& e : set->entries()) e.value = all.at(e.name);
  }
}

struct Batch {
  ScoreBatch index;
  Matrix queries;
  std::vector<double> ratings;
  std::vector<int> group;
};

Batch make_batch(const HeteroGraph& graph, const DataView& d, const std::vector<std::vector<std::string>>& groups) {
  Batch b;
  std::map<std::string, int> query_row;
  std::vector<std::string> query_text;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto& id : groups[g]) {
      const auto& rec = d.store.record(id);
      const int u = graph.user_node(rec.user);
      const int m = graph.llm_node(rec.llm);
      if (u < 0) throw UsageError("user '" + rec.user.value + "' has no node in the visible subgraph");
      if (m < 0) throw UsageError("unknown llm '" + rec.llm.value + "'");
      const auto& q = rec.turns.front().query;
      auto [it, inserted] = query_row.emplace(q, static_cast<int>(query_text.size()));
      if (inserted) query_text.push_back(q);
      b.index.user.push_back(u);
      b.index.llm.push_back(m);
      b.index.query.push_back(it->second);
      b.ratings.push_back(first_rating(d.ratings, id));
      b.group.push_back(static_cast<int>(g));
    }
  }
  b.queries.resize(static_cast<Eigen::Index>(query_text.size()), d.encoder.width());
  const auto embeddings = d.encoder.encode_batch(query_text);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    b.queries.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const RowVector>(embeddings[i].data(), static_cast<Eigen::Index>(embeddings[i].size()));
  }
  return b;
}

std::vector<ScoredGroup> to_scored(const DataView& d, const std::vector<std::vector<std::string>>& groups,
                                   const std::vector<double>& scores) {
  std::vector<ScoredGroup> out;
  std::size_t row = 0;
  for (const auto& g : groups) {
    ScoredGroup sg;
    for (const auto& id : g) {
      const auto& rec = d.store.record(id);
      sg.user = rec.user.value;
      sg.llms.push_back(rec.llm);
      sg.scores.push_back(scores[row++]);
      sg.ratings.push_back(first_rating(d.ratings, id));
    }
    out.push_back(std::move(sg));
  }
  return out;
}

// True when `a` (a later epoch) should replace `b`; full ties go to the later
// epoch, which has seen more updates.
bool better(const EpochLog& a, const EpochLog& b) {
  const double auc_a = a.valid_auc.value_or(-1.0), auc_b = b.valid_auc.value_or(-1.0);
  if (auc_a != auc_b) return auc_a > auc_b;
  return a.valid_accuracy.value_or(-1.0) >= b.valid_accuracy.value_or(-1.0);
}

}  // namespace

std::string EpochLog::to_json() const {
  return json{{"epoch", epoch},
              {"loss", optional_number(loss)},
              {"valid_accuracy", optional_number(valid_accuracy)},
              {"valid_auc", optional_number(valid_auc)},
              {"skipped_batches", skipped_batches},
              {"variant", variant}}
      .dump();
}

std::string TrainResult::log_jsonl() const {
  std::string out;
  for (const auto& e : log) out += e.to_json() + "\n";
  return out;
}

std::vector<std::vector<std::string>> ranking_groups(const InteractionStore& store, const std::set<std::string>& ids) {
  std::map<std::string, std::vector<std::string>> by_key;
  for (const auto& id : ids) by_key[store.record(id).group_key()].push_back(id);
  std::vector<std::vector<std::string>> out;
  out.reserve(by_key.size());
  for (auto& [_, members] : by_key) out.push_back(std::move(members));
  return out;
}

std::vector<std::vector<std::string>> sample_supervision(const std::vector<std::vector<std::string>>& groups,
                                                         const std::set<std::string>& visible, int batch,
                                                         std::uint64_t seed) {
  std::vector<std::vector<std::string>> eligible;
  for (const auto& g : groups) {
    std::vector<std::string> kept;
    for (const auto& id : g) {
      if (!visible.contains(id)) kept.push_back(id);
    }
    if (kept.size() >= 2) eligible.push_back(std::move(kept));
  }
  Rng rng(seed);
  rng.shuffle(eligible.begin(), eligible.end());
  std::vector<std::vector<std::string>> out;
  std::size_t total = 0;
  for (auto& g : eligible) {
    if (!out.empty() && total + g.size() > static_cast<std::size_t>(batch)) break;
    total += g.size();
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<ScoredGroup> score_groups(const Model& model, const HeteroGraph& graph, const DataView& data,
                                      const std::vector<std::vector<std::string>>& groups) {
  if (groups.empty()) return {};
  const auto batch = make_batch(graph, data, groups);
  const auto states = embed(model, graph);
  return to_scored(data, groups, score_batch(model, states, batch.queries, batch.index));
}

TrainResult train(const DataView& d, const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (d.split.train.empty()) throw UsageError("train: empty train split");
  if (d.store.llms().size() < 2) throw UsageError("train: need at least 2 candidate LLMs");
  auto warn = hooks.warn ? hooks.warn : [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };

  auto model_config = config.model_config(d.encoder.width());
  model_config.encoder_kind = d.encoder.spec().kind_name();
  model_config.encoder_seed = d.encoder.spec().seed;
  Model model = init_model(model_config);
  ParameterSet params = combine(model);
  Adam adam(params, AdamConfig{config.learning_rate});
  const RankingLoss loss_fn{config.temperature};
  const std::string variant = model_config.variant_name();

  const auto users = non_new_users(d);
  const auto train_groups = ranking_groups(d.store, d.split.train);
  const auto valid_groups = ranking_groups(d.store, d.split.valid);
  const auto valid_visible =
      visible_for(d, d.split.train, config.k, mix_seed(config.seed, 0x76616c6964), model_config.graph, users);

  auto validate = [&](EpochLog& log) {
    if (valid_groups.empty()) return;
    const auto scored = score_groups(model, valid_visible.graph, d, valid_groups);
    try {
      log.valid_accuracy = accuracy(scored).accuracy;
    } catch (const UsageError&) {
    }
    try {
      log.valid_auc = auc(scored).auc;
    } catch (const UsageError&) {
    }
  };

  TrainResult result;
  auto record = [&](EpochLog log) {
    if (hooks.on_epoch) hooks.on_epoch(log);
    const bool first = result.log.empty();
    if (first || better(log, result.log[static_cast<std::size_t>(result.best.training.best_epoch)])) {
      result.best.model = model;
      result.best.training = {log.epoch, log.epoch, log.valid_accuracy, log.valid_auc, log.loss, adam.steps()};
    }
    result.log.push_back(std::move(log));
  };

  EpochLog init;
  init.variant = variant;
  validate(init);
  record(init);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    log.variant = variant;
    double loss_sum = 0.0;
    int steps = 0;
    try {
      for (int step = 0; step < config.steps_per_epoch; ++step) {
        const auto salt = mix_seed(config.seed, static_cast<std::uint64_t>(epoch) * 1000003ULL + static_cast<std::uint64_t>(step));
        const auto visible = visible_for(d, d.split.train, config.k, mix_seed(salt, 1), model_config.graph, users);
        const auto groups = sample_supervision(train_groups, visible.included_records, config.supervision_batch,
                                               mix_seed(salt, 2));
        if (groups.empty()) {
          ++log.skipped_batches;
          warn("epoch " + std::to_string(epoch) + ": no supervision group with >= 2 candidates; batch skipped");
          continue;
        }
        if (hooks.on_step) {
          std::vector<std::string> ids;
          for (const auto& g : groups) ids.insert(ids.end(), g.begin(), g.end());
          hooks.on_step(epoch, visible.included_records, ids);
        }
        const auto batch = make_batch(visible.graph, d, groups);
        ad::Tape tape;
        BoundParameters bound(tape, params, true);
        const auto states = hgt_forward(tape, bound, visible.graph, model_config.hgt, Mode::kTrain, salt);
        const auto scores = head_scores(tape, bound, states[static_cast<int>(NodeType::kUser)],
                                        tape.constant(batch.queries), states[static_cast<int>(NodeType::kLlm)],
                                        batch.index, model_config.head, Mode::kTrain, salt);
        const auto loss = loss_fn(tape, scores, batch.ratings, batch.group);
        tape.backward(loss);
        const auto grads = bound.gradients(tape);
        if (!grads.all_finite()) throw RuntimeError("non-finite gradient");
        adam.step(params, grads);
        loss_sum += tape.value(loss)(0, 0);
        ++steps;
      }
      if (steps == 0) throw RuntimeError("all supervision batches skipped");
    } catch (const RuntimeError& e) {
      throw RuntimeError("epoch " + std::to_string(epoch) + ": " + e.what());
    } catch (const UsageError& e) {
      throw UsageError("epoch " + std::to_string(epoch) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    scatter_back(params, model);
    log.loss = loss_sum / steps;
    validate(log);
    record(std::move(log));
  }
  result.best.training.epoch = config.epochs;
  return result;
}

std::string EvalResult::to_json() const {
  json j{{"k", k}, {"history_records", history_records}, {"overall", json::parse(overall.to_json())}};
  if (old_users) j["old_users"] = json::parse(old_users->to_json());
  if (new_users) j["new_users"] = json::parse(new_users->to_json());
  return j.dump(2);
}

std::string EvalResult::to_text() const {
  std::string out = "k = " + std::to_string(k) + "\n[overall]\n" + overall.to_text();
  if (old_users) out += "[old users]\n" + old_users->to_text();
  if (new_users) out += "[new users] few-shot records: " + std::to_string(history_records) + "\n" + new_users->to_text();
  return out;
}

EvalResult evaluate(const Model& model, const DataView& d, const std::set<std::string>& target,
                    const EvalOptions& options) {
  if (options.k < 1) throw UsageError("evaluate: k must be >= 1");
  if (target.empty()) throw DataError("evaluate: the evaluation split is empty");
  const auto users = non_new_users(d);
  const auto base =
      visible_for(d, d.split.train, options.k, mix_seed(options.seed, 0x6576616c), model.config.graph, users);

  std::vector<std::vector<std::string>> old_groups;
  std::map<UserId, std::vector<std::vector<std::string>>> new_groups;
  for (auto& g : ranking_groups(d.store, target)) {
    const auto& user = d.store.record(g.front()).user;
    if (d.split.new_users.contains(user)) {
      new_groups[user].push_back(std::move(g));
    } else {
      old_groups.push_back(std::move(g));
    }
  }

  EvalResult result;
  result.k = options.k;
  const auto old_scored = score_groups(model, base.graph, d, old_groups);
  std::vector<ScoredGroup> new_scored;
  for (auto& [user, groups] : new_groups) {
    Rng rng(mix_seed(options.seed, digest_of(user.value)));
    rng.shuffle(groups.begin(), groups.end());
    std::vector<InteractionRecord> history;
    RatingTable history_ratings;
    std::size_t used = 0;
    while (used < groups.size() && history.size() < static_cast<std::size_t>(options.k)) {
      for (const auto& id : groups[used]) {
        history.push_back(d.store.record(id));
        history_ratings.emplace(id, d.ratings.at(id));
      }
      ++used;
    }
    result.history_records += history.size();
    const std::vector<std::vector<std::string>> rest(groups.begin() + static_cast<std::ptrdiff_t>(used), groups.end());
    if (rest.empty()) continue;
    const auto extended =
        extend_for_user(base, user, history, history_ratings, d.store.llms(), d.encoder, model.config.graph);
    auto scored = score_groups(model, extended.graph, d, rest);
    new_scored.insert(new_scored.end(), std::make_move_iterator(scored.begin()), std::make_move_iterator(scored.end()));
  }

  std::vector<ScoredGroup> all = old_scored;
  all.insert(all.end(), new_scored.begin(), new_scored.end());
  result.overall = make_report(all);
  if (!old_scored.empty() && !new_scored.empty()) result.old_users = make_report(old_scored);
  if (!d.split.new_users.empty()) {
    if (new_scored.empty()) throw DataError("evaluate: new users have no groups left after few-shot history");
    result.new_users = make_report(new_scored);
  }
  return result;
}

}  // namespace graphroute
