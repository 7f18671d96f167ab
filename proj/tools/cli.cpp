// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "graphroute/checkpoint.hpp"
#include "graphroute/consistency.hpp"
#include "graphroute/error.hpp"
#include "graphroute/feedback_norm.hpp"
#include "graphroute/interaction_store.hpp"
#include "graphroute/synth_data.hpp"
#include "graphroute/text_encoder.hpp"
#include "graphroute/trainer.hpp"
#include "json.hpp"
#include "route_service.hpp"

namespace graphroute::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct StoreOptions {
  std::string records;
  std::string llms;

  void add(CLI::App* app) {
    app->add_option("--records", records, "Interaction history (JSON lines)")->required()->check(CLI::ExistingFile);
    app->add_option("--llms", llms, "LLM catalog sidecar (JSON lines)")->check(CLI::ExistingFile);
  }
  InteractionStore load() const {
    return ingest(records, llms.empty() ? std::nullopt : std::optional<fs::path>(llms));
  }
};

struct EncoderOptions {
  std::string kind = "test";
  int width = 768;
  std::uint64_t seed = 0;
  std::string cache;
  std::string provider_url;

  void add(CLI::App* app, bool shape) {
    if (shape) {
      app->add_option("--encoder", kind, "Text encoder: test (offline, hashed) or external (HTTP provider)")
          ->check(CLI::IsMember({"test", "external"}))
          ->capture_default_str();
      app->add_option("--embedding-width", width, "Embedding width")->check(CLI::Range(8, 1 << 16))->capture_default_str();
      app->add_option("--encoder-seed", seed, "Seed of the test encoder")->capture_default_str();
    }
    app->add_option("--cache", cache, "Embedding cache file")->envname("GRAPHROUTE_CACHE");
    app->add_option("--provider-url", provider_url, "Embedding provider endpoint")->envname("GRAPHROUTE_EMBEDDING_URL");
  }
  std::optional<fs::path> cache_path() const { return cache.empty() ? std::nullopt : std::optional<fs::path>(cache); }
  std::unique_ptr<TextEncoder> make() const {
    EncoderSpec spec;
    spec.kind = kind == "external" ? EncoderKind::kExternal : EncoderKind::kDeterministicTest;
    spec.width = width;
    spec.seed = seed;
    spec.cache_path = cache_path();
    spec.provider_url = provider_url;
    if (spec.kind == EncoderKind::kExternal && provider_url.empty()) {
      throw UsageError("--encoder external needs --provider-url");
    }
    return std::make_unique<TextEncoder>(spec);
  }
};

void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
  } else {
    write_text_file_atomic(path, text.back() == '\n' ? text : text + "\n");
  }
}

SplitRatio parse_ratio(const std::string& text) {
  SplitRatio r;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> r.train >> c1 >> r.valid >> c2 >> r.test) || c1 != ':' || c2 != ':' || !in.eof() || r.train < 0 ||
      r.valid < 0 || r.test < 0 || r.train + r.valid + r.test == 0) {
    throw UsageError("--ratio must look like 7:1:2");
  }
  return r;
}

std::vector<InteractionRecord> read_history(const std::string& path) {
  auto records = parse_records(read_text_file(path), path);
  for (const auto& r : records) validate_record(r);
  return records;
}

// --- synth -----------------------------------------------------------------

struct SynthCommand {
  std::string corpus, weights, llms, out, llms_out, corpus_out, oracle_out, scaling = "standardize";
  bool planted = false;
  PlantedOptions po;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("synth", "Score a response corpus into a multi-user interaction store");
    c->add_option("--corpus", corpus, "Corpus (JSON lines: query, responses[llm, text, quality])")
        ->check(CLI::ExistingFile);
    c->add_option("--weights", weights, "User weight table (JSON)")->check(CLI::ExistingFile);
    c->add_option("--llms", llms, "LLM catalog with price_per_token")->check(CLI::ExistingFile);
    c->add_option("--out", out, "Output interaction store (JSON lines)")->required();
    c->add_option("--llms-out", llms_out, "Write the LLM catalog here");
    c->add_option("--scaling", scaling, "Dataset-level metric scaling")
        ->check(CLI::IsMember({"standardize", "raw"}))
        ->capture_default_str();
    c->add_flag("--planted", planted, "Generate the planted-preference corpus instead of reading one");
    c->add_option("--users", po.n_users, "Planted: users")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--llm-count", po.n_llms, "Planted: LLMs")->check(CLI::Range(2, 1000))->capture_default_str();
    c->add_option("--queries", po.n_queries, "Planted: queries")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--seed", po.seed, "Planted: seed")->capture_default_str();
    c->add_flag("--flip-by-category", po.flip_by_category, "Planted: rare-word leader flips between categories");
    c->add_option("--corpus-out", corpus_out, "Planted: also write the generated corpus");
    c->add_option("--oracle-out", oracle_out, "Planted: write the oracle best-LLM table (JSON)");
  }

  int run(std::ostream& out_stream) const {
    std::vector<CorpusEntry> entries;
    WeightTable table;
    std::vector<LlmInfo> catalog;
    std::optional<PlantedCorpus> pc;
    const auto mode = scaling == "raw" ? MetricScaling::kRaw : MetricScaling::kStandardize;
    if (planted) {
      if (!corpus.empty()) throw UsageError("--planted and --corpus are exclusive");
      auto opts = po;
      if (!weights.empty()) opts.weights = read_weights(weights);
      pc = planted_corpus(opts);
      entries = pc->corpus;
      table = pc->weights;
      catalog = pc->llms;
      if (!corpus_out.empty()) write_corpus(corpus_out, entries);
      if (!oracle_out.empty()) {
        json j;
        for (const auto& [user, row] : pc->oracle) {
          json cells = json::array();
          for (const auto& c : row) cells.push_back(c ? json(c->value) : json());
          j[user] = cells;
        }
        write_text_file_atomic(oracle_out, j.dump(1) + "\n");
      }
    } else {
      if (corpus.empty() || weights.empty()) throw UsageError("synth needs --corpus and --weights (or --planted)");
      if (!llms.empty()) catalog = read_llm_catalog(llms);
      entries = read_corpus(corpus, catalog, RareWordCounter::bundled());
      table = read_weights(weights);
    }
    const auto records = score_corpus(entries, table, mode);
    write_records(out, records);
    if (!llms_out.empty()) {
      std::set<LlmId> seen;
      for (const auto& l : catalog) seen.insert(l.id);
      for (const auto& e : entries) {
        for (const auto& r : e.responses) {
          if (seen.insert(r.llm).second) catalog.push_back({r.llm, "", 0.0});
        }
      }
      write_llm_catalog(llms_out, catalog);
    }
    out_stream << json{{"records", records.size()}, {"users", table.size()}, {"queries", entries.size()}}.dump()
               << '\n';
    return kOk;
  }
};

// --- ingest ----------------------------------------------------------------

struct IngestCommand {
  StoreOptions store;
  EncoderOptions encoder;
  std::string out, ratings_out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("ingest", "Validate an interaction store and derive ratings");
    store.add(c);
    encoder.add(c, true);
    c->add_option("--out", out, "Write the normalized store (ids filled in)");
    c->add_option("--ratings-out", ratings_out, "Write per-turn ratings (JSON)");
  }

  int run(std::ostream& o) const {
    const auto s = store.load();
    std::size_t turns = 0;
    for (const auto& r : s.records()) turns += r.turns.size();
    if (!out.empty()) write_records(out, s.records());
    if (!ratings_out.empty()) {
      const auto enc = encoder.make();
      write_ratings(ratings_out, compute_ratings(s, enc.get()));
    }
    o << json{{"records", s.size()}, {"users", s.users().size()}, {"llms", s.llms().size()}, {"turns", turns}}.dump()
      << '\n';
    return kOk;
  }
};

// --- split -----------------------------------------------------------------

struct SplitCommand {
  StoreOptions store;
  std::string out, ratio = "7:1:2";
  double new_user_fraction = 0.0;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("split", "Deterministic per-user train/valid/test split");
    store.add(c);
    c->add_option("--out", out, "Split file (JSON)")->required();
    c->add_option("--ratio", ratio, "train:valid:test")->capture_default_str();
    c->add_option("--new-user-fraction", new_user_fraction, "Share of users held out entirely (test only)")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    c->add_option("--seed", seed, "Split seed")->capture_default_str();
  }

  int run(std::ostream& o) const {
    const auto s = store.load();
    const auto sp = split(s, parse_ratio(ratio), new_user_fraction, seed);
    write_split(out, sp);
    o << json{{"train", sp.train.size()},
              {"valid", sp.valid.size()},
              {"test", sp.test.size()},
              {"new_users", sp.new_users.size()}}
             .dump()
      << '\n';
    return kOk;
  }
};

// --- train -----------------------------------------------------------------

struct TrainCommand {
  StoreOptions store;
  EncoderOptions encoder;
  std::string split_path, checkpoint, log_path;
  TrainConfig tc;
  std::optional<double> score_min, score_max;
  bool quiet = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("train", "Train the router and keep the best validation checkpoint");
    store.add(c);
    encoder.add(c, true);
    c->add_option("--split", split_path, "Split file")->required()->check(CLI::ExistingFile);
    c->add_option("--checkpoint", checkpoint, "Output checkpoint")->required();
    c->add_option("--log", log_path, "Training log (JSON lines, one per epoch)");
    c->add_option("--epochs", tc.epochs, "Epochs")->check(CLI::NonNegativeNumber)->capture_default_str();
    c->add_option("--lr", tc.learning_rate, "Learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--k", tc.k, "Visible records per user, e.g. 3, 5, 8, 10, 15, 20")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c->add_option("--supervision-batch", tc.supervision_batch, "Supervision triples per step")
        ->check(CLI::Range(2, 1 << 24))
        ->capture_default_str();
    c->add_option("--steps-per-epoch", tc.steps_per_epoch, "Optimizer steps per epoch")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c->add_option("--temperature", tc.temperature, "Rating softmax temperature")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c->add_option("--seed", tc.seed, "Training seed")->capture_default_str();
    c->add_option("--hidden", tc.hidden, "Encoder width d")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--layers", tc.layers, "Encoder layers")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--heads", tc.heads, "Encoder attention heads")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--head-hidden", tc.head_hidden, "Prediction head width")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--head-heads", tc.head_heads, "Prediction head attention heads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c->add_option("--dropout", tc.dropout, "Dropout rate")->check(CLI::Range(0.0, 0.99))->capture_default_str();
    c->add_option("--preference-width", tc.preference_width, "Preference feature width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c->add_flag("--no-preference-feature", tc.ablations.no_preference_feature, "Ablation: zero h_p");
    c->add_flag("--dot-product-head", tc.ablations.dot_product_head, "Ablation: dot-product prediction head");
    c->add_flag("--homogeneous-backbone", tc.ablations.homogeneous_backbone, "Ablation: shared mean-aggregation GNN");
    c->add_flag("--no-user-embedding", tc.ablations.no_user_embedding, "Ablation: zero user state in the head");
    c->add_option("--score-min", score_min, "Lower end of the scalar score scale (default: observed)");
    c->add_option("--score-max", score_max, "Upper end of the scalar score scale (default: observed)");
    c->add_flag("--quiet", quiet, "No per-epoch progress on stderr");
  }

  int run(std::ostream& o, std::ostream& err) const {
    if (score_min.has_value() != score_max.has_value()) throw UsageError("--score-min and --score-max go together");
    tc.validate();
    const auto s = store.load();
    const auto sp = read_split(split_path);
    const auto enc = encoder.make();
    const auto range = score_min ? std::optional<ScoreRange>(ScoreRange{*score_min, *score_max}) : std::nullopt;
    const auto ratings = compute_ratings(s, enc.get(), range);
    std::ofstream log_file;
    if (!log_path.empty()) {
      log_file.open(log_path, std::ios::trunc);
      if (!log_file) throw RuntimeError("cannot write " + log_path);
    }
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochLog& e) {
      if (log_file.is_open()) log_file << e.to_json() << '\n' << std::flush;
      if (!quiet && (e.epoch % 10 == 0 || e.epoch == tc.epochs)) err << e.to_json() << '\n';
    };
    hooks.warn = [&](const std::string& m) { err << "warning: " << m << '\n'; };
    const DataView view{s, sp, ratings, *enc};
    const auto result = train(view, tc, hooks);
    save_checkpoint(result.best, checkpoint);
    enc->flush();
    const auto& t = result.best.training;
    o << json{{"checkpoint", checkpoint},
              {"best_epoch", t.best_epoch},
              {"valid_auc", t.valid_auc ? json(*t.valid_auc) : json()},
              {"valid_accuracy", t.valid_accuracy ? json(*t.valid_accuracy) : json()},
              {"variant", result.best.model.config.variant_name()},
              {"config_digest", to_hex(result.best.model.config.digest())}}
             .dump()
      << '\n';
    return kOk;
  }
};

// --- eval ------------------------------------------------------------------

struct EvalCommand {
  StoreOptions store;
  EncoderOptions encoder;
  std::string split_path, checkpoint, out, out_dir, set = "test";
  int k = 10;
  std::uint64_t seed = 0;
  bool sweep = false, text = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("eval", "Accuracy and AUC on a split, overall and for new users");
    store.add(c);
    encoder.add(c, false);
    c->add_option("--split", split_path, "Split file")->required();
    c->add_option("--checkpoint", checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
    c->add_option("--set", set, "Which split part to score")->check(CLI::IsMember({"test", "valid"}))->capture_default_str();
    c->add_option("--k", k, "Visible / few-shot records per user")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--seed", seed, "Sampling seed")->capture_default_str();
    c->add_option("--out", out, "Report file (JSON); stdout when absent");
    c->add_flag("--k-sweep", sweep, "Evaluate k in {3,5,8,10,15,20}, one report per k");
    c->add_option("--out-dir", out_dir, "Directory for k-sweep reports");
    c->add_flag("--text", text, "Print aligned text tables instead of JSON");
  }

  int run(std::ostream& o) const {
    const auto s = store.load();
    if (!fs::exists(split_path)) throw DataError("split file not found: " + split_path);
    const auto sp = read_split(split_path);
    const auto ck = load_checkpoint(checkpoint);
    const auto enc = encoder_for(ck.model.config, encoder.cache_path(), encoder.provider_url);
    const auto ratings = compute_ratings(s, enc.get());
    const DataView view{s, sp, ratings, *enc};
    const auto& target = set == "test" ? sp.test : sp.valid;
    if (!sweep) {
      const auto r = evaluate(ck.model, view, target, {k, seed});
      write_or_print(out, text ? r.to_text() : r.to_json(), o);
      return kOk;
    }
    if (out_dir.empty()) throw UsageError("--k-sweep needs --out-dir");
    fs::create_directories(out_dir);
    json summary = json::array();
    for (int kk : kSweepK) {
      const auto r = evaluate(ck.model, view, target, {kk, seed});
      const auto path = fs::path(out_dir) / ("eval_k" + std::to_string(kk) + ".json");
      write_text_file_atomic(path, r.to_json() + "\n");
      json row{{"k", kk}, {"accuracy", r.overall.accuracy}, {"auc", r.overall.auc}, {"report", path.string()}};
      if (r.new_users) row["new_users_accuracy"] = r.new_users->accuracy;
      summary.push_back(row);
    }
    o << summary.dump(2) << '\n';
    return kOk;
  }
};

// --- route -----------------------------------------------------------------

struct RouteCommand {
  StoreOptions store;
  EncoderOptions encoder;
  std::string checkpoint, split_path, user, query, history;
  std::vector<std::string> candidates;
  int k = 10;
  std::uint64_t seed = 0;
  CLI::Option* candidates_opt = nullptr;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("route", "Pick the LLM for one (user, query)");
    store.add(c);
    encoder.add(c, false);
    c->add_option("--checkpoint", checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
    c->add_option("--split", split_path, "Split file; only train records are visible")->check(CLI::ExistingFile);
    c->add_option("--user", user, "User id")->required();
    c->add_option("--query", query, "Query text")->required();
    c->add_option("--history", history, "Few-shot records for a cold-start user (JSON lines)")->check(CLI::ExistingFile);
    candidates_opt = c->add_option("--candidates", candidates, "Comma-separated LLM ids (default: all)")->delimiter(',');
    c->add_option("--k", k, "Visible records per user")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--seed", seed, "Sampling seed")->capture_default_str();
  }

  int run(std::ostream& o) const {
    std::vector<LlmId> ids;
    for (const auto& c : candidates) {
      if (!c.empty()) ids.push_back(LlmId{c});
    }
    if (candidates_opt->count() > 0 && ids.empty()) throw UsageError("empty candidate set");
    RoutingInputs in;
    in.checkpoint = checkpoint;
    in.records = store.records;
    if (!store.llms.empty()) in.llms = store.llms;
    if (!split_path.empty()) in.split = split_path;
    in.k = k;
    in.seed = seed;
    in.cache = encoder.cache_path();
    in.provider_url = encoder.provider_url;
    const RoutingContext ctx(in);
    const auto hist = history.empty() ? std::vector<InteractionRecord>{} : read_history(history);
    if (hist.empty() && ctx.router().visible().graph.user_node(UserId{user}) < 0) {
      throw UsageError("unknown user '" + user + "': pass --history with few-shot records (e.g. 10) for this user");
    }
    o << routing_json(ctx.rank(UserId{user}, query, ids, hist)) << '\n';
    return kOk;
  }
};

// --- serve -----------------------------------------------------------------

struct ServeCommand {
  StoreOptions store;
  EncoderOptions encoder;
  std::string checkpoint, split_path, bind = "127.0.0.1:8080";
  int k = 10;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("serve", "HTTP routing endpoint: POST /route, GET /health");
    store.add(c);
    encoder.add(c, false);
    c->add_option("--checkpoint", checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
    c->add_option("--split", split_path, "Split file; only train records are visible")->check(CLI::ExistingFile);
    c->add_option("--bind", bind, "host:port")->envname("GRAPHROUTE_BIND")->capture_default_str();
    c->add_option("--k", k, "Visible records per user")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--seed", seed, "Sampling seed")->capture_default_str();
  }

  int run(std::ostream& err) const {
    const auto [host, port] = parse_bind(bind);
    RoutingInputs in;
    in.checkpoint = checkpoint;
    in.records = store.records;
    if (!store.llms.empty()) in.llms = store.llms;
    if (!split_path.empty()) in.split = split_path;
    in.k = k;
    in.seed = seed;
    in.cache = encoder.cache_path();
    in.provider_url = encoder.provider_url;
    const RoutingContext ctx(in);
    const RouteService service(ctx, err);
    run_server(service, host, port, err);
    return kOk;
  }
};

// --- analyze-consistency ---------------------------------------------------

struct ConsistencyCommand {
  StoreOptions store;
  EncoderOptions encoder;
  ConsistencyOptions opts;
  std::string out, heatmap;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("analyze-consistency", "Self / global / cluster Spearman of per-user win rates");
    store.add(c);
    encoder.add(c, true);
    c->add_option("--clusters", opts.clusters, "k-means clusters")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--seed", opts.seed, "Half-split and clustering seed")->capture_default_str();
    c->add_option("--min-records", opts.min_records_per_half, "Minimum records per half")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c->add_option("--out", out, "Report (JSON)");
    c->add_option("--heatmap", heatmap, "User x LLM win-rate matrix (CSV)");
  }

  int run(std::ostream& o) const {
    const auto s = store.load();
    const auto enc = encoder.make();
    const auto report = consistency_report(s, *enc, opts);
    if (!out.empty()) write_text_file_atomic(out, report.to_json() + "\n");
    if (!heatmap.empty()) write_text_file_atomic(heatmap, report.heatmap_csv());
    o << report.to_text();
    return kOk;
  }
};

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"graphroute: personalized LLM routing over interaction graphs"};
  // CLI11 reads config files only on the top-level app; fallthrough lets
  // "graphroute train --config f.toml" reach it. Keys live in [train] etc.
  app.set_config("--config", "", "TOML config with one [subcommand] section per command")
      ->check(CLI::ExistingFile);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", "graphroute 0.1.0");

  SynthCommand synth;
  IngestCommand ingest_cmd;
  SplitCommand split_cmd;
  TrainCommand train_cmd;
  EvalCommand eval;
  RouteCommand route_cmd;
  ServeCommand serve;
  ConsistencyCommand consistency;
  synth.add(app);
  ingest_cmd.add(app);
  split_cmd.add(app);
  train_cmd.add(app);
  eval.add(app);
  route_cmd.add(app);
  serve.add(app);
  consistency.add(app);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (name == "synth") return synth.run(out);
    if (name == "ingest") return ingest_cmd.run(out);
    if (name == "split") return split_cmd.run(out);
    if (name == "train") return train_cmd.run(out, err);
    if (name == "eval") return eval.run(out);
    if (name == "route") return route_cmd.run(out);
    if (name == "serve") return serve.run(err);
    if (name == "analyze-consistency") return consistency.run(out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kRuntime;
  }
  err << "error: unknown command " << name << '\n';
  return kUsage;
}

}  // namespace graphroute::cli
