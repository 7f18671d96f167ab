// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "route_service.hpp"

#include <chrono>
#include <mutex>
#include <ostream>

#include "graphroute/digest.hpp"
#include "graphroute/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace graphroute::cli {

using nlohmann::json;

std::unique_ptr<TextEncoder> encoder_for(const ModelConfig& config, const std::optional<std::filesystem::path>& cache,
                                         const std::string& provider_url) {
  EncoderSpec spec;
  if (config.encoder_kind == "external") {
    spec.kind = EncoderKind::kExternal;
  } else if (config.encoder_kind == "deterministic-test") {
    spec.kind = EncoderKind::kDeterministicTest;
  } else {
    throw DataError("checkpoint names unknown encoder kind '" + config.encoder_kind + "'");
  }
  spec.width = config.embedding_width;
  spec.seed = config.encoder_seed;
  spec.cache_path = cache;
  spec.provider_url = provider_url;
  if (spec.kind == EncoderKind::kExternal && provider_url.empty()) {
    throw UsageError("checkpoint was trained with an external encoder; pass --provider-url");
  }
  return std::make_unique<TextEncoder>(spec);
}

RoutingContext::RoutingContext(const RoutingInputs& in)
    : checkpoint_(load_checkpoint(in.checkpoint)), store_(ingest(in.records, in.llms)) {
  encoder_ = encoder_for(checkpoint_.model.config, in.cache, in.provider_url);
  range_ = observed_score_range(store_.records());
  const auto ratings = compute_ratings(store_, encoder_.get(), range_);
  std::set<std::string> pool;
  if (in.split) {
    pool = read_split(*in.split).train;
  } else {
    for (const auto& r : store_.records()) pool.insert(r.record_id);
  }
  auto visible = sample_visible(store_, pool, in.k, in.seed, *encoder_, ratings, checkpoint_.model.config.graph);
  router_ = std::make_unique<Router>(checkpoint_.model, std::move(visible), *encoder_);
}

RatingTable RoutingContext::history_ratings(std::span<const InteractionRecord> history) const {
  return compute_ratings(history, encoder_.get(), range_ ? range_ : observed_score_range(history));
}

std::vector<ScoredCandidate> RoutingContext::rank(const UserId& user, const std::string& query,
                                                  std::span<const LlmId> candidates,
                                                  std::span<const InteractionRecord> history) const {
  if (history.empty()) return router_->rank(user, query, candidates);
  return router_->rank_with_history(user, query, candidates, history, history_ratings(history), store_.llms());
}

std::string routing_json(const std::vector<ScoredCandidate>& ranked) {
  json scores = json::array();
  for (const auto& c : ranked) scores.push_back({{"llm", c.llm.value}, {"score", c.score}});
  return json{{"model", ranked.front().llm.value}, {"scores", scores}}.dump();
}

RouteService::RouteService(const RoutingContext& context, std::ostream& log) : context_(context), log_(log) {}

HttpReply RouteService::health() const { return {200, R"({"status":"ok"})"}; }

namespace {

HttpReply bad_request(const std::string& field, const std::string& message) {
  return {400, json{{"error", message}, {"field", field}}.dump()};
}

std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

HttpReply RouteService::route(const std::string& body) const {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::parse_error&) {
    return bad_request("body", "request body is not valid JSON");
  }
  if (!req.is_object()) return bad_request("body", "request body must be a JSON object");
  for (const auto& [key, _] : req.items()) {
    if (key != "user" && key != "query" && key != "history" && key != "candidates") {
      return bad_request(key, "unknown field '" + key + "'");
    }
  }
  if (!req.contains("user") || !req["user"].is_string() || req["user"].get<std::string>().empty()) {
    return bad_request("user", "field 'user' must be a non-empty string");
  }
  if (!req.contains("query") || !req["query"].is_string()) {
    return bad_request("query", "field 'query' must be a string");
  }
  const UserId user{req["user"].get<std::string>()};

  std::vector<LlmId> candidates;
  if (req.contains("candidates")) {
    const auto& c = req["candidates"];
    if (!c.is_array() || c.empty()) return bad_request("candidates", "field 'candidates' must be a non-empty array");
    for (const auto& x : c) {
      if (!x.is_string()) return bad_request("candidates", "field 'candidates' must hold strings");
      const LlmId id{x.get<std::string>()};
      if (context_.store().find_llm(id) == nullptr) {
        return bad_request("candidates", "unknown llm '" + id.value + "'");
      }
      candidates.push_back(id);
    }
  }

  std::vector<InteractionRecord> history;
  if (req.contains("history")) {
    const auto& h = req["history"];
    if (!h.is_array()) return bad_request("history", "field 'history' must be an array of records");
    std::string jsonl;
    for (const auto& rec : h) jsonl += rec.dump() + "\n";
    try {
      history = parse_records(jsonl, "history");
      for (const auto& rec : history) {
        validate_record(rec);
        if (rec.user != user) throw DataError("record '" + rec.record_id + "' belongs to another user");
        if (context_.store().find_llm(rec.llm) == nullptr) {
          throw DataError("record '" + rec.record_id + "': unknown llm '" + rec.llm.value + "'");
        }
      }
    } catch (const Error& e) {
      return bad_request("history", e.what());
    }
  }

  try {
    const auto ranked = context_.rank(user, req["query"].get<std::string>(), candidates, history);
    return {200, routing_json(ranked)};
  } catch (const UsageError& e) {
    const std::string what = e.what();
    const std::string field = what.find("llm") != std::string::npos ? "candidates" : "user";
    return bad_request(field, what);
  } catch (const DataError& e) {
    return bad_request("history", e.what());
  } catch (const std::exception& e) {
    const auto n = errors_.fetch_add(1);
    const auto stamp = static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
    const auto id = to_hex(mix_seed(stamp, n));
    {
      std::lock_guard lock(log_mutex());
      log_ << "error " << id << ": " << e.what() << std::endl;
    }
    return {500, json{{"error", "internal error"}, {"id", id}}.dump()};
  }
}

std::pair<std::string, int> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  const std::string host = colon == std::string::npos ? "127.0.0.1" : bind.substr(0, colon);
  const std::string port_text = colon == std::string::npos ? bind : bind.substr(colon + 1);
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    throw UsageError("bind address '" + bind + "' must be host:port");
  }
  if (port < 0 || port > 65535) throw UsageError("bind port out of range: " + port_text);
  return {host.empty() ? "127.0.0.1" : host, port};
}

void configure_routes(httplib::Server& server, const RouteService& service) {
  auto reply = [](httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Get("/health", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.health());
  });
  server.Post("/route", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.route(req.body));
  });
}

void run_server(const RouteService& service, const std::string& host, int port, std::ostream& log) {
  httplib::Server server;
  configure_routes(server, service);
  if (!server.bind_to_port(host, port)) throw RuntimeError("cannot bind " + host + ":" + std::to_string(port));
  {
    std::lock_guard lock(log_mutex());
    log << "listening on " << host << ":" << port << std::endl;
  }
  if (!server.listen_after_bind()) throw RuntimeError("server stopped unexpectedly");
}

}  // namespace graphroute::cli
