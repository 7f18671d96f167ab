// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "graphroute/checkpoint.hpp"
#include "graphroute/feedback_norm.hpp"
#include "graphroute/interaction_store.hpp"
#include "graphroute/router.hpp"
#include "graphroute/text_encoder.hpp"

namespace httplib {
class Server;
}

namespace graphroute::cli {

struct RoutingInputs {
  std::filesystem::path checkpoint;
  std::filesystem::path records;
  std::optional<std::filesystem::path> llms;
  /// When set, only train records are visible; otherwise every record is.
  std::optional<std::filesystem::path> split;
  int k = 10;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> cache;
  std::string provider_url;
};

/// A loaded checkpoint plus the visible subgraph it routes over. Immutable
/// after construction.
class RoutingContext {
 public:
  explicit RoutingContext(const RoutingInputs& inputs);

  const Checkpoint& checkpoint() const { return checkpoint_; }
  const InteractionStore& store() const { return store_; }
  const TextEncoder& encoder() const { return *encoder_; }
  const Router& router() const { return *router_; }

  /// Ratings for few-shot records on the store's score scale.
  RatingTable history_ratings(std::span<const InteractionRecord> history) const;

  /// Routes with optional few-shot history. Throws UsageError for unknown
  /// users without history, unknown LLMs and empty candidate lists.
  std::vector<ScoredCandidate> rank(const UserId& user, const std::string& query,
                                    std::span<const LlmId> candidates,
                                    std::span<const InteractionRecord> history) const;

 private:
  Checkpoint checkpoint_;
  InteractionStore store_;
  std::unique_ptr<TextEncoder> encoder_;
  std::optional<ScoreRange> range_;
  std::unique_ptr<Router> router_;
};

/// Encoder matching what a checkpoint was trained with.
std::unique_ptr<TextEncoder> encoder_for(const ModelConfig& config, const std::optional<std::filesystem::path>& cache,
                                         const std::string& provider_url);

/// `{"model": id, "scores": [{"llm": id, "score": x}, ...]}`
std::string routing_json(const std::vector<ScoredCandidate>& ranked);

struct HttpReply {
  int status = 200;
  std::string body;
};

/// Transport-free request handling for the HTTP endpoint.
class RouteService {
 public:
  RouteService(const RoutingContext& context, std::ostream& log);

  HttpReply health() const;
  /// POST /route body: {"user": str, "query": str, "history": [record]?,
  /// "candidates": [str]?}. 400 names the offending field; 500 carries an
  /// opaque id whose details go to the log.
  HttpReply route(const std::string& body) const;

 private:
  const RoutingContext& context_;
  std::ostream& log_;
  mutable std::atomic<std::uint64_t> errors_{0};
};

/// Registers GET /health and POST /route.
void configure_routes(httplib::Server& server, const RouteService& service);

/// Blocks serving GET /health and POST /route on host:port.
void run_server(const RouteService& service, const std::string& host, int port, std::ostream& log);

/// Splits "host:port"; a bare port binds 127.0.0.1.
std::pair<std::string, int> parse_bind(const std::string& bind);

}  // namespace graphroute::cli
