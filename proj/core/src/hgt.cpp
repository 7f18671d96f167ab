// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/hgt.hpp"

#include <cmath>
#include <string>

#include "graphroute/digest.hpp"
#include "graphroute/error.hpp"

namespace graphroute {

namespace {

std::string type_name(NodeType t) { return std::string(node_type_name(t)); }

std::string layer_prefix(int layer) { return "hgt.l" + std::to_string(layer) + "."; }

std::string rel_prefix(int layer, const RelationInfo& rel, int head) {
  return layer_prefix(layer) + std::string(rel.name) + ".h" + std::to_string(head) + ".";
}

// Inverted-dropout mask scaled by 1/keep, with rows of isolated nodes zeroed.
Matrix update_mask(Eigen::Index rows, Eigen::Index cols, const std::vector<bool>& has_input, const HgtConfig& config,
                   Mode mode, std::uint64_t epoch, int layer, int type) {
  Matrix mask = Matrix::Ones(rows, cols);
  if (mode == Mode::kTrain && config.dropout > 0.0) {
    Rng rng(mix_seed(mix_seed(mix_seed(config.seed, epoch), static_cast<std::uint64_t>(layer)), static_cast<std::uint64_t>(type)));
    const double keep = 1.0 - config.dropout;
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!has_input[static_cast<std::size_t>(r)]) mask.row(r).setZero();
  }
  return mask;
}

void check_finite(const ad::Tape& tape, ad::Var v, int layer) {
  if (!tape.value(v).allFinite()) {
    throw RuntimeError("non-finite node state at encoder layer " + std::to_string(layer));
  }
}

std::array<std::vector<bool>, kNodeTypeCount> nodes_with_input(const HeteroGraph& graph) {
  std::array<std::vector<bool>, kNodeTypeCount> out;
  for (auto t : kNodeTypes) out[static_cast<int>(t)].assign(static_cast<std::size_t>(graph.count(t)), false);
  for (const auto& rel : relation_schema()) {
    for (int dst : graph.edge_list(rel.relation).target) {
      out[static_cast<int>(rel.target)][static_cast<std::size_t>(dst)] = true;
    }
  }
  return out;
}

std::array<ad::Var, kNodeTypeCount> heterogeneous_layer(ad::Tape& tape, const BoundParameters& p,
                                                        const HeteroGraph& graph, const HgtConfig& config,
                                                        const std::array<ad::Var, kNodeTypeCount>& h,
                                                        const std::array<std::vector<bool>, kNodeTypeCount>& has_input,
                                                        Mode mode, std::uint64_t epoch, int layer) {
  const int dk = config.head_width();
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  std::array<ad::Var, kNodeTypeCount> out;
  for (auto t : kNodeTypes) {
    const int ti = static_cast<int>(t);
    const int n_t = graph.count(t);
    std::vector<ad::Var> head_outputs;
    bool any_edges = false;
    for (int hd = 0; hd < config.heads; ++hd) {
      std::vector<ad::Var> scores;
      std::vector<ad::Var> messages;
      std::vector<int> segment;
      for (const auto& rel : relation_schema()) {
        if (rel.target != t) continue;
        const auto& e = graph.edge_list(rel.relation);
        if (e.size() == 0) continue;
        const std::string pre = rel_prefix(layer, rel, hd);
        const auto src = tape.slice_cols(h[static_cast<int>(rel.source)], hd * dk, dk);
        const auto dst = tape.slice_cols(h[ti], hd * dk, dk);
        const auto key = tape.gather_rows(tape.matmul(src, p[pre + "key"]), e.source);
        const auto query = tape.gather_rows(tape.matmul(dst, p[pre + "query"]), e.target);
        const auto prior = tape.slice_cols(p[layer_prefix(layer) + std::string(rel.name) + ".prior"], hd, 1);
        scores.push_back(tape.mul_scalar(tape.scale(tape.row_dot(key, query), inv_sqrt_dk), prior));
        const auto value = tape.matmul(tape.matmul(src, p[pre + "value"]), p[pre + "message"]);
        messages.push_back(tape.gather_rows(value, e.source));
        segment.insert(segment.end(), e.target.begin(), e.target.end());
      }
      if (scores.empty()) break;
      any_edges = true;
      const auto attention = tape.segment_softmax(tape.concat_rows(scores), segment, n_t);
      const auto weighted = tape.mul_rows(tape.concat_rows(messages), attention);
      head_outputs.push_back(tape.scatter_add_rows(weighted, segment, n_t));
    }
    const std::string tp = layer_prefix(layer) + type_name(t) + ".";
    ad::Var pre_norm = h[ti];
    if (any_edges) {
      const auto aggregated = tape.concat_cols(head_outputs);
      const auto update = tape.add_row(tape.matmul(tape.gelu(aggregated), p[tp + "out.weight"]), p[tp + "out.bias"]);
      const auto mask = update_mask(n_t, config.hidden, has_input[ti], config, mode, epoch, layer, ti);
      const auto dropped = tape.mul_const(update, mask);
      pre_norm = config.residual ? tape.add(dropped, h[ti]) : dropped;
    }
    out[ti] = tape.layer_norm(pre_norm, p[tp + "norm.gamma"], p[tp + "norm.beta"]);
  }
  return out;
}

std::array<ad::Var, kNodeTypeCount> homogeneous_layer(ad::Tape& tape, const BoundParameters& p,
                                                      const HeteroGraph& graph, const HgtConfig& config,
                                                      const std::array<ad::Var, kNodeTypeCount>& h,
                                                      const std::vector<bool>& has_input, Mode mode,
                                                      std::uint64_t epoch, int layer) {
  std::array<int, kNodeTypeCount> offset{};
  int total = 0;
  for (auto t : kNodeTypes) {
    offset[static_cast<int>(t)] = total;
    total += graph.count(t);
  }
  std::vector<int> src, dst;
  for (const auto& rel : relation_schema()) {
    const auto& e = graph.edge_list(rel.relation);
    for (std::size_t i = 0; i < e.size(); ++i) {
      src.push_back(e.source[i] + offset[static_cast<int>(rel.source)]);
      dst.push_back(e.target[i] + offset[static_cast<int>(rel.target)]);
    }
  }
  const auto all = tape.concat_rows(std::vector<ad::Var>(h.begin(), h.end()));
  const std::string lp = layer_prefix(layer);
  ad::Var self_term = tape.matmul(all, p[lp + "sage.self"]);
  ad::Var update;
  if (!src.empty()) {
    std::vector<double> degree(static_cast<std::size_t>(total), 0.0);
    for (int d : dst) degree[static_cast<std::size_t>(d)] += 1.0;
    Matrix inv_degree(total, 1);
    for (int i = 0; i < total; ++i) {
      inv_degree(i, 0) = degree[static_cast<std::size_t>(i)] > 0 ? 1.0 / degree[static_cast<std::size_t>(i)] : 0.0;
    }
    const auto summed = tape.scatter_add_rows(tape.gather_rows(all, src), dst, total);
    const auto mean = tape.mul_rows(summed, tape.constant(std::move(inv_degree)));
    update = tape.add(self_term, tape.matmul(mean, p[lp + "sage.neigh"]));
  } else {
    update = self_term;
  }
  update = tape.gelu(tape.add_row(update, p[lp + "sage.bias"]));
  const auto mask = update_mask(total, config.hidden, has_input, config, mode, epoch, layer, kNodeTypeCount);
  const auto dropped = tape.mul_const(update, mask);
  const auto pre_norm = config.residual ? tape.add(dropped, all) : dropped;
  const auto normed = tape.layer_norm(pre_norm, p[lp + "norm.gamma"], p[lp + "norm.beta"]);
  std::array<ad::Var, kNodeTypeCount> out;
  for (auto t : kNodeTypes) {
    const int ti = static_cast<int>(t);
    std::vector<int> rows(static_cast<std::size_t>(graph.count(t)));
    for (int i = 0; i < graph.count(t); ++i) rows[static_cast<std::size_t>(i)] = offset[ti] + i;
    out[ti] = tape.gather_rows(normed, rows);
  }
  return out;
}

}  // namespace

void HgtConfig::validate() const {
  if (hidden < 1 || heads < 1) throw UsageError("hgt: hidden width and heads must be positive");
  if (hidden % heads != 0) throw UsageError("hgt: hidden width must be divisible by heads");
  if (layers < 1) throw UsageError("hgt: layers must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("hgt: dropout must lie in [0, 1)");
}

HgtSchema HgtSchema::for_graph(const HeteroGraph& graph) {
  HgtSchema s;
  for (auto t : kNodeTypes) s.input_widths[static_cast<int>(t)] = graph.feature_width(t);
  return s;
}

std::uint64_t HgtSchema::digest() const {
  Digest d;
  for (auto t : kNodeTypes) d.update(node_type_name(t)).update(static_cast<std::uint64_t>(input_widths[static_cast<int>(t)]));
  for (const auto& rel : relation_schema()) d.update(rel.name);
  return d.value();
}

HgtParams init_hgt_params(const HgtConfig& config, const HgtSchema& schema) {
  config.validate();
  Rng rng(mix_seed(config.seed, 0x4867));
  const int d = config.hidden;
  const int dk = config.head_width();
  HgtParams out;
  auto& ps = out.tensors;
  for (auto t : kNodeTypes) {
    const int w = schema.input_widths[static_cast<int>(t)];
    if (w < 1) throw UsageError("hgt: input width for " + type_name(t) + " must be positive");
    ps.add("hgt.input." + type_name(t) + ".weight", uniform_init(w, d, rng, w));
    ps.add("hgt.input." + type_name(t) + ".bias", bias_init(d, rng, w));
    ps.add("hgt.input." + type_name(t) + ".norm.gamma", Matrix::Ones(1, d));
    ps.add("hgt.input." + type_name(t) + ".norm.beta", Matrix::Zero(1, d));
  }
  for (int l = 0; l < config.layers; ++l) {
    const std::string lp = layer_prefix(l);
    if (config.backbone == Backbone::kHomogeneousMean) {
      ps.add(lp + "sage.self", uniform_init(d, d, rng, d));
      ps.add(lp + "sage.neigh", uniform_init(d, d, rng, d));
      ps.add(lp + "sage.bias", bias_init(d, rng, d));
      ps.add(lp + "norm.gamma", Matrix::Ones(1, d));
      ps.add(lp + "norm.beta", Matrix::Zero(1, d));
      continue;
    }
    for (const auto& rel : relation_schema()) {
      for (int hd = 0; hd < config.heads; ++hd) {
        const std::string pre = rel_prefix(l, rel, hd);
        for (const char* name : {"key", "query", "value", "message"}) ps.add(pre + name, uniform_init(dk, dk, rng, dk));
      }
      ps.add(lp + std::string(rel.name) + ".prior", Matrix::Ones(1, config.heads));
    }
    for (auto t : kNodeTypes) {
      const std::string tp = lp + type_name(t) + ".";
      ps.add(tp + "out.weight", uniform_init(d, d, rng, d));
      ps.add(tp + "out.bias", bias_init(d, rng, d));
      ps.add(tp + "norm.gamma", Matrix::Ones(1, d));
      ps.add(tp + "norm.beta", Matrix::Zero(1, d));
    }
  }
  return out;
}

std::array<ad::Var, kNodeTypeCount> hgt_forward(ad::Tape& tape, const BoundParameters& params,
                                                const HeteroGraph& graph, const HgtConfig& config, Mode mode,
                                                std::uint64_t epoch) {
  config.validate();
  std::array<ad::Var, kNodeTypeCount> h;
  for (auto t : kNodeTypes) {
    const int ti = static_cast<int>(t);
    const std::string name = "hgt.input." + type_name(t);
    const auto& weight = params.params().at(name + ".weight");
    if (weight.rows() != graph.feature_width(t)) {
      throw UsageError("hgt: " + type_name(t) + " features have width " + std::to_string(graph.feature_width(t)) +
                       ", parameters expect " + std::to_string(weight.rows()));
    }
    const auto x = tape.constant(graph.feature(t));
    // Normalized so every node type enters layer 0 at unit scale.
    h[ti] = tape.layer_norm(tape.add_row(tape.matmul(x, params[name + ".weight"]), params[name + ".bias"]),
                            params[name + ".norm.gamma"], params[name + ".norm.beta"]);
  }
  const auto has_input = nodes_with_input(graph);
  std::vector<bool> has_input_flat;
  if (config.backbone == Backbone::kHomogeneousMean) {
    for (const auto& v : has_input) has_input_flat.insert(has_input_flat.end(), v.begin(), v.end());
  }
  for (int l = 0; l < config.layers; ++l) {
    h = config.backbone == Backbone::kHeterogeneous
            ? heterogeneous_layer(tape, params, graph, config, h, has_input, mode, epoch, l)
            : homogeneous_layer(tape, params, graph, config, h, has_input_flat, mode, epoch, l);
    for (auto v : h) check_finite(tape, v, l);
  }
  return h;
}

NodeStates forward(const HeteroGraph& graph, const HgtParams& params, const HgtConfig& config, Mode mode,
                   std::uint64_t epoch) {
  ad::Tape tape;
  BoundParameters bound(tape, params.tensors, false);
  const auto h = hgt_forward(tape, bound, graph, config, mode, epoch);
  NodeStates out;
  for (int i = 0; i < kNodeTypeCount; ++i) out.states[i] = tape.value(h[i]);
  return out;
}

ParameterSet grad(const ParameterSet& params, const std::function<ad::Var(ad::Tape&, const BoundParameters&)>& loss) {
  ad::Tape tape;
  BoundParameters bound(tape, params, true);
  const auto out = loss(tape, bound);
  const auto& v = tape.value(out);
  if (v.rows() != 1 || v.cols() != 1) throw UsageError("grad: loss must be a scalar");
  if (!std::isfinite(v(0, 0))) throw RuntimeError("grad: non-finite loss");
  tape.backward(out);
  return bound.gradients(tape);
}

}  // namespace graphroute
