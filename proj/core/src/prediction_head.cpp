// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/prediction_head.hpp"

#include <cmath>
#include <string>

#include "graphroute/digest.hpp"
#include "graphroute/error.hpp"

namespace graphroute {

void HeadConfig::validate() const {
  if (hidden < 1 || heads < 1 || hidden % heads != 0) {
    throw UsageError("head: hidden width must be a positive multiple of heads");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("head: dropout must lie in [0, 1)");
}

HeadParams init_head_params(const HeadConfig& config, int state_width, int query_width) {
  config.validate();
  Rng rng(mix_seed(config.seed, 0x4ead));
  HeadParams out;
  auto& ps = out.tensors;
  if (config.kind == HeadKind::kDotProduct) {
    ps.add("head.query_projection", uniform_init(query_width, state_width, rng, query_width));
    return out;
  }
  const int h = config.hidden;
  auto linear = [&](const std::string& name, int in, int outw) {
    ps.add(name + ".weight", uniform_init(in, outw, rng, in));
    ps.add(name + ".bias", bias_init(outw, rng, in));
  };
  linear("head.user", state_width, h);
  linear("head.query", query_width, h);
  linear("head.llm", state_width, h);
  linear("head.fuse", 2 * h, h);
  linear("head.attn.q", h, h);
  linear("head.attn.k", h, h);
  linear("head.attn.v", h, h);
  linear("head.attn.out", h, h);
  linear("head.mlp", 2 * h, h);
  linear("head.score", h, 1);
  return out;
}

namespace {

ad::Var linear(ad::Tape& tape, const BoundParameters& p, ad::Var x, const std::string& name) {
  return tape.add_row(tape.matmul(x, p[name + ".weight"]), p[name + ".bias"]);
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::uint64_t seed) {
  Matrix mask(rows, cols);
  Rng rng(seed);
  const double keep = 1.0 - rate;
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return mask;
}

}  // namespace

ad::Var head_scores(ad::Tape& tape, const BoundParameters& p, ad::Var user_states, ad::Var query_embeddings,
                    ad::Var llm_states, const ScoreBatch& batch, const HeadConfig& config, Mode mode,
                    std::uint64_t epoch) {
  config.validate();
  if (config.zero_user_state) {
    const auto& u = tape.value(user_states);
    user_states = tape.constant(Matrix::Zero(u.rows(), u.cols()));
  }
  if (config.kind == HeadKind::kDotProduct) {
    const auto projected = tape.matmul(query_embeddings, p["head.query_projection"]);
    const auto left = tape.add(tape.gather_rows(user_states, batch.user), tape.gather_rows(projected, batch.query));
    return tape.row_dot(left, tape.gather_rows(llm_states, batch.llm));
  }

  const int h = config.hidden;
  const int dh = h / config.heads;
  // Entity-level projections, gathered per triple afterwards.
  const auto cu_all = linear(tape, p, user_states, "head.user");
  const auto cq_all = linear(tape, p, query_embeddings, "head.query");
  const auto cm_all = linear(tape, p, llm_states, "head.llm");
  const auto ku_all = linear(tape, p, cu_all, "head.attn.k");
  const auto vu_all = linear(tape, p, cu_all, "head.attn.v");
  const auto kq_all = linear(tape, p, cq_all, "head.attn.k");
  const auto vq_all = linear(tape, p, cq_all, "head.attn.v");
  const auto qm_all = linear(tape, p, cm_all, "head.attn.q");

  const auto cu = tape.gather_rows(cu_all, batch.user);
  const auto cq = tape.gather_rows(cq_all, batch.query);
  const auto cm = tape.gather_rows(cm_all, batch.llm);
  const ad::Var uq[] = {cu, cq};
  const auto fused = tape.gelu(linear(tape, p, tape.concat_cols(uq), "head.fuse"));

  const ad::Var keys[] = {tape.gather_rows(ku_all, batch.user), tape.gather_rows(kq_all, batch.query),
                          linear(tape, p, fused, "head.attn.k")};
  const ad::Var values[] = {tape.gather_rows(vu_all, batch.user), tape.gather_rows(vq_all, batch.query),
                            linear(tape, p, fused, "head.attn.v")};
  const auto qm = tape.gather_rows(qm_all, batch.llm);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<ad::Var> contexts;
  for (int hd = 0; hd < config.heads; ++hd) {
    const auto q = tape.slice_cols(qm, hd * dh, dh);
    std::vector<ad::Var> logits;
    for (const auto& k : keys) logits.push_back(tape.scale(tape.row_dot(q, tape.slice_cols(k, hd * dh, dh)), inv_sqrt));
    const auto weights = tape.softmax_rows(tape.concat_cols(logits));
    ad::Var ctx;
    for (int j = 0; j < 3; ++j) {
      const auto term = tape.mul_rows(tape.slice_cols(values[j], hd * dh, dh), tape.slice_cols(weights, j, 1));
      ctx = ctx.valid() ? tape.add(ctx, term) : term;
    }
    contexts.push_back(ctx);
  }
  const auto attended = linear(tape, p, tape.concat_cols(contexts), "head.attn.out");
  const ad::Var mlp_in[] = {attended, cm};
  auto hidden = tape.gelu(linear(tape, p, tape.concat_cols(mlp_in), "head.mlp"));
  if (mode == Mode::kTrain && config.dropout > 0.0) {
    const auto& hv = tape.value(hidden);
    hidden = tape.mul_const(hidden, dropout_mask(hv.rows(), hv.cols(), config.dropout, mix_seed(config.seed ^ 0x4ead, epoch)));
  }
  return linear(tape, p, hidden, "head.score");
}

double predict_score(std::span<const double> user_state, std::span<const double> query_embedding,
                     std::span<const double> llm_state, const HeadParams& head, const HeadConfig& config) {
  auto row = [](std::span<const double> v, const char* what) {
    for (double x : v) {
      if (!std::isfinite(x)) throw RuntimeError(std::string("predict_score: non-finite ") + what);
    }
    Matrix m(1, static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
    return m;
  };
  const auto& tensors = head.tensors;
  const auto& q_weight = tensors.at(config.kind == HeadKind::kDotProduct ? "head.query_projection" : "head.query.weight");
  const Eigen::Index state_w =
      config.kind == HeadKind::kDotProduct ? q_weight.cols() : tensors.at("head.user.weight").rows();
  if (static_cast<Eigen::Index>(query_embedding.size()) != q_weight.rows() ||
      static_cast<Eigen::Index>(user_state.size()) != state_w || static_cast<Eigen::Index>(llm_state.size()) != state_w) {
    throw UsageError("predict_score: input widths do not match the head configuration");
  }
  ad::Tape tape;
  BoundParameters bound(tape, tensors, false);
  const auto u = tape.constant(row(user_state, "user state"));
  const auto q = tape.constant(row(query_embedding, "query embedding"));
  const auto m = tape.constant(row(llm_state, "llm state"));
  const ScoreBatch batch{{0}, {0}, {0}};
  return tape.value(head_scores(tape, bound, u, q, m, batch, config, Mode::kEval))(0, 0);
}

}  // namespace graphroute
