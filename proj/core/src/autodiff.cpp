// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "graphroute/error.hpp"

namespace graphroute::ad {

namespace {

void require(bool ok, const char* op, const char* what) {
  if (!ok) throw UsageError(std::string("autodiff ") + op + ": " + what);
}

std::vector<int> copy_index(std::span<const int> index) { return {index.begin(), index.end()}; }

}  // namespace

Var Tape::push(Matrix value, bool needs_grad, Backward backward) {
  nodes_.push_back(Node{std::move(value), Matrix{}, needs_grad, needs_grad ? std::move(backward) : Backward{}});
  return Var{nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
  auto& node = nodes_[v.id];
  if (!node.needs_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

Var Tape::parameter(Matrix value) { return push(std::move(value), true, {}); }

Matrix Tape::grad(Var v) const {
  const auto& node = nodes_[v.id];
  if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::backward(Var out) {
  require(value(out).rows() == 1 && value(out).cols() == 1, "backward", "output must be 1x1");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!needs(out)) return;
  nodes_[out.id].grad = Matrix::Ones(1, 1);
  for (std::size_t i = out.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.needs_grad || !node.backward || node.grad.size() == 0) continue;
    // Copy: the closure may grow other nodes' grads but never this one's.
    const Matrix g = node.grad;
    node.backward(*this, g);
  }
}

Var Tape::matmul(Var a, Var b) {
  require(value(a).cols() == value(b).rows(), "matmul", "inner dimensions differ");
  Matrix out = value(a) * value(b);
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
    if (t.needs(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.needs(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var Tape::add(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add", "shape mismatch");
  return push(value(a) + value(b), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::sub(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "sub", "shape mismatch");
  return push(value(a) - value(b), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs(b)) t.accumulate(b, -g);
  });
}

Var Tape::add_row(Var a, Var row) {
  require(value(row).rows() == 1 && value(row).cols() == value(a).cols(), "add_row", "row shape mismatch");
  Matrix out = value(a).rowwise() + value(row).row(0);
  return push(std::move(out), needs(a) || needs(row), [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, needs(a), [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var Tape::mul_scalar(Var a, Var s) {
  require(value(s).rows() == 1 && value(s).cols() == 1, "mul_scalar", "scalar must be 1x1");
  const double sv = value(s)(0, 0);
  return push(value(a) * sv, needs(a) || needs(s), [a, s](Tape& t, const Matrix& g) {
    if (t.needs(a)) t.accumulate(a, g * t.value(s)(0, 0));
    if (t.needs(s)) {
      Matrix gs(1, 1);
      gs(0, 0) = g.cwiseProduct(t.value(a)).sum();
      t.accumulate(s, gs);
    }
  });
}

Var Tape::mul_const(Var a, const Matrix& c) {
  require(value(a).rows() == c.rows() && value(a).cols() == c.cols(), "mul_const", "shape mismatch");
  return push(value(a).cwiseProduct(c), needs(a), [a, c](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(c));
  });
}

Var Tape::mul_rows(Var a, Var w) {
  require(value(w).cols() == 1 && value(w).rows() == value(a).rows(), "mul_rows", "weight must be n x 1");
  Matrix out = value(a).array().colwise() * value(w).col(0).array();
  return push(std::move(out), needs(a) || needs(w), [a, w](Tape& t, const Matrix& g) {
    if (t.needs(a)) {
      Matrix ga = g.array().colwise() * t.value(w).col(0).array();
      t.accumulate(a, ga);
    }
    if (t.needs(w)) {
      Matrix gw = g.cwiseProduct(t.value(a)).rowwise().sum();
      t.accumulate(w, gw);
    }
  });
}

Var Tape::gelu(Var a) {
  const Matrix& x = value(a);
  Matrix out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); });
  return push(std::move(out), needs(a), [a](Tape& t, const Matrix& g) {
    const Matrix& xv = t.value(a);
    Matrix d = xv.unaryExpr([](double v) {
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      const double pdf = std::exp(-0.5 * v * v) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      return cdf + v * pdf;
    });
    t.accumulate(a, g.cwiseProduct(d));
  });
}

Var Tape::tanh(Var a) {
  Matrix out = value(a).array().tanh().matrix();
  const Var res = push(out, needs(a), {});
  if (needs(a)) {
    nodes_[res.id].backward = [a, res](Tape& t, const Matrix& g) {
      const Matrix& y = t.value(res);
      t.accumulate(a, g.cwiseProduct((1.0 - y.array().square()).matrix()));
    };
  }
  return res;
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Matrix& xv = value(x);
  const auto m = xv.cols();
  require(value(gamma).rows() == 1 && value(gamma).cols() == m, "layer_norm", "gamma must be 1 x m");
  require(value(beta).rows() == 1 && value(beta).cols() == m, "layer_norm", "beta must be 1 x m");
  Matrix xhat(xv.rows(), m);
  Vector inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mean = xv.row(r).mean();
    const double var = (xv.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * value(gamma).row(0).array()).rowwise() + value(beta).row(0).array();
  return push(std::move(out), needs(x) || needs(gamma) || needs(beta),
              [x, gamma, beta, xhat, inv_std](Tape& t, const Matrix& g) {
                if (t.needs(beta)) t.accumulate(beta, g.colwise().sum());
                if (t.needs(gamma)) t.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
                if (t.needs(x)) {
                  const double m = static_cast<double>(xhat.cols());
                  Matrix dxhat = g.array().rowwise() * t.value(gamma).row(0).array();
                  Matrix dx(xhat.rows(), xhat.cols());
                  for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                    const double mean_d = dxhat.row(r).sum() / m;
                    const double mean_dx = dxhat.row(r).dot(xhat.row(r)) / m;
                    dx.row(r) = inv_std(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
                  }
                  t.accumulate(x, dx);
                }
              });
}

Var Tape::gather_rows(Var a, std::span<const int> index) {
  const Matrix& av = value(a);
  Matrix out(static_cast<Eigen::Index>(index.size()), av.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < av.rows(), "gather_rows", "index out of range");
    out.row(static_cast<Eigen::Index>(i)) = av.row(index[i]);
  }
  return push(std::move(out), needs(a), [a, idx = copy_index(index)](Tape& t, const Matrix& g) {
    Matrix ga = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
    for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(a, ga);
  });
}

Var Tape::scatter_add_rows(Var a, std::span<const int> index, int rows) {
  const Matrix& av = value(a);
  require(static_cast<std::size_t>(av.rows()) == index.size(), "scatter_add_rows", "one index per row required");
  Matrix out = Matrix::Zero(rows, av.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < rows, "scatter_add_rows", "index out of range");
    out.row(index[i]) += av.row(static_cast<Eigen::Index>(i));
  }
  return push(std::move(out), needs(a), [a, idx = copy_index(index)](Tape& t, const Matrix& g) {
    Matrix ga(static_cast<Eigen::Index>(idx.size()), g.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) ga.row(static_cast<Eigen::Index>(i)) = g.row(idx[i]);
    t.accumulate(a, ga);
  });
}

Var Tape::row_dot(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "row_dot", "shape mismatch");
  Matrix out = value(a).cwiseProduct(value(b)).rowwise().sum();
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
    if (t.needs(a)) {
      Matrix ga = t.value(b).array().colwise() * g.col(0).array();
      t.accumulate(a, ga);
    }
    if (t.needs(b)) {
      Matrix gb = t.value(a).array().colwise() * g.col(0).array();
      t.accumulate(b, gb);
    }
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const auto rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool any = false;
  for (auto p : parts) {
    require(value(p).rows() == rows, "concat_cols", "row counts differ");
    cols += value(p).cols();
    any = any || needs(p);
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (auto p : parts) {
    out.middleCols(c, value(p).cols()) = value(p);
    c += value(p).cols();
  }
  return push(std::move(out), any, [ps = std::vector<Var>(parts.begin(), parts.end())](Tape& t, const Matrix& g) {
    Eigen::Index c = 0;
    for (auto p : ps) {
      const auto w = t.value(p).cols();
      if (t.needs(p)) t.accumulate(p, g.middleCols(c, w));
      c += w;
    }
  });
}

Var Tape::concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  const auto cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  bool any = false;
  for (auto p : parts) {
    require(value(p).cols() == cols, "concat_rows", "column counts differ");
    rows += value(p).rows();
    any = any || needs(p);
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (auto p : parts) {
    out.middleRows(r, value(p).rows()) = value(p);
    r += value(p).rows();
  }
  return push(std::move(out), any, [ps = std::vector<Var>(parts.begin(), parts.end())](Tape& t, const Matrix& g) {
    Eigen::Index r = 0;
    for (auto p : ps) {
      const auto h = t.value(p).rows();
      if (t.needs(p)) t.accumulate(p, g.middleRows(r, h));
      r += h;
    }
  });
}

Var Tape::slice_cols(Var a, int begin, int count) {
  require(begin >= 0 && count >= 0 && begin + count <= value(a).cols(), "slice_cols", "range out of bounds");
  Matrix out = value(a).middleCols(begin, count);
  return push(std::move(out), needs(a), [a, begin, count](Tape& t, const Matrix& g) {
    Matrix ga = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
    ga.middleCols(begin, count) = g;
    t.accumulate(a, ga);
  });
}

Var Tape::softmax_rows(Var a) {
  const Matrix& x = value(a);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - mx).exp();
    y.row(r) /= y.row(r).sum();
  }
  const Var res = push(y, needs(a), {});
  if (needs(a)) {
    nodes_[res.id].backward = [a, res](Tape& t, const Matrix& g) {
      const Matrix& yv = t.value(res);
      Vector inner = g.cwiseProduct(yv).rowwise().sum();
      Matrix ga = yv.cwiseProduct((g.colwise() - inner));
      t.accumulate(a, ga);
    };
  }
  return res;
}

Var Tape::segment_softmax(Var scores, std::span<const int> segment, int segments) {
  const Matrix& x = value(scores);
  require(x.cols() == 1 && static_cast<std::size_t>(x.rows()) == segment.size(), "segment_softmax",
          "scores must be n x 1 with one segment id per row");
  Vector mx = Vector::Constant(segments, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    require(segment[i] >= 0 && segment[i] < segments, "segment_softmax", "segment id out of range");
    mx(segment[i]) = std::max(mx(segment[i]), x(static_cast<Eigen::Index>(i), 0));
  }
  Matrix y(x.rows(), 1);
  Vector denom = Vector::Zero(segments);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    y(r, 0) = std::exp(x(r, 0) - mx(segment[i]));
    denom(segment[i]) += y(r, 0);
  }
  for (std::size_t i = 0; i < segment.size(); ++i) y(static_cast<Eigen::Index>(i), 0) /= denom(segment[i]);
  const Var res = push(y, needs(scores), {});
  if (needs(scores)) {
    nodes_[res.id].backward = [scores, res, seg = copy_index(segment), segments](Tape& t, const Matrix& g) {
      const Matrix& yv = t.value(res);
      Vector inner = Vector::Zero(segments);
      for (std::size_t i = 0; i < seg.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        inner(seg[i]) += g(r, 0) * yv(r, 0);
      }
      Matrix gx(yv.rows(), 1);
      for (std::size_t i = 0; i < seg.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        gx(r, 0) = yv(r, 0) * (g(r, 0) - inner(seg[i]));
      }
      t.accumulate(scores, gx);
    };
  }
  return res;
}

Var Tape::grouped_cross_entropy(Var scores, std::span<const int> group, int groups, const Matrix& target) {
  const Matrix& x = value(scores);
  require(x.cols() == 1 && static_cast<std::size_t>(x.rows()) == group.size(), "grouped_cross_entropy",
          "scores must be n x 1 with one group id per row");
  require(target.rows() == x.rows() && target.cols() == 1, "grouped_cross_entropy", "target must be n x 1");
  require(groups > 0, "grouped_cross_entropy", "at least one group required");
  Vector mx = Vector::Constant(groups, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < group.size(); ++i) {
    mx(group[i]) = std::max(mx(group[i]), x(static_cast<Eigen::Index>(i), 0));
  }
  Vector denom = Vector::Zero(groups);
  for (std::size_t i = 0; i < group.size(); ++i) {
    denom(group[i]) += std::exp(x(static_cast<Eigen::Index>(i), 0) - mx(group[i]));
  }
  Matrix prob(x.rows(), 1);
  double loss = 0.0;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double log_p = x(r, 0) - mx(group[i]) - std::log(denom(group[i]));
    prob(r, 0) = std::exp(log_p);
    loss -= target(r, 0) * log_p;
  }
  Matrix out(1, 1);
  out(0, 0) = loss / groups;
  return push(std::move(out), needs(scores),
              [scores, prob, target, grp = copy_index(group), groups](Tape& t, const Matrix& g) {
                Vector tsum = Vector::Zero(groups);
                for (std::size_t i = 0; i < grp.size(); ++i) tsum(grp[i]) += target(static_cast<Eigen::Index>(i), 0);
                Matrix gx(prob.rows(), 1);
                for (std::size_t i = 0; i < grp.size(); ++i) {
                  const auto r = static_cast<Eigen::Index>(i);
                  gx(r, 0) = g(0, 0) * (prob(r, 0) * tsum(grp[i]) - target(r, 0)) / groups;
                }
                t.accumulate(scores, gx);
              });
}

Var Tape::sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = value(a).sum();
  return push(std::move(out), needs(a), [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(t.value(a).rows(), t.value(a).cols(), g(0, 0)));
  });
}

}  // namespace graphroute::ad
