// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/parameters.hpp"

#include <cmath>
#include <span>

#include "graphroute/error.hpp"

namespace graphroute {

void ParameterSet::add(std::string name, Matrix value) {
  if (index_.contains(name)) throw UsageError("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{std::move(name), std::move(value)});
}

bool ParameterSet::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParameterSet::index_of(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

const Matrix& ParameterSet::at(std::string_view name) const { return entries_[index_of(name)].value; }

Matrix& ParameterSet::at(std::string_view name) { return entries_[index_of(name)].value; }

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

std::uint64_t ParameterSet::digest() const {
  Digest d;
  for (const auto& e : entries_) {
    d.update(e.name).update(static_cast<std::uint64_t>(e.value.rows())).update(static_cast<std::uint64_t>(e.value.cols()));
    d.update(std::span<const double>(e.value.data(), static_cast<std::size_t>(e.value.size())));
  }
  return d.value();
}

std::uint64_t ParameterSet::schema_digest() const {
  Digest d;
  for (const auto& e : entries_) {
    d.update(e.name).update(static_cast<std::uint64_t>(e.value.rows())).update(static_cast<std::uint64_t>(e.value.cols()));
  }
  return d.value();
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& e : entries_) out.add(e.name, Matrix::Zero(e.value.rows(), e.value.cols()));
  return out;
}

bool ParameterSet::all_finite() const {
  for (const auto& e : entries_) {
    if (!e.value.allFinite()) return false;
  }
  return true;
}

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Rng& rng, double fan_in) {
  const double bound = std::sqrt(3.0 / std::max(1.0, fan_in));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

Matrix bias_init(Eigen::Index cols, Rng& rng, double fan_in) {
  const double bound = 1.0 / std::sqrt(std::max(1.0, fan_in));
  Matrix m(1, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

BoundParameters::BoundParameters(ad::Tape& tape, const ParameterSet& params, bool track_gradients)
    : params_(&params) {
  vars_.reserve(params.tensor_count());
  for (const auto& e : params.entries()) {
    vars_.push_back(track_gradients ? tape.parameter(e.value) : tape.constant(e.value));
  }
}

ad::Var BoundParameters::operator[](std::string_view name) const { return vars_[params_->index_of(name)]; }

ParameterSet BoundParameters::gradients(const ad::Tape& tape) const {
  ParameterSet out;
  for (std::size_t i = 0; i < vars_.size(); ++i) out.add(params_->entries()[i].name, tape.grad(vars_[i]));
  return out;
}

Adam::Adam(const ParameterSet& like, AdamConfig config)
    : config_(config), m_(like.zeros_like()), v_(like.zeros_like()) {}

void Adam::step(ParameterSet& params, const ParameterSet& grads) {
  if (params.tensor_count() != grads.tensor_count()) throw UsageError("adam: gradient roster mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    auto& p = params.entries()[i].value;
    const auto& g = grads.entries()[i].value;
    auto& m = m_.entries()[i].value;
    auto& v = v_.entries()[i].value;
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    p.array() -= config_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.epsilon);
  }
}

}  // namespace graphroute
