// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "graphroute/autodiff.hpp"
#include "graphroute/digest.hpp"
#include "graphroute/tensor.hpp"

namespace graphroute {

/// Ordered collection of named tensors. The roster (names and shapes) is the
/// serialized identity of a model; insertion order is preserved.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Matrix value;
  };

  void add(std::string name, Matrix value);
  bool contains(std::string_view name) const;
  const Matrix& at(std::string_view name) const;
  Matrix& at(std::string_view name);
  std::size_t index_of(std::string_view name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t tensor_count() const { return entries_.size(); }
  std::size_t scalar_count() const;
  bool empty() const { return entries_.empty(); }

  /// Digest over the roster plus the bit patterns of values.
  std::uint64_t digest() const;
  /// Digest over names and shapes only.
  std::uint64_t schema_digest() const;

  /// Same roster, all zeros.
  ParameterSet zeros_like() const;
  bool all_finite() const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// U(-sqrt(3/fan_in), sqrt(3/fan_in)): unit-variance inputs keep unit
/// variance through the product. fan_in is rows for 2-D weights.
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Rng& rng, double fan_in);
/// 1 x cols row from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Matrix bias_init(Eigen::Index cols, Rng& rng, double fan_in);

/// Parameters recorded on a tape, addressable by name.
class BoundParameters {
 public:
  BoundParameters(ad::Tape& tape, const ParameterSet& params, bool track_gradients);
  ad::Var operator[](std::string_view name) const;
  const ParameterSet& params() const { return *params_; }
  /// Collects gradients for every tensor after tape.backward().
  ParameterSet gradients(const ad::Tape& tape) const;

 private:
  const ParameterSet* params_;
  std::vector<ad::Var> vars_;
};

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First-order adaptive moment estimation; no weight decay, no schedule.
class Adam {
 public:
  Adam(const ParameterSet& like, AdamConfig config);
  void step(ParameterSet& params, const ParameterSet& grads);
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  ParameterSet m_;
  ParameterSet v_;
  long t_ = 0;
};

}  // namespace graphroute
