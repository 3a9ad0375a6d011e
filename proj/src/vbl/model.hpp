/*
 * Copyright 2026 The vbilstm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vbl/data.hpp"
#include "vbl/tensor.hpp"

namespace vbl {

/// Architecture of a variational Bi-LSTM.
struct ModelConfig {
  Modality modality = Modality::kDiscrete;
  std::size_t input_dim = 0;  // vocabulary size (discrete) or frame dimension
  std::size_t hidden = 32;    // forward LSTM units
  std::size_t backward_hidden = 32;
  std::size_t latent = 8;
  std::size_t mlp_hidden = 32;
  double sigma_min = 1e-4;
  double leaky_slope = 0.01;

  /// Width of the output heads: logits (discrete/binary) or [mu, pre-sigma].
  std::size_t head_dim() const;
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Parameter groups by name prefix. The inference path uses only
/// `fwd`, `prior`, `dec_b` and `head_f`.
namespace groups {
inline constexpr std::string_view kForward = "fwd";
inline constexpr std::string_view kBackward = "bwd";
inline constexpr std::string_view kEncoder = "enc";
inline constexpr std::string_view kPrior = "prior";
inline constexpr std::string_view kDecodeB = "dec_b";
inline constexpr std::string_view kDecodeH = "dec_h";
inline constexpr std::string_view kHeadForward = "head_f";
inline constexpr std::string_view kHeadBackward = "head_b";
}  // namespace groups

/// Named tensors in a fixed insertion order.
class ParamStore {
 public:
  void add(std::string name, Tensor value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  /// Removes every tensor named `<group>.*`; returns how many were removed.
  std::size_t erase_group(std::string_view group);

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t numel() const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const noexcept { return entries_; }
  std::vector<std::pair<std::string, Tensor>>& entries() noexcept { return entries_; }

  /// Order-sensitive FNV-1a hash of names and value bits.
  std::uint64_t checksum() const;

 private:
  void reindex();

  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Lazily places parameters on a tape. Every lookup is recorded so callers
/// can see exactly which tensors a computation touched.
class BoundParams {
 public:
  BoundParams(const ParamStore& store, Tape& tape, bool trainable)
      : store_(&store), tape_(&tape), trainable_(trainable) {}

  Var operator[](const std::string& name);
  const std::map<std::string, Var>& bound() const noexcept { return bound_; }
  std::set<std::string> touched_groups() const;
  Tape& tape() const { return *tape_; }

 private:
  const ParamStore* store_;
  Tape* tape_;
  bool trainable_;
  std::map<std::string, Var> bound_;
};

struct Model {
  ModelConfig config;
  ParamStore params;

  /// Fresh parameters: uniform(+-1/sqrt(fan_in)) input, latent and MLP
  /// matrices, orthogonal recurrent blocks, zero biases, forget bias +1.
  static Model init(const ModelConfig& config, std::uint64_t seed);
};

/// Modified Gram-Schmidt orthogonalization of a random Gaussian matrix.
Tensor random_orthogonal(std::size_t n, std::uint64_t seed);

}  // namespace vbl
