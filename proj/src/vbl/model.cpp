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

#include "vbl/model.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "vbl/errors.hpp"
#include "vbl/rng.hpp"

namespace vbl {

std::size_t ModelConfig::head_dim() const {
  return modality == Modality::kContinuous ? 2 * input_dim : input_dim;
}

void ModelConfig::validate() const {
  if (input_dim == 0) throw ConfigError("model input dimension must be positive", "input_dim");
  if (hidden == 0) throw ConfigError("hidden must be positive", "hidden");
  if (backward_hidden == 0) throw ConfigError("backward_hidden must be positive", "backward_hidden");
  if (latent == 0) throw ConfigError("latent must be positive", "latent");
  if (mlp_hidden == 0) throw ConfigError("mlp_hidden must be positive", "mlp_hidden");
  if (!(sigma_min > 0) || !std::isfinite(sigma_min))
    throw ConfigError("sigma_min must be positive", "sigma_min");
  if (!(leaky_slope >= 0) || !std::isfinite(leaky_slope))
    throw ConfigError("leaky_slope must be non-negative", "leaky_slope");
}

// ---------------------------------------------------------------------------
// ParamStore

void ParamStore::add(std::string name, Tensor value) {
  if (contains(name)) throw Error("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ShapeError("parameter '" + name + "' is not present in the model");
  return entries_[it->second].second;
}

Tensor& ParamStore::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParamStore&>(*this).get(name));
}

std::size_t ParamStore::erase_group(std::string_view group) {
  const std::string prefix = std::string(group) + ".";
  const std::size_t before = entries_.size();
  std::erase_if(entries_, [&](const auto& e) { return e.first.starts_with(prefix); });
  reindex();
  return before - entries_.size();
}

void ParamStore::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < entries_.size(); ++i) index_.emplace(entries_[i].first, i);
}

std::size_t ParamStore::numel() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

std::uint64_t ParamStore::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : entries_) {
    feed(name.data(), name.size());
    for (double v : t.data()) feed(&v, sizeof v);
  }
  return h;
}

// ---------------------------------------------------------------------------
// BoundParams

Var BoundParams::operator[](const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Tensor& value = store_->get(name);
  Var v = trainable_ ? tape_->variable(value) : tape_->constant(value);
  bound_.emplace(name, v);
  return v;
}

std::set<std::string> BoundParams::touched_groups() const {
  std::set<std::string> out;
  for (const auto& [name, v] : bound_) out.insert(name.substr(0, name.find('.')));
  return out;
}

// ---------------------------------------------------------------------------
// Initialization

Tensor random_orthogonal(std::size_t n, std::uint64_t seed) {
  SplitMix64 g(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> cols(n, std::vector<double>(n));
  for (auto& c : cols)
    for (double& v : c) v = normal(g);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += cols[j][i] * cols[k][i];
      for (std::size_t i = 0; i < n; ++i) cols[j][i] -= dot * cols[k][i];
    }
    double norm = 0.0;
    for (double v : cols[j]) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : cols[j]) v /= norm;
  }
  Tensor out(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = cols[j][i];
  return out;
}

namespace {

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed), seed_(seed) {}

  Tensor uniform(std::size_t rows, std::size_t cols) {
    const double a = 1.0 / std::sqrt(static_cast<double>(rows));
    std::uniform_real_distribution<double> u(-a, a);
    Tensor t(Shape{rows, cols});
    for (double& v : t.data()) v = u(rng_);
    return t;
  }

  // Four orthogonal [n x n] blocks side by side (one per gate).
  Tensor orthogonal_gates(std::size_t n) {
    Tensor t(Shape{n, 4 * n});
    for (std::size_t g = 0; g < 4; ++g) {
      const Tensor q = random_orthogonal(n, mix_seed(seed_, ++counter_));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) t[i * 4 * n + g * n + j] = q[i * n + j];
    }
    return t;
  }

 private:
  SplitMix64 rng_;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

Tensor gate_bias(std::size_t hidden) {
  Tensor b(Shape{4 * hidden}, 0.0);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;  // forget gate
  return b;
}

void add_mlp(ParamStore& ps, Initializer& init, std::string_view prefix, std::size_t in,
             std::size_t hidden, std::size_t out) {
  const std::string p(prefix);
  ps.add(p + ".W1", init.uniform(in, hidden));
  ps.add(p + ".b1", Tensor(Shape{hidden}, 0.0));
  ps.add(p + ".Wmu", init.uniform(hidden, out));
  ps.add(p + ".bmu", Tensor(Shape{out}, 0.0));
  ps.add(p + ".Wsig", init.uniform(hidden, out));
  ps.add(p + ".bsig", Tensor(Shape{out}, 0.0));
}

}  // namespace

Model Model::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  Initializer init(seed);
  ParamStore& ps = m.params;
  const std::size_t h = config.hidden, hb = config.backward_hidden, z = config.latent;
  const std::size_t in = config.input_dim, mh = config.mlp_hidden;

  ps.add("fwd.W", init.uniform(in, 4 * h));
  ps.add("fwd.U", init.orthogonal_gates(h));
  ps.add("fwd.b", gate_bias(h));
  ps.add("fwd.V", init.uniform(z, 4 * h));
  ps.add("fwd.R", init.uniform(hb, 4 * h));

  ps.add("bwd.W", init.uniform(in, 4 * hb));
  ps.add("bwd.U", init.orthogonal_gates(hb));
  ps.add("bwd.b", gate_bias(hb));

  add_mlp(ps, init, groups::kEncoder, h + hb, mh, z);
  add_mlp(ps, init, groups::kPrior, h, mh, z);
  add_mlp(ps, init, groups::kDecodeB, z, mh, hb);
  add_mlp(ps, init, groups::kDecodeH, z, mh, h);

  const std::size_t k = config.head_dim();
  ps.add("head_f.W", init.uniform(h, k));
  ps.add("head_f.b", Tensor(Shape{k}, 0.0));
  ps.add("head_b.W", init.uniform(hb, k));
  ps.add("head_b.b", Tensor(Shape{k}, 0.0));
  return m;
}

}  // namespace vbl
