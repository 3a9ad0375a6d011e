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

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vbl/data.hpp"
#include "vbl/model.hpp"
#include "vbl/objective.hpp"

namespace vbl {

enum class EmitMode { kSample, kGreedy };
enum class ZSource { kPosterior, kPrior };

EmitMode parse_emit_mode(std::string_view s);
ZSource parse_z_source(std::string_view s);

struct GenerateOptions {
  std::size_t steps = 0;
  EmitMode mode = EmitMode::kSample;
  ZMode z_mode = ZMode::kMean;
  PriorMode prior_mode = PriorMode::kLearned;
  std::uint64_t seed = 0;
};

/// One frame per timestep; discrete frames hold a single token index.
using Frames = std::vector<std::vector<double>>;

/// Consumes `prime` through the forward path with z_t from the prior and
/// b~_t from p(b~|z_t), then emits `steps` further frames. Returns the prime
/// followed by the emitted frames. Touches only the `fwd`, `prior`, `dec_b`
/// and `head_f` parameters, so the backward LSTM and encoder may be absent.
Frames generate(const Model& model, const Frames& prime, const GenerateOptions& opts);

struct SequenceScore {
  double fwd_recon = 0;  // log p(x_t | h_{t-1}) summed over the sequence
  double kl = 0;         // zero in prior mode
  double bound = 0;      // fwd_recon - kl: the pure lower bound
  double total = 0;      // full objective including auxiliary terms
  std::size_t length = 0;
};

struct EvalResult {
  std::vector<SequenceScore> sequences;  // in batch order
  TermValues aggregate;
  std::size_t tokens = 0;

  double bound() const;            // summed over sequences
  double kl_per_step() const;
  double elbo_per_token() const;   // full objective per token
  double bound_per_token() const;
};

/// Per-sequence scores. Posterior mode runs the training-style pass with
/// z_t ~ q (or its mean under z_mode = mean). Prior mode never touches the
/// backward LSTM or the encoder: z_t = mu_p and b~_t = mu_b (or samples when
/// cfg.z_mode is sampled) and only the forward reconstruction is scored.
EvalResult evaluate_likelihood(const Model& model, const SequenceBatch& batch, ZSource source,
                               const ObjectiveConfig& cfg, std::uint64_t seed,
                               std::size_t batch_size = 64, bool check_finite = true);

/// The prior-mode forward pass on an existing tape; returns per-row fwd
/// log-likelihood sums.
std::vector<double> prior_forward_pass(BoundParams& params, const ModelConfig& model,
                                       const SequenceBatch& batch, PriorMode prior_mode,
                                       ZMode z_mode, std::uint64_t seed);

}  // namespace vbl
