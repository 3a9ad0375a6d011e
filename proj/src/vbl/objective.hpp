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
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "vbl/data.hpp"
#include "vbl/latent.hpp"
#include "vbl/model.hpp"
#include "vbl/recurrent.hpp"
#include "vbl/tensor.hpp"

namespace vbl {

enum class PriorMode { kLearned, kFixed };
enum class ZMode { kSampled, kMean };
enum class AuxMode { kReconstruction, kActivity, kOff };

std::string_view prior_mode_name(PriorMode m);
std::string_view z_mode_name(ZMode m);
std::string_view aux_mode_name(AuxMode m);
PriorMode parse_prior_mode(std::string_view s);
ZMode parse_z_mode(std::string_view s);
AuxMode parse_aux_mode(std::string_view s);

struct ObjectiveConfig {
  double alpha = 1.0;
  double beta = 1.0;
  /// Probability that an auxiliary-cost gradient reaches the recurrent state.
  double sb_prob = 0.5;
  /// When false no gating node is inserted at all.
  bool stochastic_backprop = true;
  PriorMode prior_mode = PriorMode::kLearned;
  ZMode z_mode = ZMode::kSampled;
  AuxMode aux_mode = AuxMode::kReconstruction;
  double gamma = 0.0;

  void validate() const;
  friend bool operator==(const ObjectiveConfig&, const ObjectiveConfig&) = default;
};

/// Dense output layers on h_t (forward) and b_t (backward).
struct OutputHeadParams {
  Var Wf, bf;
  Var Wb, bb;  // invalid when bound for inference only
  Modality modality = Modality::kDiscrete;
  double sigma_min = 1e-4;
};

OutputHeadParams bind_heads(BoundParams& params, const ModelConfig& config, bool with_backward);

/// Raw head output: logits for discrete/binary, [mu, pre-sigma] for continuous.
Var head_output(Var W, Var b, Var state);
/// Per-row log p(target | state) under the head. Returns [batch].
Var head_log_prob(Var W, Var b, Var state, const StepInput& target, Modality modality,
                  double sigma_min);
/// Continuous heads: split raw output into a Gaussian.
GaussianParams continuous_head(Var raw, std::size_t dim, double sigma_min);

/// Per-row terms of one timestep, each [batch] and in nats.
struct StepTerms {
  Var fwd_recon, bwd_recon, aux_b, aux_h, kl, activity, total;
};

/// One timestep of the objective. `gate` holds one {0,1} value per row; the
/// auxiliary targets b_t and h_{t-1} pass through grad_gate with it. An empty
/// span inserts no gate. Auxiliary terms are zero constants unless
/// cfg.aux_mode is reconstruction; the activity term is nonzero only in
/// activity mode.
StepTerms elbo_step(const StepInput& target, Var h_t, Var h_prev, Var b_t,
                    const GaussianParams& q, const GaussianParams& p, const GaussianParams& gb,
                    const GaussianParams& gh, const OutputHeadParams& heads,
                    const ObjectiveConfig& cfg, std::span<const double> gate);

struct TermValues {
  double fwd_recon = 0, bwd_recon = 0, aux_b = 0, aux_h = 0, kl = 0, activity = 0, total = 0;
  TermValues& operator+=(const TermValues& o);
};

struct ObjectiveBreakdown {
  std::vector<TermValues> per_step;      // summed over rows still inside their sequence
  std::vector<TermValues> per_sequence;  // summed over each sequence's timesteps
  TermValues aggregate;
  std::size_t tokens = 0;
  double alpha = 0, beta = 0;  // coefficients actually applied
  /// Per-sequence sums of log q(z_t) and log p(z_t) at the drawn z_t; only
  /// filled when requested.
  std::vector<double> log_qz, log_pz;
  Var loss;  // -total / tokens

  /// |total - (fwd + bwd + alpha*aux_b + beta*aux_h - kl - activity)|.
  double additivity_error() const;
};

struct PassOptions {
  std::uint64_t seed = 0;
  bool latent_density = false;
};

/// Runs the backward LSTM, then the forward pass with z_t from q (or its
/// mean) and b~_t from p(b~|z), accumulating length-masked terms.
ObjectiveBreakdown sequence_objective(BoundParams& params, const ModelConfig& model,
                                      const SequenceBatch& batch, const ObjectiveConfig& cfg,
                                      const PassOptions& opts = {});

/// The objective with both auxiliary terms replaced by gamma * sum_t |h_t|^2.
ObjectiveBreakdown activity_reg_objective(BoundParams& params, const ModelConfig& model,
                                          const SequenceBatch& batch, ObjectiveConfig cfg,
                                          double gamma, const PassOptions& opts = {});

/// (|h - h~|^2, |h|^2 + |h~|^2 - 2 h.h~) summed over all entries.
std::pair<double, double> decomposition_check(const Tensor& h, const Tensor& h_tilde);

struct BoundEstimate {
  double elbo = 0, elbo_se = 0;
  double iw = 0, iw_se = 0;
  std::size_t samples = 0;

  /// elbo <= iw within `k` combined standard errors.
  bool consistent(double k = 3.0) const;
};

/// Importance-weighted check of the bound on one sequence (row `row` of
/// `data`). The proposal is q(z|h,b) with b~ from p(b~|z), so the b~ terms
/// cancel in the weights. Rejects latent > 4 or length > 4.
BoundEstimate monte_carlo_bound_check(const Model& model, const SequenceBatch& data,
                                      std::size_t row, std::size_t n_samples,
                                      const ObjectiveConfig& cfg, std::uint64_t seed);

}  // namespace vbl
