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


#include "vbl/generate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vbl/errors.hpp"
#include "vbl/latent.hpp"
#include "vbl/recurrent.hpp"
#include "vbl/rng.hpp"

namespace vbl {

EmitMode parse_emit_mode(std::string_view s) {
  if (s == "sample") return EmitMode::kSample;
  if (s == "greedy") return EmitMode::kGreedy;
  throw ConfigError("mode must be 'sample' or 'greedy', got '" + std::string(s) + "'", "mode");
}

ZSource parse_z_source(std::string_view s) {
  if (s == "posterior") return ZSource::kPosterior;
  if (s == "prior") return ZSource::kPrior;
  throw ConfigError("z source must be 'posterior' or 'prior', got '" + std::string(s) + "'",
                    "z-source");
}

namespace {

struct InferenceNet {
  VarForwardLstmParams fwd;
  MlpParams prior_mlp;
  bool learned = true;
  MlpParams dec_b;
  OutputHeadParams heads;
};

InferenceNet bind_inference(BoundParams& params, const ModelConfig& mc, PriorMode prior_mode) {
  InferenceNet net;
  net.fwd = bind_var_forward(params, mc.hidden);
  net.learned = prior_mode == PriorMode::kLearned;
  if (net.learned) net.prior_mlp = bind_mlp(params, groups::kPrior, mc);
  net.dec_b = bind_mlp(params, groups::kDecodeB, mc);
  net.heads = bind_heads(params, mc, false);
  return net;
}

// One inference step: z from the prior, b~ from its decoder, then the cell.
CellState inference_step(const InferenceNet& net, const ModelConfig& mc, const StepInput& u,
                         const CellState& state, ZMode z_mode, std::uint64_t seed,
                         std::span<const std::uint64_t> ids, std::size_t t) {
  const GaussianParams p = prior(net.learned ? &net.prior_mlp : nullptr, state.h, mc.latent);
  Var z = z_mode == ZMode::kMean
      ? p.mu
      : reparam_sample(p, step_noise(seed, ids, t, NoiseStream::kLatent, mc.latent));
  const GaussianParams gb = decode_b(net.dec_b, z);
  Var b_tilde = z_mode == ZMode::kMean
      ? gb.mu
      : reparam_sample(gb, step_noise(seed, ids, t, NoiseStream::kBackwardProxy,
                                      mc.backward_hidden));
  return var_forward_step(net.fwd, u, state, z, b_tilde);
}

std::vector<double> emit(const Tensor& raw, const ModelConfig& mc, EmitMode mode,
                         std::uint64_t seed, std::size_t t) {
  SplitMix64 g(mix_seed(seed, 0, t, static_cast<std::uint64_t>(NoiseStream::kEmission)));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const std::size_t width = raw.cols();
  switch (mc.modality) {
    case Modality::kDiscrete: {
      std::vector<double> logits(raw.data().begin(), raw.data().end());
      if (mode == EmitMode::kGreedy) {
        auto it = std::max_element(logits.begin(), logits.end());
        return {static_cast<double>(it - logits.begin())};
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0;
      for (double& l : logits) z += (l = std::exp(l - mx));
      double u = uniform(g) * z;
      for (std::size_t k = 0; k < width; ++k) {
        u -= logits[k];
        if (u < 0) return {static_cast<double>(k)};
      }
      return {static_cast<double>(width - 1)};
    }
    case Modality::kBinary: {
      std::vector<double> bits(width);
      for (std::size_t k = 0; k < width; ++k) {
        const double l = raw[k];
        if (mode == EmitMode::kGreedy) {
          bits[k] = l > 0 ? 1.0 : 0.0;
        } else {
          const double p = l >= 0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
          bits[k] = uniform(g) < p ? 1.0 : 0.0;
        }
      }
      return bits;
    }
    case Modality::kContinuous: {
      const std::size_t d = width / 2;
      std::normal_distribution<double> normal(0.0, 1.0);
      std::vector<double> frame(d);
      for (std::size_t k = 0; k < d; ++k) {
        frame[k] = raw[k];
        if (mode == EmitMode::kSample) {
          const double pre = raw[d + k];
          const double sp = pre > 0 ? pre + std::log1p(std::exp(-pre)) : std::log1p(std::exp(pre));
          frame[k] += (sp + mc.sigma_min) * normal(g);
        }
      }
      return frame;
    }
  }
  throw DataError("unknown modality");
}

StepInput frame_input(Tape& tape, const ModelConfig& mc, const std::vector<double>* frame) {
  StepInput in;
  if (mc.modality == Modality::kDiscrete) {
    in.tokens.push_back(frame ? static_cast<std::size_t>((*frame)[0]) : Vocab::kReserved);
    return in;
  }
  Tensor x(Shape{1, mc.input_dim}, 0.0);
  if (frame) std::copy(frame->begin(), frame->end(), x.data().begin());
  in.dense = tape.constant(std::move(x));
  return in;
}

void check_frame(const ModelConfig& mc, const std::vector<double>& f) {
  if (mc.modality == Modality::kDiscrete) {
    if (f.size() != 1 || f[0] < 0 || f[0] >= static_cast<double>(mc.input_dim) ||
        f[0] != std::floor(f[0]))
      throw DataError("prime token outside the model vocabulary");
  } else if (f.size() != mc.input_dim) {
    throw DataError("prime frame has " + std::to_string(f.size()) + " values, model expects " +
                    std::to_string(mc.input_dim));
  }
}

}  // namespace

Frames generate(const Model& model, const Frames& prime, const GenerateOptions& opts) {
  const ModelConfig& mc = model.config;
  for (const auto& f : prime) check_frame(mc, f);
  Frames out = prime;
  if (opts.steps == 0) return out;

  Tape tape;
  BoundParams params(model.params, tape, false);
  const InferenceNet net = bind_inference(params, mc, opts.prior_mode);
  const std::uint64_t id = 0;
  CellState state = zero_state(tape, 1, mc.hidden);
  const std::size_t total = prime.size() + opts.steps;
  for (std::size_t t = 0; t < total; ++t) {
    const StepInput u = frame_input(tape, mc, t == 0 ? nullptr : &out[t - 1]);
    state = inference_step(net, mc, u, state, opts.z_mode, opts.seed, {&id, 1}, t);
    if (t < prime.size()) continue;
    Var raw = head_output(net.heads.Wf, net.heads.bf, state.h);
    out.push_back(emit(raw.value(), mc, opts.mode, opts.seed, t));
  }
  return out;
}

std::vector<double> prior_forward_pass(BoundParams& params, const ModelConfig& mc,
                                       const SequenceBatch& batch, PriorMode prior_mode,
                                       ZMode z_mode, std::uint64_t seed) {
  if (batch.size() == 0 || batch.token_count() == 0) throw DataError("evaluation: empty batch");
  if (batch.modality != mc.modality) throw DataError("batch modality does not match the model");
  Tape& tape = params.tape();
  const InferenceNet net = bind_inference(params, mc, prior_mode);
  const std::size_t B = batch.size();
  std::vector<double> out(B, 0.0);
  CellState state = zero_state(tape, B, mc.hidden);
  for (std::size_t t = 0; t < batch.max_len(); ++t) {
    state = inference_step(net, mc, step_input(tape, batch, t), state, z_mode, seed, batch.ids, t);
    Var lp = head_log_prob(net.heads.Wf, net.heads.bf, state.h, step_target(tape, batch, t),
                           mc.modality, mc.sigma_min);
    for (std::size_t r = 0; r < B; ++r)
      if (t < batch.lengths[r]) out[r] += lp.value()[r];
  }
  return out;
}

double EvalResult::bound() const {
  double s = 0;
  for (const auto& q : sequences) s += q.bound;
  return s;
}

double EvalResult::kl_per_step() const {
  return tokens ? aggregate.kl / static_cast<double>(tokens) : 0.0;
}

double EvalResult::elbo_per_token() const {
  return tokens ? aggregate.total / static_cast<double>(tokens) : 0.0;
}

double EvalResult::bound_per_token() const {
  return tokens ? bound() / static_cast<double>(tokens) : 0.0;
}

EvalResult evaluate_likelihood(const Model& model, const SequenceBatch& batch, ZSource source,
                               const ObjectiveConfig& cfg, std::uint64_t seed,
                               std::size_t batch_size, bool check_finite) {
  if (batch.size() == 0 || batch.token_count() == 0) throw DataError("evaluation: empty dataset");
  if (batch_size == 0) batch_size = batch.size();
  EvalResult res;
  res.tokens = batch.token_count();
  for (std::size_t begin = 0; begin < batch.size(); begin += batch_size) {
    const SequenceBatch part = batch.slice(begin, std::min(batch.size(), begin + batch_size));
    Tape tape(check_finite);
    BoundParams params(model.params, tape, false);
    if (source == ZSource::kPosterior) {
      const ObjectiveBreakdown bd = sequence_objective(params, model.config, part, cfg, {seed});
      for (std::size_t r = 0; r < part.size(); ++r) {
        const TermValues& v = bd.per_sequence[r];
        res.sequences.push_back({v.fwd_recon, v.kl, v.fwd_recon - v.kl, v.total, part.lengths[r]});
      }
      res.aggregate += bd.aggregate;
    } else {
      const auto fwd = prior_forward_pass(params, model.config, part, cfg.prior_mode,
                                          cfg.z_mode, seed);
      for (std::size_t r = 0; r < part.size(); ++r) {
        res.sequences.push_back({fwd[r], 0.0, fwd[r], fwd[r], part.lengths[r]});
        res.aggregate.fwd_recon += fwd[r];
        res.aggregate.total += fwd[r];
      }
    }
  }
  for (const auto& s : res.sequences)
    if (!std::isfinite(s.total) && check_finite)
      throw NumericError("evaluation produced a non-finite score");
  return res;
}

}  // namespace vbl
