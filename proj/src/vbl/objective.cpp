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


#include "vbl/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "vbl/errors.hpp"
#include "vbl/rng.hpp"

namespace vbl {

std::string_view prior_mode_name(PriorMode m) {
  return m == PriorMode::kLearned ? "learned" : "fixed";
}

std::string_view z_mode_name(ZMode m) { return m == ZMode::kSampled ? "sampled" : "mean"; }

std::string_view aux_mode_name(AuxMode m) {
  switch (m) {
    case AuxMode::kReconstruction: return "reconstruction";
    case AuxMode::kActivity: return "activity";
    case AuxMode::kOff: return "off";
  }
  return "?";
}

PriorMode parse_prior_mode(std::string_view s) {
  if (s == "learned") return PriorMode::kLearned;
  if (s == "fixed") return PriorMode::kFixed;
  throw ConfigError("prior must be 'learned' or 'fixed', got '" + std::string(s) + "'", "prior");
}

ZMode parse_z_mode(std::string_view s) {
  if (s == "sampled") return ZMode::kSampled;
  if (s == "mean") return ZMode::kMean;
  throw ConfigError("z_mode must be 'sampled' or 'mean', got '" + std::string(s) + "'", "z_mode");
}

AuxMode parse_aux_mode(std::string_view s) {
  if (s == "reconstruction") return AuxMode::kReconstruction;
  if (s == "activity") return AuxMode::kActivity;
  if (s == "off") return AuxMode::kOff;
  throw ConfigError("aux must be 'reconstruction', 'activity' or 'off', got '" + std::string(s) +
                    "'", "aux");
}

void ObjectiveConfig::validate() const {
  if (!std::isfinite(alpha) || alpha < 0) throw ConfigError("alpha must be finite and >= 0", "alpha");
  if (!std::isfinite(beta) || beta < 0) throw ConfigError("beta must be finite and >= 0", "beta");
  if (!(sb_prob >= 0 && sb_prob <= 1)) throw ConfigError("sb_prob must lie in [0, 1]", "sb_prob");
  if (!std::isfinite(gamma) || gamma < 0) throw ConfigError("gamma must be finite and >= 0", "gamma");
}

// ---------------------------------------------------------------------------
// Output heads

OutputHeadParams bind_heads(BoundParams& params, const ModelConfig& config, bool with_backward) {
  OutputHeadParams h;
  h.Wf = params["head_f.W"];
  h.bf = params["head_f.b"];
  if (with_backward) {
    h.Wb = params["head_b.W"];
    h.bb = params["head_b.b"];
  }
  h.modality = config.modality;
  h.sigma_min = config.sigma_min;
  return h;
}

Var head_output(Var W, Var b, Var state) {
  return matmul(state, W) + broadcast_rows(b, state.value().rows());
}

GaussianParams continuous_head(Var raw, std::size_t dim, double sigma_min) {
  return {slice_cols(raw, 0, dim), shift(softplus(slice_cols(raw, dim, dim)), sigma_min)};
}

Var head_log_prob(Var W, Var b, Var state, const StepInput& target, Modality modality,
                  double sigma_min) {
  Var raw = head_output(W, b, state);
  const std::size_t width = raw.value().cols();
  switch (modality) {
    case Modality::kDiscrete: {
      if (!target.is_tokens()) throw DataError("discrete head given a dense target");
      for (std::size_t tok : target.tokens)
        if (tok >= width)
          throw DataError("token " + std::to_string(tok) + " outside vocabulary of " +
                          std::to_string(width));
      return gather_cols(log_softmax_rows(raw), target.tokens);
    }
    case Modality::kBinary: {
      if (target.is_tokens() || target.dense.value().cols() != width)
        throw DataError("binary head target does not match head width");
      return sum(target.dense * raw - softplus(raw), 1);
    }
    case Modality::kContinuous: {
      const std::size_t d = width / 2;
      if (target.is_tokens() || target.dense.value().cols() != d)
        throw DataError("continuous head target does not match frame dimension");
      return log_density(continuous_head(raw, d, sigma_min), target.dense);
    }
  }
  throw DataError("unknown modality");
}

// ---------------------------------------------------------------------------
// One step

namespace {

Tensor expand_rows(std::span<const double> per_row, std::size_t cols) {
  Tensor m(Shape{per_row.size(), cols});
  for (std::size_t r = 0; r < per_row.size(); ++r)
    for (std::size_t k = 0; k < cols; ++k) m[r * cols + k] = per_row[r];
  return m;
}

Var aux_target(Var state, std::span<const double> gate) {
  if (gate.empty()) return state;
  return grad_gate(state, expand_rows(gate, state.value().cols()));
}

}  // namespace

StepTerms elbo_step(const StepInput& target, Var h_t, Var h_prev, Var b_t,
                    const GaussianParams& q, const GaussianParams& p, const GaussianParams& gb,
                    const GaussianParams& gh, const OutputHeadParams& heads,
                    const ObjectiveConfig& cfg, std::span<const double> gate) {
  Tape& tape = h_t.tape();
  const std::size_t rows = h_t.value().rows();
  if (!gate.empty() && gate.size() != rows)
    throw ShapeError("gate mask has " + std::to_string(gate.size()) + " rows, batch has " +
                     std::to_string(rows));
  Var zero = tape.constant(Tensor(Shape{rows}, 0.0));

  StepTerms s;
  s.fwd_recon = head_log_prob(heads.Wf, heads.bf, h_t, target, heads.modality, heads.sigma_min);
  s.bwd_recon = heads.Wb.valid()
      ? head_log_prob(heads.Wb, heads.bb, b_t, target, heads.modality, heads.sigma_min)
      : zero;
  s.kl = kl_diag_gauss(q, p);
  s.aux_b = s.aux_h = s.activity = zero;
  Var total = s.fwd_recon + s.bwd_recon - s.kl;
  switch (cfg.aux_mode) {
    case AuxMode::kReconstruction:
      s.aux_b = log_density(gb, aux_target(b_t, gate));
      s.aux_h = log_density(gh, aux_target(h_prev, gate));
      total = total + scale(s.aux_b, cfg.alpha) + scale(s.aux_h, cfg.beta);
      break;
    case AuxMode::kActivity:
      s.activity = scale(sum(square(h_t), 1), cfg.gamma);
      total = total - s.activity;
      break;
    case AuxMode::kOff:
      break;
  }
  s.total = total;
  return s;
}

TermValues& TermValues::operator+=(const TermValues& o) {
  fwd_recon += o.fwd_recon;
  bwd_recon += o.bwd_recon;
  aux_b += o.aux_b;
  aux_h += o.aux_h;
  kl += o.kl;
  activity += o.activity;
  total += o.total;
  return *this;
}

double ObjectiveBreakdown::additivity_error() const {
  const TermValues& a = aggregate;
  return std::abs(a.total -
                  (a.fwd_recon + a.bwd_recon + alpha * a.aux_b + beta * a.aux_h - a.kl - a.activity));
}

// ---------------------------------------------------------------------------
// Whole sequences

namespace {

double row_log_density(const Tensor& mu, const Tensor& sigma, const Tensor& x, std::size_t r) {
  const std::size_t d = mu.cols();
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double acc = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double s = sigma[r * d + k];
    const double u = (x[r * d + k] - mu[r * d + k]) / s;
    acc += -half_log_2pi - std::log(s) - 0.5 * u * u;
  }
  return acc;
}

}  // namespace

ObjectiveBreakdown sequence_objective(BoundParams& params, const ModelConfig& model,
                                      const SequenceBatch& batch, const ObjectiveConfig& cfg,
                                      const PassOptions& opts) {
  model.validate();
  cfg.validate();
  batch.validate();
  if (batch.size() == 0 || batch.token_count() == 0) throw DataError("objective: empty batch");
  if (batch.modality != model.modality)
    throw DataError("batch modality '" + std::string(modality_name(batch.modality)) +
                    "' does not match model modality '" +
                    std::string(modality_name(model.modality)) + "'");

  Tape& tape = params.tape();
  const std::size_t B = batch.size(), T = batch.max_len();
  const bool recon = cfg.aux_mode == AuxMode::kReconstruction;

  const VarForwardLstmParams fwd = bind_var_forward(params, model.hidden);
  const LstmParams bwd = bind_lstm(params, groups::kBackward, model.backward_hidden);
  const MlpParams enc = bind_mlp(params, groups::kEncoder, model);
  MlpParams prior_mlp;
  const bool learned = cfg.prior_mode == PriorMode::kLearned;
  if (learned) prior_mlp = bind_mlp(params, groups::kPrior, model);
  const MlpParams dec_b = bind_mlp(params, groups::kDecodeB, model);
  MlpParams dec_h;
  if (recon) dec_h = bind_mlp(params, groups::kDecodeH, model);
  const OutputHeadParams heads = bind_heads(params, model, true);

  const std::vector<Var> bs = run_backward_lstm(bwd, batch);

  ObjectiveBreakdown out;
  out.per_step.resize(T);
  out.per_sequence.resize(B);
  out.tokens = batch.token_count();
  out.alpha = recon ? cfg.alpha : 0.0;
  out.beta = recon ? cfg.beta : 0.0;
  if (opts.latent_density) {
    out.log_qz.assign(B, 0.0);
    out.log_pz.assign(B, 0.0);
  }

  CellState state = zero_state(tape, B, model.hidden);
  Var acc;
  std::vector<double> gate;
  for (std::size_t t = 0; t < T; ++t) {
    const StepInput u = step_input(tape, batch, t);
    const StepInput y = step_target(tape, batch, t);

    const GaussianParams q = encoder(enc, state.h, bs[t]);
    const GaussianParams p = prior(learned ? &prior_mlp : nullptr, state.h, model.latent);
    Var z = cfg.z_mode == ZMode::kMean
        ? q.mu
        : reparam_sample(q, step_noise(opts.seed, batch.ids, t, NoiseStream::kLatent, model.latent));
    const GaussianParams gb = decode_b(dec_b, z);
    Var b_tilde = cfg.z_mode == ZMode::kMean
        ? gb.mu
        : reparam_sample(gb, step_noise(opts.seed, batch.ids, t, NoiseStream::kBackwardProxy,
                                        model.backward_hidden));
    GaussianParams gh;
    if (recon) gh = decode_h(dec_h, z);

    const CellState next = var_forward_step(fwd, u, state, z, b_tilde);

    gate.clear();
    if (recon && cfg.stochastic_backprop) {
      gate.resize(B);
      for (std::size_t r = 0; r < B; ++r)
        gate[r] = bernoulli_draw(opts.seed, batch.ids[r], t, NoiseStream::kGateMask, cfg.sb_prob)
            ? 1.0 : 0.0;
    }
    const StepTerms s = elbo_step(y, next.h, state.h, bs[t], q, p, gb, gh, heads, cfg, gate);

    Tensor valid(Shape{B}, 0.0);
    for (std::size_t r = 0; r < B; ++r) valid[r] = t < batch.lengths[r] ? 1.0 : 0.0;
    Var step_total = sum(s.total * tape.constant(valid));
    acc = acc.valid() ? acc + step_total : step_total;

    TermValues& step = out.per_step[t];
    for (std::size_t r = 0; r < B; ++r) {
      if (valid[r] == 0.0) continue;
      const TermValues v{s.fwd_recon.value()[r], s.bwd_recon.value()[r], s.aux_b.value()[r],
                         s.aux_h.value()[r],     s.kl.value()[r],        s.activity.value()[r],
                         s.total.value()[r]};
      step += v;
      out.per_sequence[r] += v;
      if (opts.latent_density) {
        out.log_qz[r] += row_log_density(q.mu.value(), q.sigma.value(), z.value(), r);
        out.log_pz[r] += row_log_density(p.mu.value(), p.sigma.value(), z.value(), r);
      }
    }
    out.aggregate += step;
    state = next;
  }
  out.loss = scale(acc, -1.0 / static_cast<double>(out.tokens));
  return out;
}

ObjectiveBreakdown activity_reg_objective(BoundParams& params, const ModelConfig& model,
                                          const SequenceBatch& batch, ObjectiveConfig cfg,
                                          double gamma, const PassOptions& opts) {
  cfg.aux_mode = AuxMode::kActivity;
  cfg.gamma = gamma;
  return sequence_objective(params, model, batch, cfg, opts);
}

std::pair<double, double> decomposition_check(const Tensor& h, const Tensor& h_tilde) {
  if (h.shape() != h_tilde.shape())
    throw ShapeError("decomposition_check: shapes " + shape_str(h.shape()) + " and " +
                     shape_str(h_tilde.shape()) + " differ");
  double lhs = 0, hh = 0, tt = 0, ht = 0;
  for (std::size_t i = 0; i < h.numel(); ++i) {
    const double d = h[i] - h_tilde[i];
    lhs += d * d;
    hh += h[i] * h[i];
    tt += h_tilde[i] * h_tilde[i];
    ht += h[i] * h_tilde[i];
  }
  return {lhs, hh + tt - 2.0 * ht};
}

// ---------------------------------------------------------------------------
// Bound check

bool BoundEstimate::consistent(double k) const {
  return elbo <= iw + k * std::sqrt(elbo_se * elbo_se + iw_se * iw_se);
}

BoundEstimate monte_carlo_bound_check(const Model& model, const SequenceBatch& data,
                                      std::size_t row, std::size_t n_samples,
                                      const ObjectiveConfig& cfg, std::uint64_t seed) {
  if (row >= data.size()) throw DataError("bound check: row out of range");
  if (n_samples == 0) throw DomainError("bound check needs at least one sample");
  if (model.config.latent > 4 || data.lengths[row] > 4)
    throw DomainError("bound check is limited to latent <= 4 and length <= 4");

  SequenceBatch rep = data.subset(std::vector<std::size_t>(n_samples, row));
  for (std::size_t s = 0; s < n_samples; ++s) rep.ids[s] = s;

  ObjectiveConfig c = cfg;
  c.z_mode = ZMode::kSampled;
  c.aux_mode = AuxMode::kOff;
  Tape tape;
  BoundParams bp(model.params, tape, false);
  const ObjectiveBreakdown bd = sequence_objective(bp, model.config, rep, c, {seed, true});

  const auto n = static_cast<double>(n_samples);
  std::vector<double> elbo(n_samples), logw(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const TermValues& v = bd.per_sequence[s];
    elbo[s] = v.fwd_recon - v.kl;
    logw[s] = v.fwd_recon + bd.log_pz[s] - bd.log_qz[s];
  }
  BoundEstimate est;
  est.samples = n_samples;
  double m = 0;
  for (double e : elbo) m += e;
  m /= n;
  double var = 0;
  for (double e : elbo) var += (e - m) * (e - m);
  est.elbo = m;
  est.elbo_se = n_samples > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;

  const double mx = *std::max_element(logw.begin(), logw.end());
  double wm = 0;
  for (double l : logw) wm += std::exp(l - mx);
  wm /= n;
  double wv = 0;
  for (double l : logw) wv += (std::exp(l - mx) - wm) * (std::exp(l - mx) - wm);
  est.iw = mx + std::log(wm);
  // Delta method on log of the mean weight.
  est.iw_se = n_samples > 1 ? std::sqrt(wv / (n - 1) / n) / wm : 0.0;
  return est;
}

}  // namespace vbl
