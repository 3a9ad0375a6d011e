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


#include "vbl/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "vbl/rng.hpp"
#include "vbl/training.hpp"

namespace vbl {

ObjectiveConfig GradcheckConfig::gradcheck_objective() {
  // Finite differences cannot see gradient gating, so every gate passes.
  ObjectiveConfig o;
  o.sb_prob = 1.0;
  return o;
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

std::vector<std::pair<std::string, double>> GradcheckReport::groups() const {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& p : params) {
    const std::string g = p.name.substr(0, p.name.find('.'));
    if (out.empty() || out.back().first != g) out.emplace_back(g, 0.0);
    out.back().second = std::max(out.back().second, p.max_rel_err);
  }
  return out;
}

Model gradcheck_model(const GradcheckConfig& cfg) {
  ModelConfig mc;
  mc.modality = cfg.modality;
  mc.input_dim = cfg.input_dim;
  mc.hidden = cfg.hidden;
  mc.backward_hidden = cfg.backward_hidden;
  mc.latent = cfg.latent;
  mc.mlp_hidden = cfg.mlp_hidden;
  Model m = Model::init(mc, cfg.seed);
  // Nonzero biases so every bias gradient is exercised away from symmetry.
  SplitMix64 g(mix_seed(cfg.seed, 0x62696173ULL));
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto& [name, t] : m.params.entries())
    if (name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".bmu") ||
        name.ends_with(".bsig"))
      for (double& v : t.data()) v += u(g);
  return m;
}

SequenceBatch gradcheck_batch(const GradcheckConfig& cfg) {
  SplitMix64 g(mix_seed(cfg.seed, 0x64617461ULL));
  std::uniform_int_distribution<std::size_t> tok(1, cfg.input_dim - 1);
  std::bernoulli_distribution bit(0.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> seqs;
  const std::size_t d = cfg.modality == Modality::kDiscrete ? 1 : cfg.input_dim;
  for (std::size_t b = 0; b < cfg.batch; ++b) {
    // The last row is one step shorter so padding is covered too.
    const std::size_t len = (b + 1 == cfg.batch && cfg.batch > 1 && cfg.steps > 1)
        ? cfg.steps - 1 : cfg.steps;
    std::vector<double> frames(len * d);
    for (double& v : frames) {
      switch (cfg.modality) {
        case Modality::kDiscrete: v = static_cast<double>(tok(g)); break;
        case Modality::kBinary: v = bit(g) ? 1.0 : 0.0; break;
        case Modality::kContinuous: v = normal(g); break;
      }
    }
    seqs.push_back(std::move(frames));
  }
  return make_batch(cfg.modality, d, seqs,
                    cfg.modality == Modality::kDiscrete ? cfg.input_dim : 0);
}

GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Model model = gradcheck_model(cfg);
  const SequenceBatch batch = gradcheck_batch(cfg);
  const std::uint64_t noise = mix_seed(cfg.seed, 0x6e6f697365ULL);

  std::vector<Tensor> analytic = objective_gradients(model, batch, cfg.objective, noise, true);
  const auto loss_at = [&] {
    Tape tape;
    BoundParams bp(model.params, tape, false);
    return sequence_objective(bp, model.config, batch, cfg.objective, {noise}).loss.value().item();
  };

  GradcheckReport report;
  auto& entries = model.params.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& [name, value] = entries[i];
    ParamCheck pc{name, value.numel(), 0.0, 0.0};
    const double sign = (cfg.sign_flip && name == "fwd.U") ? -1.0 : 1.0;
    for (std::size_t k = 0; k < value.numel(); ++k) {
      const double orig = value[k];
      value[k] = orig + cfg.eps;
      const double up = loss_at();
      value[k] = orig - cfg.eps;
      const double down = loss_at();
      value[k] = orig;
      const double numeric = (up - down) / (2.0 * cfg.eps);
      const double a = sign * analytic[i][k];
      pc.max_abs_err = std::max(pc.max_abs_err, std::abs(a - numeric));
      pc.max_rel_err = std::max(pc.max_rel_err, relative_error(a, numeric, cfg.floor));
    }
    report.max_rel_err = std::max(report.max_rel_err, pc.max_rel_err);
    report.params.push_back(pc);
  }
  report.passed = report.max_rel_err < cfg.tolerance;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace vbl
