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


#include "vbl/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "vbl/errors.hpp"
#include "vbl/rng.hpp"

namespace vbl {

void adam_update(AdamState& s, ParamStore& params, const std::vector<Tensor>& grads) {
  auto& entries = params.entries();
  if (grads.size() != entries.size())
    throw ShapeError("adam: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(entries.size()) + " parameters");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != entries[i].second.shape())
      throw ShapeError("adam: gradient shape mismatch for '" + entries[i].first + "'");
    if (!grads[i].all_finite())
      throw NumericError("adam: non-finite gradient for '" + entries[i].first + "'; step skipped");
  }
  if (s.m.empty()) {
    for (const auto& e : entries) {
      s.m.emplace_back(e.second.shape(), 0.0);
      s.v.emplace_back(e.second.shape(), 0.0);
    }
  }
  ++s.t;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto p = entries[i].second.data();
    auto m = s.m[i].data();
    auto v = s.v[i].data();
    const auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * g[k];
      v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
  }
}

double global_norm(const std::vector<Tensor>& grads) {
  double acc = 0.0;
  for (const auto& g : grads)
    for (double v : g.data()) acc += v * v;
  return std::sqrt(acc);
}

double clip_gradients(std::vector<Tensor>& grads, double max_norm) {
  if (!(max_norm > 0)) throw DomainError("clip_gradients: max_norm must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double k = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g.data()) v *= k;
  }
  return norm;
}

void TrainConfig::validate() const {
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("lr must be positive", "lr");
  if (batch < 1) throw ConfigError("batch must be at least 1", "batch");
  if (!(clip >= 0) || !std::isfinite(clip)) throw ConfigError("clip must be >= 0", "clip");
  if (bptt < 1) throw ConfigError("bptt must be at least 1", "bptt");
  objective.validate();
}

// ---------------------------------------------------------------------------
// Metric log

void MetricLog::append(const MetricRow& row) {
  if (const MetricRow* prev = last(row.split); prev && row.epoch <= prev->epoch)
    throw Error("metric log: epoch " + std::to_string(row.epoch) + " for split '" + row.split +
                "' does not follow epoch " + std::to_string(prev->epoch));
  rows_.push_back(row);
}

const MetricRow* MetricLog::last(const std::string& split) const {
  for (auto it = rows_.rbegin(); it != rows_.rend(); ++it)
    if (it->split == split) return &*it;
  return nullptr;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

std::string MetricLog::format_row(const MetricRow& r) {
  return std::to_string(r.epoch) + "," + r.split + "," + fmt(r.elbo_per_token) + "," +
         fmt(r.kl_per_step) + "," + fmt(r.bpc) + "," + fmt(r.ppl) + "," + fmt(r.seq_ll) + "," +
         fmt(r.seconds);
}

void MetricLog::write_csv(std::ostream& os) const {
  os << kHeader << '\n';
  for (const auto& r : rows_) os << format_row(r) << '\n';
}

MetricRow metric_row(const EvalResult& r, Modality modality, std::size_t epoch,
                     const std::string& split, bool has_kl) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  MetricRow row;
  row.epoch = epoch;
  row.split = split;
  row.elbo_per_token = r.elbo_per_token();
  row.kl_per_step = has_kl ? r.kl_per_step() : nan;
  const double nll_per_token = -r.bound_per_token();
  row.bpc = modality == Modality::kDiscrete ? bits_per_character(std::max(0.0, nll_per_token)) : nan;
  row.ppl = modality == Modality::kDiscrete ? word_perplexity(-r.bound(), r.tokens) : nan;
  row.seq_ll = r.sequences.empty() ? nan : r.bound() / static_cast<double>(r.sequences.size());
  return row;
}

// ---------------------------------------------------------------------------
// Training

std::uint64_t validation_seed(std::uint64_t seed) { return mix_seed(seed, 0x76616c6964ULL); }

std::vector<Tensor> objective_gradients(const Model& model, const SequenceBatch& batch,
                                        const ObjectiveConfig& cfg, std::uint64_t seed,
                                        bool check_finite, ObjectiveBreakdown* breakdown) {
  Tape tape(check_finite);
  BoundParams bp(model.params, tape, true);
  ObjectiveBreakdown bd = sequence_objective(bp, model.config, batch, cfg, {seed});
  tape.backward(bd.loss);
  std::vector<Tensor> grads;
  grads.reserve(model.params.size());
  for (const auto& [name, value] : model.params.entries()) {
    auto it = bp.bound().find(name);
    grads.push_back(it == bp.bound().end() ? Tensor(value.shape(), 0.0) : tape.grad(it->second));
  }
  if (breakdown) *breakdown = std::move(bd);
  return grads;
}

namespace {

EvalResult evaluate_split(const Model& model, const SequenceBatch& data, ZSource source,
                          const TrainConfig& cfg) {
  ObjectiveConfig obj = cfg.objective;
  if (source == ZSource::kPrior) obj.z_mode = ZMode::kMean;
  return evaluate_likelihood(model, data, source, obj, validation_seed(cfg.seed),
                             std::max<std::size_t>(cfg.batch, 64), cfg.check_finite);
}

}  // namespace

TrainResult train(Model& model, const DataSplits& data, const TrainConfig& cfg,
                  const Checkpoint& ckpt_template,
                  const std::function<void(const MetricRow&)>& on_row) {
  cfg.validate();
  model.config.validate();
  const SequenceBatch train_set = data.train.split_long(cfg.bptt);
  if (train_set.size() == 0 || train_set.token_count() == 0)
    throw DataError("training split is empty");
  const SequenceBatch valid_set = data.valid.size() ? data.valid.split_long(cfg.bptt) : data.valid;
  const bool has_valid = valid_set.size() > 0 && valid_set.token_count() > 0;
  const Modality modality = model.config.modality;

  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const auto elapsed = [&] {
    return cfg.log_wall_time ? std::chrono::duration<double>(clock::now() - t0).count() : 0.0;
  };

  TrainResult result;
  result.best_valid = -std::numeric_limits<double>::infinity();
  AdamState adam(cfg.lr);
  ParamStore best = model.params;
  std::size_t since_best = 0;
  const auto emit = [&](const MetricRow& row) {
    result.log.append(row);
    if (on_row) on_row(row);
  };
  const auto save = [&](std::size_t epoch) {
    if (cfg.checkpoint.empty()) return;
    Checkpoint ckpt = ckpt_template;
    ckpt.model = model;
    ckpt.objective = cfg.objective;
    ckpt.epoch = epoch;
    save_checkpoint(cfg.checkpoint, ckpt);
  };

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 shuffle_rng(mix_seed(cfg.seed, 0x73687566ULL, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    TermValues train_terms;
    double train_bound = 0;
    std::size_t train_tokens = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch) {
      const std::vector<std::size_t> rows(
          order.begin() + static_cast<std::ptrdiff_t>(begin),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), begin + cfg.batch)));
      const SequenceBatch mb = train_set.subset(rows);
      ObjectiveBreakdown bd;
      std::vector<Tensor> grads =
          objective_gradients(model, mb, cfg.objective,
                              mix_seed(cfg.seed, epoch, result.steps), cfg.check_finite, &bd);
      if (cfg.clip > 0) clip_gradients(grads, cfg.clip);
      adam_update(adam, model.params, grads);
      ++result.steps;
      train_terms += bd.aggregate;
      train_bound += bd.aggregate.fwd_recon - bd.aggregate.kl;
      train_tokens += bd.tokens;
    }
    if (!std::isfinite(train_terms.total))
      throw NumericError("training diverged at epoch " + std::to_string(epoch));

    EvalResult train_eval;
    train_eval.aggregate = train_terms;
    train_eval.tokens = train_tokens;
    for (std::size_t r = 0; r < train_set.size(); ++r) train_eval.sequences.push_back({});
    train_eval.sequences.front().bound = train_bound;
    MetricRow row = metric_row(train_eval, modality, epoch, "train", true);
    row.seconds = elapsed();
    emit(row);

    if (!has_valid) {
      best = model.params;
      result.best_epoch = epoch;
      save(epoch);
      continue;
    }
    const EvalResult post = evaluate_split(model, valid_set, ZSource::kPosterior, cfg);
    const double bound = post.bound_per_token();
    if (!std::isfinite(bound) || !std::isfinite(post.elbo_per_token()))
      throw NumericError("validation objective is not finite at epoch " + std::to_string(epoch));
    row = metric_row(post, modality, epoch, "valid", true);
    row.seconds = elapsed();
    emit(row);
    row = metric_row(evaluate_split(model, valid_set, ZSource::kPrior, cfg), modality, epoch,
                     "valid_prior", false);
    row.seconds = elapsed();
    emit(row);

    if (bound > result.best_valid) {
      result.best_valid = bound;
      result.best_epoch = epoch;
      best = model.params;
      since_best = 0;
      save(epoch);
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  model.params = best;

  if (data.test.size() > 0 && data.test.token_count() > 0 && result.best_epoch > 0) {
    MetricRow row = metric_row(evaluate_split(model, data.test.split_long(cfg.bptt),
                                              ZSource::kPosterior, cfg),
                               modality, result.best_epoch, "test", true);
    row.seconds = elapsed();
    emit(row);
  }
  return result;
}

}  // namespace vbl
