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
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "vbl/checkpoint.hpp"
#include "vbl/data.hpp"
#include "vbl/generate.hpp"
#include "vbl/model.hpp"
#include "vbl/objective.hpp"

namespace vbl {

struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<Tensor> m, v;

  explicit AdamState(double learning_rate = 0.001) : lr(learning_rate) {}
};

/// One bias-corrected Adam step. `grads` follows the order of
/// `params.entries()`. Non-finite gradients throw before anything changes.
void adam_update(AdamState& state, ParamStore& params, const std::vector<Tensor>& grads);

double global_norm(const std::vector<Tensor>& grads);
/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_gradients(std::vector<Tensor>& grads, double max_norm);

struct TrainConfig {
  double lr = 0.001;
  std::size_t batch = 50;
  std::size_t epochs = 10;
  double clip = 5.0;  // global gradient norm; 0 disables clipping
  std::uint64_t seed = 1;
  ObjectiveConfig objective;
  std::size_t patience = 10;  // epochs without improvement; 0 disables
  std::size_t bptt = 256;
  std::string checkpoint;  // best-valid checkpoint path; empty to skip
  bool check_finite = true;
  bool log_wall_time = false;

  void validate() const;
};

struct MetricRow {
  std::size_t epoch = 0;
  std::string split;
  double elbo_per_token = 0;
  double kl_per_step = 0;  // NaN when not applicable
  double bpc = 0;          // NaN for non-discrete data
  double ppl = 0;          // NaN for non-discrete data
  double seq_ll = 0;
  double seconds = 0;
};

/// Append-only table; epochs strictly increase within each split.
class MetricLog {
 public:
  static constexpr const char* kHeader = "epoch,split,elbo_per_token,kl_per_step,bpc,ppl,seq_ll,seconds";

  void append(const MetricRow& row);
  const std::vector<MetricRow>& rows() const noexcept { return rows_; }
  /// Last row for `split`, or nullptr.
  const MetricRow* last(const std::string& split) const;

  void write_csv(std::ostream& os) const;
  static std::string format_row(const MetricRow& row);

 private:
  std::vector<MetricRow> rows_;
};

/// Metrics of an evaluation. Posterior scores give KL; prior scores do not.
MetricRow metric_row(const EvalResult& r, Modality modality, std::size_t epoch,
                     const std::string& split, bool has_kl);

struct TrainResult {
  MetricLog log;
  std::size_t best_epoch = 0;
  double best_valid = 0;  // bound per token on the valid split
  std::size_t steps = 0;
};

/// Noise seed used for every validation pass of a run.
std::uint64_t validation_seed(std::uint64_t seed);

/// Gradients of the objective on one batch, in `params.entries()` order.
std::vector<Tensor> objective_gradients(const Model& model, const SequenceBatch& batch,
                                        const ObjectiveConfig& cfg, std::uint64_t seed,
                                        bool check_finite, ObjectiveBreakdown* breakdown = nullptr);

/// Shuffled minibatch training with early stopping on the valid bound. On
/// return `model` holds the best-valid parameters. `ckpt_template` supplies
/// vocab/standardizer metadata for the checkpoint file.
/// `on_row`, if set, sees each metric row as it is produced.
TrainResult train(Model& model, const DataSplits& data, const TrainConfig& cfg,
                  const Checkpoint& ckpt_template = {},
                  const std::function<void(const MetricRow&)>& on_row = {});

}  // namespace vbl
