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


// End-to-end runs shared by the C API and the tests: load data as a config
// describes it, build a model, train, evaluate and run ablation studies.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vbl/checkpoint.hpp"
#include "vbl/config.hpp"
#include "vbl/data.hpp"
#include "vbl/training.hpp"

namespace vbl {

struct LoadedData {
  DataSplits splits;
  std::optional<Vocab> vocab;
  std::optional<Standardizer> standardizer;
  Modality modality = Modality::kDiscrete;
  std::size_t input_dim = 0;
};

LoadedData load_data(const RunConfig& cfg);
/// Fresh model sized for the data, initialized from the run seed.
Model build_model(const RunConfig& cfg, const LoadedData& data);

struct RunOutput {
  TrainResult result;
  Checkpoint checkpoint;  // best-valid model and its metadata
};

/// Loads data, trains, and writes the CSV log and checkpoint named in `cfg`.
RunOutput run_training(const RunConfig& cfg, std::ostream* progress = nullptr);
RunOutput run_training(const RunConfig& cfg, const LoadedData& data,
                       std::ostream* progress = nullptr);

/// Reads a data file for evaluating `ckpt`: text is chunked with the
/// checkpoint vocabulary; frames are standardized with its statistics.
SequenceBatch load_eval_data(const std::filesystem::path& path, const std::string& format,
                             const Checkpoint& ckpt);

struct AblationRun {
  std::string label;
  RunConfig config;
};

/// The runs of one study (1-4), all sharing `base`'s seed.
std::vector<AblationRun> ablation_runs(int study, const RunConfig& base);

struct AblationOutcome {
  std::string label;
  TrainResult result;
};

inline constexpr const char* kAblationHeader =
    "study,run,label,epoch,split,elbo_per_token,kl_per_step,bpc,ppl,seq_ll,seconds";

/// Runs a study sequentially and writes one CSV row per metric row.
std::vector<AblationOutcome> run_ablation(int study, const RunConfig& base, std::ostream& csv,
                                          std::ostream* progress = nullptr);

}  // namespace vbl
