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


#include "vbl/pipeline.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "vbl/errors.hpp"

namespace vbl {

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open data file '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

LoadedData load_data(const RunConfig& cfg) {
  if (cfg.data.empty()) throw ConfigError("no data file configured", "data");
  LoadedData out;
  out.modality = cfg.modality();
  if (cfg.data_format == "char") {
    if (cfg.chunk == 0) throw ConfigError("chunk must be positive", "chunk");
    CharCorpus corpus = load_char_corpus(cfg.data, cfg.split, cfg.chunk);
    out.splits = std::move(corpus.splits);
    out.input_dim = corpus.vocab.size();
    out.vocab = std::move(corpus.vocab);
  } else {
    const SequenceBatch all = cfg.data_format == "binary" ? load_binary_sequences(cfg.data)
                                                           : load_frame_sequences(cfg.data);
    out.splits = split_batch(all, cfg.split);
    out.input_dim = all.dim();
    if (cfg.standardize) {
      if (out.modality != Modality::kContinuous)
        throw ConfigError("standardize applies to frame data only", "standardize");
      out.standardizer = Standardizer::fit(out.splits.train);
      out.standardizer->apply(out.splits.train);
      out.standardizer->apply(out.splits.valid);
      out.standardizer->apply(out.splits.test);
    }
  }
  if (out.splits.train.size() == 0) throw DataError("training split is empty");
  return out;
}

Model build_model(const RunConfig& cfg, const LoadedData& data) {
  ModelConfig mc = cfg.model;
  mc.modality = data.modality;
  mc.input_dim = data.input_dim;
  return Model::init(mc, cfg.train.seed);
}

RunOutput run_training(const RunConfig& cfg, std::ostream* progress) {
  cfg.train.validate();
  return run_training(cfg, load_data(cfg), progress);
}

RunOutput run_training(const RunConfig& cfg, const LoadedData& data, std::ostream* progress) {
  RunOutput out;
  Model model = build_model(cfg, data);
  Checkpoint meta;
  meta.vocab = data.vocab;
  meta.standardizer = data.standardizer;
  meta.chunk = cfg.data_format == "char" ? cfg.chunk : 0;
  const auto echo = [&](const MetricRow& row) {
    if (progress) *progress << MetricLog::format_row(row) << '\n' << std::flush;
  };
  out.result = train(model, data.splits, cfg.train, meta, echo);
  out.checkpoint = meta;
  out.checkpoint.model = std::move(model);
  out.checkpoint.objective = cfg.train.objective;
  out.checkpoint.epoch = out.result.best_epoch;
  if (!cfg.log.empty()) {
    std::ofstream f(cfg.log, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open log file '" + cfg.log + "'");
    out.result.log.write_csv(f);
  }
  return out;
}

SequenceBatch load_eval_data(const std::filesystem::path& path, const std::string& format,
                             const Checkpoint& ckpt) {
  const Modality m = ckpt.model.config.modality;
  SequenceBatch batch;
  if (format == "char") {
    if (m != Modality::kDiscrete || !ckpt.vocab)
      throw DataError("character data given to a " + std::string(modality_name(m)) + " model");
    batch = encode_text(read_text(path), *ckpt.vocab, ckpt.chunk ? ckpt.chunk : 128);
  } else if (format == "binary") {
    batch = load_binary_sequences(path);
  } else if (format == "frames") {
    batch = load_frame_sequences(path);
    if (ckpt.standardizer) ckpt.standardizer->apply(batch);
  } else {
    throw ConfigError("data_format must be char, binary or frames, got '" + format + "'",
                      "data_format");
  }
  if (batch.modality != m)
    throw DataError("data modality '" + std::string(modality_name(batch.modality)) +
                    "' does not match model modality '" + std::string(modality_name(m)) + "'");
  if (m != Modality::kDiscrete && batch.dim() != ckpt.model.config.input_dim)
    throw DataError("data frames have " + std::to_string(batch.dim()) + " values, model expects " +
                    std::to_string(ckpt.model.config.input_dim));
  if (batch.size() == 0 || batch.token_count() == 0) throw DataError("evaluation data is empty");
  return batch;
}

std::vector<AblationRun> ablation_runs(int study, const RunConfig& base) {
  std::vector<AblationRun> runs;
  const auto add = [&](std::string label, auto tweak) {
    RunConfig c = base;
    c.train.checkpoint.clear();
    c.log.clear();
    tweak(c.train.objective);
    runs.push_back({std::move(label), std::move(c)});
  };
  switch (study) {
    case 1:
      add("reconstruction", [](ObjectiveConfig& o) { o.aux_mode = AuxMode::kReconstruction; });
      for (double g : {0.001, 1.0, 4.0, 8.0, 16.0}) {
        std::ostringstream label;
        label << "activity_gamma=" << g;
        add(label.str(), [g](ObjectiveConfig& o) {
          o.aux_mode = AuxMode::kActivity;
          o.gamma = g;
        });
      }
      break;
    case 2:
      add("prior=learned", [](ObjectiveConfig& o) { o.prior_mode = PriorMode::kLearned; });
      add("prior=fixed", [](ObjectiveConfig& o) { o.prior_mode = PriorMode::kFixed; });
      break;
    case 3:
      for (bool aux : {true, false})
        for (bool sb : {true, false})
          add(std::string("aux=") + (aux ? "on" : "off") + ";sb=" + (sb ? "on" : "off"),
              [aux, sb](ObjectiveConfig& o) {
                o.aux_mode = aux ? AuxMode::kReconstruction : AuxMode::kOff;
                o.stochastic_backprop = sb;
              });
      break;
    case 4:
      add("z=sampled", [](ObjectiveConfig& o) { o.z_mode = ZMode::kSampled; });
      add("z=mean", [](ObjectiveConfig& o) { o.z_mode = ZMode::kMean; });
      break;
    default:
      throw ConfigError("unknown ablation study " + std::to_string(study) + " (expected 1-4)",
                        "study");
  }
  return runs;
}

std::vector<AblationOutcome> run_ablation(int study, const RunConfig& base, std::ostream& csv,
                                          std::ostream* progress) {
  const std::vector<AblationRun> runs = ablation_runs(study, base);
  base.train.validate();
  const LoadedData data = load_data(base);
  std::vector<AblationOutcome> out;
  csv << kAblationHeader << '\n';
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (progress) *progress << "study " << study << " run " << i << ": " << runs[i].label << '\n';
    RunOutput r = run_training(runs[i].config, data, progress);
    for (const MetricRow& row : r.result.log.rows())
      csv << study << ',' << i << ',' << runs[i].label << ',' << MetricLog::format_row(row) << '\n';
    out.push_back({runs[i].label, std::move(r.result)});
  }
  return out;
}

}  // namespace vbl
