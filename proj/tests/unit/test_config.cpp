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


#include <fstream>
#include <sstream>

#include "doctest.h"
#include "support/temp_dir.hpp"
#include "vbl/config.hpp"
#include "vbl/errors.hpp"
#include "vbl/pipeline.hpp"

using namespace vbl;
using vbl::testing::TempDir;

namespace {

std::string error_key(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("parse a character-model config") {
  const RunConfig c = RunConfig::parse(R"(
# character model
data = corpus.txt
chunk = 100        # characters per sequence
split = 0.9, 0.05, 0.05
hidden = 64
latent = 16
lr = 0.002
alpha = 0.5
beta = 2
prior = fixed
z_mode = mean
stochastic_backprop = off
sb_prob = 0.25
log_wall_time = on
)");
  CHECK(c.data == "corpus.txt");
  CHECK(c.chunk == 100);
  CHECK(c.split.train == 0.9);
  CHECK(c.split.test == 0.05);
  CHECK(c.model.hidden == 64);
  CHECK(c.model.latent == 16);
  CHECK(c.train.lr == 0.002);
  CHECK(c.train.objective.alpha == 0.5);
  CHECK(c.train.objective.beta == 2);
  CHECK(c.train.objective.prior_mode == PriorMode::kFixed);
  CHECK(c.train.objective.z_mode == ZMode::kMean);
  CHECK_FALSE(c.train.objective.stochastic_backprop);
  CHECK(c.train.objective.sb_prob == 0.25);
  CHECK(c.train.log_wall_time);
  CHECK(c.modality() == Modality::kDiscrete);
  // Unset keys keep their defaults.
  CHECK(c.train.epochs == TrainConfig{}.epochs);
  CHECK(c.model.backward_hidden == ModelConfig{}.backward_hidden);
}

TEST_CASE("dump and parse round-trip every key") {
  RunConfig c;
  c.set("data", "x.vblf");
  c.set("data_format", "frames");
  c.set("gamma", "4");
  c.set("aux", "activity");
  c.set("sigma_min", "0.3");
  const RunConfig back = RunConfig::parse(c.dump());
  CHECK(back.dump() == c.dump());
  CHECK(back.modality() == Modality::kContinuous);
  for (const auto& k : RunConfig::keys()) CHECK_NOTHROW(c.get(k));
  CHECK(RunConfig::keys().size() == 30);
}

TEST_CASE("config errors name the offending key") {
  CHECK(error_key([] { RunConfig::parse("hiden = 3\n"); }) == "hiden");
  CHECK(error_key([] { RunConfig::parse("lr = fast\n"); }) == "lr");
  CHECK(error_key([] { RunConfig::parse("batch = -3\n"); }) == "batch");
  CHECK(error_key([] { RunConfig::parse("prior = flat\n"); }) == "prior");
  CHECK(error_key([] { RunConfig::parse("split = 0.5,0.5\n"); }) == "split");
  CHECK(error_key([] { RunConfig::parse("standardize = maybe\n"); }) == "standardize");
  CHECK(error_key([] { RunConfig::parse("data_format = wav\n"); }) == "data_format");
  CHECK(error_key([] { RunConfig::parse("just words\n"); }) == "just words");
  CHECK(error_key([] { RunConfig::load("/nonexistent/run.cfg"); }) == "config");
  CHECK(error_key([] { RunConfig().get("nope"); }) == "nope");
  CHECK(error_key([] { split_assignment("novalue"); }) == "novalue");
  const auto [k, v] = split_assignment("lr=0.5");
  CHECK(k == "lr");
  CHECK(v == "0.5");
}

TEST_CASE("loading data for each format") {
  TempDir dir;
  {
    std::ofstream(dir / "t.txt") << synth_repetition_text(400);
  }
  RunConfig c;
  c.data = (dir / "t.txt").string();
  c.chunk = 10;
  const LoadedData text = load_data(c);
  CHECK(text.vocab.has_value());
  CHECK(text.splits.train.size() == 32);
  const Model m = build_model(c, text);
  CHECK(m.config.input_dim == text.vocab->size());
  CHECK(m.config.modality == Modality::kDiscrete);

  save_frame_sequences(dir / "w.vblf", synth_random_walk(10, 5, 3, 1));
  c.data = (dir / "w.vblf").string();
  c.data_format = "frames";
  c.standardize = true;
  const LoadedData frames = load_data(c);
  CHECK(frames.standardizer.has_value());
  CHECK(build_model(c, frames).config.input_dim == 3);

  c.data = (dir / "missing.vblb").string();
  c.data_format = "binary";
  CHECK_THROWS_AS(load_data(c), DataError);
}

TEST_CASE("evaluation data must match the checkpoint") {
  TempDir dir;
  Checkpoint ck;
  ModelConfig mc;
  mc.modality = Modality::kContinuous;
  mc.input_dim = 3;
  ck.model = Model::init(mc, 1);
  save_frame_sequences(dir / "ok.vblf", synth_random_walk(2, 4, 3, 1));
  save_frame_sequences(dir / "wide.vblf", synth_random_walk(2, 4, 5, 1));
  save_binary_sequences(dir / "b.vblb", synth_shift_bits(2, 4, 3, 1), BitEncoding::kBytes);
  CHECK(load_eval_data(dir / "ok.vblf", "frames", ck).size() == 2);
  CHECK_THROWS_AS(load_eval_data(dir / "wide.vblf", "frames", ck), DataError);
  CHECK_THROWS_AS(load_eval_data(dir / "b.vblb", "binary", ck), DataError);
}

TEST_CASE("ablation studies enumerate their runs") {
  RunConfig base;
  base.log = "x.csv";
  base.train.checkpoint = "x.ckpt";
  const auto s1 = ablation_runs(1, base);
  REQUIRE(s1.size() == 6);
  CHECK(s1[0].label == "reconstruction");
  CHECK(s1[0].config.train.objective.aux_mode == AuxMode::kReconstruction);
  CHECK(s1[3].label == "activity_gamma=4");
  CHECK(s1[3].config.train.objective.aux_mode == AuxMode::kActivity);
  CHECK(s1[3].config.train.objective.gamma == 4);
  for (const auto& r : s1) {
    CHECK(r.config.log.empty());
    CHECK(r.config.train.checkpoint.empty());
    CHECK(r.config.train.seed == base.train.seed);
  }
  CHECK(ablation_runs(2, base).size() == 2);
  const auto s3 = ablation_runs(3, base);
  REQUIRE(s3.size() == 4);
  CHECK(s3[3].config.train.objective.aux_mode == AuxMode::kOff);
  CHECK_FALSE(s3[3].config.train.objective.stochastic_backprop);
  CHECK(ablation_runs(4, base)[1].config.train.objective.z_mode == ZMode::kMean);
  CHECK_THROWS_AS(ablation_runs(5, base), ConfigError);
}
