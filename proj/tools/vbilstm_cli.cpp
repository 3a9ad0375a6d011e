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


// vbilstm: train, evaluate and sample variational Bi-LSTM models.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vbilstm/vbilstm.h"

namespace {

constexpr int kExitArgument = 1;

int report(vbl_status s) {
  if (s == VBL_OK) return 0;
  std::cerr << "error: " << vbl_last_error();
  if (s == VBL_ERR_CONFIG && *vbl_last_error_key()) std::cerr << " [key: " << vbl_last_error_key() << "]";
  std::cerr << '\n';
  return s == VBL_ERR_ARGUMENT ? kExitArgument : static_cast<int>(s);
}

void print_line(const char* line, void*) { std::cout << line << '\n' << std::flush; }

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct ConfigOptions {
  std::string path;
  std::vector<std::string> sets;
  long long seed = -1;
};

void add_config_options(CLI::App* cmd, ConfigOptions& o) {
  cmd->add_option("config,--config", o.path, "Experiment config file (key = value lines)")->required();
  cmd->add_option("--set", o.sets, "Override a config key, as key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "Override the config seed");
}

// Loads the config and applies flag overrides; returns a status.
vbl_status load_config(const ConfigOptions& o, vbl_config** cfg) {
  vbl_status s = vbl_config_load(o.path.c_str(), cfg);
  if (s != VBL_OK) return s;
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      s = vbl_config_set(*cfg, kv.c_str(), "");
    } else {
      s = vbl_config_set(*cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    }
    if (s != VBL_OK) return s;
  }
  if (o.seed >= 0) s = vbl_config_set(*cfg, "seed", std::to_string(o.seed).c_str());
  return s;
}

int cmd_train(const ConfigOptions& o, const std::string& log, const std::string& ckpt, bool quiet) {
  vbl_config* cfg = nullptr;
  vbl_status s = load_config(o, &cfg);
  if (s == VBL_OK && !log.empty()) s = vbl_config_set(cfg, "log", log.c_str());
  if (s == VBL_OK && !ckpt.empty()) s = vbl_config_set(cfg, "checkpoint", ckpt.c_str());
  vbl_train_summary sum{};
  if (s == VBL_OK) s = vbl_train(cfg, quiet ? nullptr : print_line, nullptr, &sum);
  vbl_config_free(cfg);
  if (s != VBL_OK) return report(s);
  std::cout << "best_epoch " << sum.best_epoch << "\n"
            << "valid_bound_per_token " << fmt(sum.best_valid_bound_per_token) << "\n"
            << "valid_kl_per_step " << fmt(sum.valid_kl_per_step) << "\n";
  if (!std::isnan(sum.valid_bpc)) std::cout << "valid_bpc " << fmt(sum.valid_bpc) << "\n";
  if (!std::isnan(sum.test_bpc)) std::cout << "test_bpc " << fmt(sum.test_bpc) << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& format,
             const std::string& source, unsigned long long seed, const std::string& csv) {
  vbl_model* model = nullptr;
  vbl_status s = vbl_model_load(ckpt.c_str(), &model);
  if (s != VBL_OK) return report(s);
  vbl_eval_result r{};
  const vbl_z_source src = source == "prior" ? VBL_Z_PRIOR : VBL_Z_POSTERIOR;
  s = vbl_eval(model, data.c_str(), format.c_str(), src, seed, &r);
  vbl_model_free(model);
  if (s != VBL_OK) return report(s);
  std::cout << "z_source " << source << "\n"
            << "sequences " << r.sequences << "\n"
            << "tokens " << r.tokens << "\n"
            << "elbo_per_token " << fmt(r.elbo_per_token) << "\n"
            << "bound_per_token " << fmt(r.bound_per_token) << "\n"
            << "kl_per_step " << fmt(r.kl_per_step) << "\n"
            << "seq_ll " << fmt(r.seq_ll) << "\n";
  if (!std::isnan(r.bpc)) std::cout << "bpc " << fmt(r.bpc) << "\n";
  if (!std::isnan(r.perplexity)) std::cout << "ppl " << fmt(r.perplexity) << "\n";
  if (!csv.empty()) {
    std::ofstream f(csv, std::ios::binary | std::ios::trunc);
    if (!f) {
      std::cerr << "error: cannot open '" << csv << "'\n";
      return VBL_ERR_DATA;
    }
    f << "z_source,elbo_per_token,kl_per_step,bpc,ppl,seq_ll,sequences,tokens\n"
      << source << ',' << fmt(r.elbo_per_token) << ',' << fmt(r.kl_per_step) << ','
      << fmt(r.bpc) << ',' << fmt(r.perplexity) << ',' << fmt(r.seq_ll) << ',' << r.sequences
      << ',' << r.tokens << '\n';
  }
  return 0;
}

struct GenerateFlags {
  std::string ckpt, prime, prime_file, out, mode = "sample", z_mode = "mean";
  std::size_t steps = 100;
  unsigned long long seed = 0;
  bool token_ids = false;
};

int cmd_generate(const GenerateFlags& g) {
  vbl_model* model = nullptr;
  vbl_status s = vbl_model_load(g.ckpt.c_str(), &model);
  if (s != VBL_OK) return report(s);
  vbl_generate_options opts;
  vbl_generate_options_init(&opts);
  opts.steps = g.steps;
  opts.mode = g.mode == "greedy" ? VBL_EMIT_GREEDY : VBL_EMIT_SAMPLE;
  opts.z_mode = g.z_mode == "sampled" ? VBL_Z_SAMPLED : VBL_Z_MEAN;
  opts.seed = g.seed;
  opts.token_ids = g.token_ids ? 1 : 0;
  vbl_model_info info{};
  vbl_model_info_get(model, &info);
  if (info.modality == VBL_DISCRETE) {
    char* text = nullptr;
    s = vbl_generate_text(model, g.prime.c_str(), &opts, &text);
    if (s == VBL_OK) {
      if (g.out.empty()) {
        std::cout << text << '\n';
      } else {
        std::ofstream f(g.out, std::ios::binary | std::ios::trunc);
        f << text;
        if (!f) s = VBL_ERR_DATA;
      }
      vbl_string_free(text);
    }
  } else if (g.out.empty()) {
    vbl_model_free(model);
    std::cerr << "error: --out is required for frame models\n";
    return kExitArgument;
  } else {
    s = vbl_generate_frames(model, g.prime_file.empty() ? nullptr : g.prime_file.c_str(), &opts,
                            g.out.c_str());
  }
  vbl_model_free(model);
  return report(s);
}

int cmd_gradcheck(const std::string& dims, const std::string& modality, unsigned long long seed,
                  bool sign_flip) {
  vbl_gradcheck_options opts;
  vbl_gradcheck_options_init(&opts);
  if (dims == "tiny") {
    opts.hidden = 2;
    opts.latent = 1;
    opts.steps = 3;
  }
  opts.modality = modality == "binary" ? VBL_BINARY
                : modality == "continuous" ? VBL_CONTINUOUS : VBL_DISCRETE;
  opts.seed = seed;
  opts.sign_flip = sign_flip ? 1 : 0;
  char* text = nullptr;
  int passed = 0;
  const vbl_status s = vbl_gradcheck(&opts, &text, &passed);
  if (s != VBL_OK) return report(s);
  std::cout << text;
  vbl_string_free(text);
  return passed ? 0 : VBL_ERR_NUMERIC;
}

int cmd_ablate(const ConfigOptions& o, int study, const std::string& out, bool quiet) {
  vbl_config* cfg = nullptr;
  vbl_status s = load_config(o, &cfg);
  if (s == VBL_OK)
    s = vbl_ablate(cfg, study, out.c_str(), quiet ? nullptr : print_line, nullptr);
  vbl_config_free(cfg);
  if (s == VBL_OK) std::cout << "wrote " << out << '\n';
  return report(s);
}

int cmd_strip(const std::string& in, const std::string& out, const std::vector<std::string>& groups) {
  vbl_model* model = nullptr;
  vbl_status s = vbl_model_load(in.c_str(), &model);
  for (const auto& g : groups) {
    if (s != VBL_OK) break;
    std::size_t removed = 0;
    s = vbl_model_strip(model, g.c_str(), &removed);
    if (s == VBL_OK) std::cout << "removed " << removed << " tensors from " << g << '\n';
  }
  if (s == VBL_OK) s = vbl_model_save(model, out.c_str());
  vbl_model_free(model);
  return report(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational Bi-LSTM sequence models: train, evaluate, generate, check, ablate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(vbl_version()));

  // train
  ConfigOptions train_cfg;
  std::string train_log, train_ckpt;
  bool train_quiet = false;
  auto* train = app.add_subcommand("train", "Train a model from a config file");
  add_config_options(train, train_cfg);
  train->add_option("--log", train_log, "Metric CSV path (overrides the config)");
  train->add_option("--checkpoint", train_ckpt, "Checkpoint path (overrides the config)");
  train->add_flag("--quiet", train_quiet, "Do not echo metric rows");

  // eval
  std::string eval_ckpt, eval_data, eval_format = "char", eval_source = "posterior", eval_csv;
  unsigned long long eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a data file");
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--data", eval_data, "Data file")->required();
  eval->add_option("--format", eval_format, "Data format")
      ->check(CLI::IsMember({"char", "binary", "frames"}))->capture_default_str();
  eval->add_option("--z-source", eval_source, "Draw z from the posterior or the prior")
      ->check(CLI::IsMember({"posterior", "prior"}))->capture_default_str();
  eval->add_option("--seed", eval_seed, "Noise seed")->capture_default_str();
  eval->add_option("--csv", eval_csv, "Also write the metrics as CSV");

  // generate
  GenerateFlags gen_flags;
  auto* gen = app.add_subcommand("generate", "Sample from a checkpoint (backward LSTM unused)");
  gen->add_option("--checkpoint", gen_flags.ckpt, "Checkpoint file")->required();
  gen->add_option("--steps", gen_flags.steps, "Number of tokens/frames to emit")->capture_default_str();
  gen->add_option("--mode", gen_flags.mode, "Emission rule")
      ->check(CLI::IsMember({"sample", "greedy"}))->capture_default_str();
  gen->add_option("--z-mode", gen_flags.z_mode, "Use prior means or samples for z and b~")
      ->check(CLI::IsMember({"mean", "sampled"}))->capture_default_str();
  gen->add_option("--seed", gen_flags.seed, "Sampling seed")->capture_default_str();
  gen->add_option("--prime", gen_flags.prime, "Prime text (character models)");
  gen->add_option("--prime-file", gen_flags.prime_file, "Prime frames file (frame models)");
  gen->add_flag("--token-ids", gen_flags.token_ids, "Print token ids instead of text");
  gen->add_option("--out", gen_flags.out, "Output file (required for frame models)");

  // gradcheck
  std::string gc_dims = "small", gc_modality = "discrete";
  unsigned long long gc_seed = 7;
  bool gc_flip = false;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
  gc->add_option("--dims", gc_dims, "Model size")
      ->check(CLI::IsMember({"small", "tiny"}))->capture_default_str();
  gc->add_option("--modality", gc_modality, "Output modality")
      ->check(CLI::IsMember({"discrete", "binary", "continuous"}))->capture_default_str();
  gc->add_option("--seed", gc_seed, "Seed for the model, data and noise")->capture_default_str();
  gc->add_flag("--sign-flip", gc_flip, "Corrupt one gradient (the check must fail)");

  // ablate
  ConfigOptions abl_cfg;
  int abl_study = 0;
  std::string abl_out = "ablation.csv";
  bool abl_quiet = false;
  auto* abl = app.add_subcommand("ablate", "Run ablation study 1-4 and write a comparison CSV");
  abl->add_option("--study", abl_study,
                  "1: reconstruction vs activity regularization, 2: learned vs fixed prior, "
                  "3: auxiliary costs x stochastic backprop, 4: sampled vs mean z")
      ->required();
  add_config_options(abl, abl_cfg);
  abl->add_option("--out", abl_out, "Comparison CSV path")->capture_default_str();
  abl->add_flag("--quiet", abl_quiet, "Do not echo metric rows");

  // synth
  std::string syn_kind = "text", syn_out;
  std::size_t syn_n = 50000, syn_len = 4, syn_dim = 8;
  unsigned long long syn_seed = 0;
  auto* syn = app.add_subcommand("synth", "Write a deterministic synthetic dataset");
  syn->add_option("--kind", syn_kind, "text: repetition corpus, walk: random-walk frames, bits: shifting bits")
      ->check(CLI::IsMember({"text", "walk", "bits"}))->capture_default_str();
  syn->add_option("--out", syn_out, "Output path")->required();
  syn->add_option("-n", syn_n, "Characters (text) or sequences (walk, bits)")->capture_default_str();
  syn->add_option("--len", syn_len, "Run length (text) or sequence length")->capture_default_str();
  syn->add_option("--dim", syn_dim, "Alphabet size (text) or frame width")->capture_default_str();
  syn->add_option("--seed", syn_seed, "Seed")->capture_default_str();

  // strip
  std::string strip_in, strip_out;
  std::vector<std::string> strip_groups = {"bwd", "enc", "head_b", "dec_h"};
  auto* strip = app.add_subcommand("strip", "Remove training-only parameter groups from a checkpoint");
  strip->add_option("--checkpoint", strip_in, "Input checkpoint")->required();
  strip->add_option("--out", strip_out, "Output checkpoint")->required();
  strip->add_option("--group", strip_groups, "Groups to remove")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitArgument;
  }

  if (*train) return cmd_train(train_cfg, train_log, train_ckpt, train_quiet);
  if (*eval) return cmd_eval(eval_ckpt, eval_data, eval_format, eval_source, eval_seed, eval_csv);
  if (*gen) return cmd_generate(gen_flags);
  if (*gc) return cmd_gradcheck(gc_dims, gc_modality, gc_seed, gc_flip);
  if (*abl) return cmd_ablate(abl_cfg, abl_study, abl_out, abl_quiet);
  if (*syn) return report(vbl_synth(syn_kind.c_str(), syn_out.c_str(), syn_n, syn_len, syn_dim, syn_seed));
  if (*strip) return cmd_strip(strip_in, strip_out, strip_groups);
  return kExitArgument;
}
