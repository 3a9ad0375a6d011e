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


#include "vbilstm/vbilstm.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <new>
#include <sstream>
#include <string>

#include "vbl/checkpoint.hpp"
#include "vbl/config.hpp"
#include "vbl/errors.hpp"
#include "vbl/generate.hpp"
#include "vbl/gradcheck.hpp"
#include "vbl/pipeline.hpp"

struct vbl_config {
  vbl::RunConfig cfg;
};

struct vbl_model {
  vbl::Checkpoint ckpt;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_key;

vbl_status fail(vbl_status s, std::string msg, std::string key = {}) {
  g_last_error = std::move(msg);
  g_last_key = std::move(key);
  return s;
}

// Runs `body`, mapping library exceptions onto status codes.
template <typename F>
vbl_status guarded(F&& body) {
  g_last_error.clear();
  g_last_key.clear();
  try {
    body();
    return VBL_OK;
  } catch (const vbl::ConfigError& e) {
    return fail(VBL_ERR_CONFIG, e.what(), e.key());
  } catch (const vbl::DataError& e) {
    return fail(VBL_ERR_DATA, e.what());
  } catch (const vbl::ShapeError& e) {
    return fail(VBL_ERR_DATA, e.what());
  } catch (const vbl::NumericError& e) {
    return fail(VBL_ERR_NUMERIC, e.what());
  } catch (const vbl::DomainError& e) {
    return fail(VBL_ERR_NUMERIC, e.what());
  } catch (const std::bad_alloc&) {
    return fail(VBL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(VBL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(VBL_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

#define VBL_REQUIRE(cond, msg) \
  do {                         \
    if (!(cond)) return fail(VBL_ERR_ARGUMENT, msg); \
  } while (0)

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Generation-time prime and output conversions.
const char kReplacement[] = "\xEF\xBF\xBD";

std::string render_tokens(const vbl::Frames& frames, const vbl::Vocab& vocab, bool ids) {
  std::string out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto tok = static_cast<std::size_t>(frames[i][0]);
    if (ids) {
      if (i) out += ' ';
      out += std::to_string(tok);
    } else {
      out += tok == vbl::Vocab::kReserved ? std::string(kReplacement) : vocab.symbol(tok);
    }
  }
  return out;
}

vbl::GenerateOptions generate_options(const vbl_generate_options* o, const vbl::Checkpoint& c) {
  vbl::GenerateOptions g;
  g.steps = o->steps;
  g.mode = o->mode == VBL_EMIT_GREEDY ? vbl::EmitMode::kGreedy : vbl::EmitMode::kSample;
  g.z_mode = o->z_mode == VBL_Z_SAMPLED ? vbl::ZMode::kSampled : vbl::ZMode::kMean;
  g.prior_mode = c.objective.prior_mode;
  g.seed = o->seed;
  return g;
}

}  // namespace

extern "C" {

const char* vbl_version(void) { return "1.0.0"; }
const char* vbl_last_error(void) { return g_last_error.c_str(); }
const char* vbl_last_error_key(void) { return g_last_key.c_str(); }
void vbl_string_free(char* s) { std::free(s); }

// ---- configuration -------------------------------------------------------

vbl_status vbl_config_new(vbl_config** out) {
  VBL_REQUIRE(out, "vbl_config_new: null output");
  return guarded([&] { *out = new vbl_config{}; });
}

vbl_status vbl_config_load(const char* path, vbl_config** out) {
  VBL_REQUIRE(path && out, "vbl_config_load: null argument");
  return guarded([&] { *out = new vbl_config{vbl::RunConfig::load(path)}; });
}

vbl_status vbl_config_set(vbl_config* cfg, const char* key, const char* value) {
  VBL_REQUIRE(cfg && key && value, "vbl_config_set: null argument");
  return guarded([&] { cfg->cfg.set(key, value); });
}

vbl_status vbl_config_get(const vbl_config* cfg, const char* key, char** value) {
  VBL_REQUIRE(cfg && key && value, "vbl_config_get: null argument");
  return guarded([&] { *value = dup_string(cfg->cfg.get(key)); });
}

vbl_status vbl_config_dump(const vbl_config* cfg, char** text) {
  VBL_REQUIRE(cfg && text, "vbl_config_dump: null argument");
  return guarded([&] { *text = dup_string(cfg->cfg.dump()); });
}

void vbl_config_free(vbl_config* cfg) { delete cfg; }

// ---- training ------------------------------------------------------------

namespace {

class CallbackBuf : public std::stringbuf {
 public:
  CallbackBuf(vbl_line_callback cb, void* user) : cb_(cb), user_(user) {}

 protected:
  int sync() override {
    std::string s = str();
    std::size_t start = 0;
    for (std::size_t nl; (nl = s.find('\n', start)) != std::string::npos; start = nl + 1)
      if (cb_) cb_(s.substr(start, nl - start).c_str(), user_);
    str(s.substr(start));
    return 0;
  }

 private:
  vbl_line_callback cb_;
  void* user_;
};

}  // namespace

vbl_status vbl_train(const vbl_config* cfg, vbl_line_callback progress, void* user,
                     vbl_train_summary* summary) {
  VBL_REQUIRE(cfg, "vbl_train: null config");
  return guarded([&] {
    CallbackBuf buf(progress, user);
    std::ostream os(&buf);
    const vbl::RunOutput run = vbl::run_training(cfg->cfg, progress ? &os : nullptr);
    os.flush();
    if (!summary) return;
    const vbl::MetricLog& log = run.result.log;
    summary->best_epoch = run.result.best_epoch;
    summary->epochs_run = log.last("train") ? log.last("train")->epoch : 0;
    summary->steps = run.result.steps;
    summary->best_valid_bound_per_token = run.result.best_valid;
    summary->valid_bpc = kNaN;
    summary->valid_kl_per_step = kNaN;
    for (const auto& row : log.rows())
      if (row.split == "valid" && row.epoch == run.result.best_epoch) {
        summary->valid_bpc = row.bpc;
        summary->valid_kl_per_step = row.kl_per_step;
      }
    const vbl::MetricRow* test = log.last("test");
    summary->test_bpc = test ? test->bpc : kNaN;
  });
}

// ---- models --------------------------------------------------------------

vbl_status vbl_model_load(const char* path, vbl_model** out) {
  VBL_REQUIRE(path && out, "vbl_model_load: null argument");
  return guarded([&] { *out = new vbl_model{vbl::load_checkpoint(path)}; });
}

vbl_status vbl_model_save(const vbl_model* model, const char* path) {
  VBL_REQUIRE(model && path, "vbl_model_save: null argument");
  return guarded([&] { vbl::save_checkpoint(path, model->ckpt); });
}

vbl_status vbl_model_strip(vbl_model* model, const char* group, size_t* removed) {
  VBL_REQUIRE(model && group, "vbl_model_strip: null argument");
  return guarded([&] {
    const std::size_t n = model->ckpt.model.params.erase_group(group);
    if (removed) *removed = n;
  });
}

vbl_status vbl_model_info_get(const vbl_model* model, vbl_model_info* info) {
  VBL_REQUIRE(model && info, "vbl_model_info_get: null argument");
  const vbl::ModelConfig& c = model->ckpt.model.config;
  info->modality = static_cast<vbl_modality>(static_cast<int>(c.modality));
  info->input_dim = c.input_dim;
  info->hidden = c.hidden;
  info->backward_hidden = c.backward_hidden;
  info->latent = c.latent;
  info->mlp_hidden = c.mlp_hidden;
  info->tensors = model->ckpt.model.params.size();
  info->values = model->ckpt.model.params.numel();
  info->epoch = model->ckpt.epoch;
  return VBL_OK;
}

void vbl_model_free(vbl_model* model) { delete model; }

// ---- evaluation ----------------------------------------------------------

vbl_status vbl_eval(const vbl_model* model, const char* data_path, const char* format,
                    vbl_z_source source, uint64_t seed, vbl_eval_result* out) {
  VBL_REQUIRE(model && data_path && format && out, "vbl_eval: null argument");
  return guarded([&] {
    const vbl::Checkpoint& c = model->ckpt;
    const vbl::SequenceBatch batch = vbl::load_eval_data(data_path, format, c);
    const bool prior = source == VBL_Z_PRIOR;
    vbl::ObjectiveConfig obj = c.objective;
    if (prior) obj.z_mode = vbl::ZMode::kMean;
    const vbl::EvalResult r = vbl::evaluate_likelihood(
        c.model, batch, prior ? vbl::ZSource::kPrior : vbl::ZSource::kPosterior, obj, seed);
    const vbl::MetricRow row = vbl::metric_row(r, c.model.config.modality, 0, "eval", !prior);
    out->elbo_per_token = r.elbo_per_token();
    out->bound_per_token = r.bound_per_token();
    out->kl_per_step = prior ? 0.0 : r.kl_per_step();
    out->bpc = row.bpc;
    out->perplexity = row.ppl;
    out->seq_ll = row.seq_ll;
    out->sequences = r.sequences.size();
    out->tokens = r.tokens;
  });
}

// ---- generation ----------------------------------------------------------

void vbl_generate_options_init(vbl_generate_options* opts) {
  if (!opts) return;
  opts->steps = 100;
  opts->mode = VBL_EMIT_SAMPLE;
  opts->z_mode = VBL_Z_MEAN;
  opts->seed = 0;
  opts->token_ids = 0;
}

vbl_status vbl_generate_text(const vbl_model* model, const char* prime,
                             const vbl_generate_options* opts, char** out) {
  VBL_REQUIRE(model && opts && out, "vbl_generate_text: null argument");
  return guarded([&] {
    const vbl::Checkpoint& c = model->ckpt;
    if (c.model.config.modality != vbl::Modality::kDiscrete || !c.vocab)
      throw vbl::DataError("text generation needs a character model");
    vbl::Frames frames;
    for (const auto& ch : vbl::utf8_split(prime ? prime : ""))
      frames.push_back({static_cast<double>(c.vocab->index(ch))});
    const vbl::Frames gen = vbl::generate(c.model, frames, generate_options(opts, c));
    *out = dup_string(render_tokens(gen, *c.vocab, opts->token_ids != 0));
  });
}

vbl_status vbl_generate_frames(const vbl_model* model, const char* prime_path,
                               const vbl_generate_options* opts, const char* out_path) {
  VBL_REQUIRE(model && opts && out_path, "vbl_generate_frames: null argument");
  return guarded([&] {
    const vbl::Checkpoint& c = model->ckpt;
    const vbl::Modality m = c.model.config.modality;
    if (m == vbl::Modality::kDiscrete)
      throw vbl::DataError("frame generation needs a binary or continuous model");
    const std::size_t d = c.model.config.input_dim;
    vbl::Frames prime;
    if (prime_path && *prime_path) {
      const vbl::SequenceBatch p = vbl::load_eval_data(
          prime_path, m == vbl::Modality::kBinary ? "binary" : "frames", c);
      for (std::size_t t = 0; t < p.lengths[0]; ++t) {
        std::vector<double> f(d);
        for (std::size_t k = 0; k < d; ++k) f[k] = p.value(0, t, k);
        prime.push_back(std::move(f));
      }
    }
    vbl::Frames gen = vbl::generate(c.model, prime, generate_options(opts, c));
    if (c.standardizer)
      for (auto& f : gen)
        for (std::size_t k = 0; k < d; ++k)
          f[k] = f[k] * c.standardizer->stddev[k] + c.standardizer->mean[k];
    std::vector<double> flat;
    for (const auto& f : gen) flat.insert(flat.end(), f.begin(), f.end());
    const vbl::SequenceBatch out = vbl::make_batch(m, d, {flat});
    if (m == vbl::Modality::kBinary)
      vbl::save_binary_sequences(out_path, out, vbl::BitEncoding::kBytes);
    else
      vbl::save_frame_sequences(out_path, out);
  });
}

// ---- diagnostics ---------------------------------------------------------

void vbl_gradcheck_options_init(vbl_gradcheck_options* opts) {
  if (!opts) return;
  opts->modality = VBL_DISCRETE;
  opts->hidden = 3;
  opts->latent = 2;
  opts->steps = 4;
  opts->batch = 2;
  opts->seed = 7;
  opts->sign_flip = 0;
}

vbl_status vbl_gradcheck(const vbl_gradcheck_options* opts, char** report, int* passed) {
  VBL_REQUIRE(opts && report && passed, "vbl_gradcheck: null argument");
  VBL_REQUIRE(opts->hidden > 0 && opts->latent > 0 && opts->steps > 0 && opts->batch > 0,
              "vbl_gradcheck: dimensions must be positive");
  return guarded([&] {
    vbl::GradcheckConfig g;
    g.modality = static_cast<vbl::Modality>(static_cast<int>(opts->modality));
    g.hidden = g.backward_hidden = g.mlp_hidden = opts->hidden;
    g.latent = opts->latent;
    g.steps = opts->steps;
    g.batch = opts->batch;
    g.seed = opts->seed;
    g.sign_flip = opts->sign_flip != 0;
    const vbl::GradcheckReport r = vbl::run_gradcheck(g);
    std::ostringstream os;
    os.precision(3);
    os << std::scientific;
    os << std::left << std::setw(14) << "parameter" << std::right << std::setw(8) << "values"
       << std::setw(14) << "max_rel_err" << std::setw(14) << "max_abs_err" << '\n';
    for (const auto& p : r.params)
      os << std::left << std::setw(14) << p.name << std::right << std::setw(8) << p.count
         << std::setw(14) << p.max_rel_err << std::setw(14) << p.max_abs_err << '\n';
    os << "group max_rel_err:";
    for (const auto& [group, err] : r.groups()) os << ' ' << group << '=' << err;
    os << '\n';
    os << "overall max_rel_err " << r.max_rel_err << " (tolerance " << g.tolerance << ", eps "
       << g.eps << ")\n";
    os << (r.passed ? "PASS" : "FAIL") << '\n';
    *report = dup_string(os.str());
    *passed = r.passed ? 1 : 0;
  });
}

vbl_status vbl_ablate(const vbl_config* cfg, int study, const char* csv_path,
                      vbl_line_callback progress, void* user) {
  VBL_REQUIRE(cfg && csv_path, "vbl_ablate: null argument");
  return guarded([&] {
    vbl::ablation_runs(study, cfg->cfg);  // validates the study id before any work
    std::ostringstream csv;
    CallbackBuf buf(progress, user);
    std::ostream os(&buf);
    vbl::run_ablation(study, cfg->cfg, csv, progress ? &os : nullptr);
    os.flush();
    std::ofstream f(csv_path, std::ios::binary | std::ios::trunc);
    if (!f) throw vbl::DataError(std::string("cannot open '") + csv_path + "' for writing");
    f << csv.str();
  });
}

vbl_status vbl_synth(const char* kind, const char* path, size_t n, size_t len, size_t dim,
                     uint64_t seed) {
  VBL_REQUIRE(kind && path, "vbl_synth: null argument");
  VBL_REQUIRE(n > 0 && len > 0 && dim > 0, "vbl_synth: sizes must be positive");
  const std::string k = kind;
  VBL_REQUIRE(k == "text" || k == "walk" || k == "bits", "vbl_synth: kind must be text, walk or bits");
  return guarded([&] {
    if (k == "text") {
      const std::string text = vbl::synth_repetition_text(n, dim, len, seed);
      std::ofstream f(path, std::ios::binary | std::ios::trunc);
      if (!f) throw vbl::DataError(std::string("cannot open '") + path + "' for writing");
      f << text;
    } else if (k == "walk") {
      vbl::save_frame_sequences(path, vbl::synth_random_walk(n, len, dim, seed));
    } else {
      vbl::save_binary_sequences(path, vbl::synth_shift_bits(n, len, dim, seed),
                                 vbl::BitEncoding::kPacked);
    }
  });
}

}  // extern "C"
