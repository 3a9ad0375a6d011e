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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "vbilstm/vbilstm.h"

namespace fs = std::filesystem;

namespace {

struct Dir {
  fs::path path;
  Dir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("vbl-capi-" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~Dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const char* name) const { return (path / name).string(); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  vbl_string_free(s);
  return out;
}

vbl_config* small_config(const Dir& d, const std::string& data, const char* format) {
  vbl_config* cfg = nullptr;
  REQUIRE(vbl_config_new(&cfg) == VBL_OK);
  const std::vector<std::pair<const char*, std::string>> kv = {
      {"data", data},          {"data_format", format},   {"chunk", "16"},
      {"epochs", "2"},         {"batch", "8"},             {"lr", "0.01"},
      {"hidden", "6"},         {"backward_hidden", "5"},   {"latent", "2"},
      {"mlp_hidden", "6"},     {"log", d / "log.csv"},     {"checkpoint", d / "m.ckpt"}};
  for (const auto& [k, v] : kv) REQUIRE(vbl_config_set(cfg, k, v.c_str()) == VBL_OK);
  return cfg;
}

void count_line(const char*, void* user) { ++*static_cast<int*>(user); }

}  // namespace

TEST_CASE("version and error state") {
  CHECK(std::strlen(vbl_version()) > 0);
  vbl_config* cfg = nullptr;
  CHECK(vbl_config_load("/nonexistent/x.cfg", &cfg) == VBL_ERR_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(vbl_last_error_key()) == "config");
  CHECK(std::strlen(vbl_last_error()) > 0);
  CHECK(vbl_config_new(nullptr) == VBL_ERR_ARGUMENT);
  vbl_string_free(nullptr);
  vbl_config_free(nullptr);
  vbl_model_free(nullptr);
}

TEST_CASE("config get, set and dump") {
  vbl_config* cfg = nullptr;
  REQUIRE(vbl_config_new(&cfg) == VBL_OK);
  CHECK(vbl_config_set(cfg, "latent", "5") == VBL_OK);
  char* v = nullptr;
  REQUIRE(vbl_config_get(cfg, "latent", &v) == VBL_OK);
  CHECK(take(v) == "5");
  CHECK(vbl_config_set(cfg, "latnet", "5") == VBL_ERR_CONFIG);
  CHECK(std::string(vbl_last_error_key()) == "latnet");
  CHECK(vbl_config_set(cfg, "aux", "sometimes") == VBL_ERR_CONFIG);
  CHECK(std::string(vbl_last_error_key()) == "aux");
  char* text = nullptr;
  REQUIRE(vbl_config_dump(cfg, &text) == VBL_OK);
  CHECK(take(text).find("latent = 5\n") != std::string::npos);
  vbl_config_free(cfg);
}

TEST_CASE("train, inspect, evaluate, strip and generate a character model") {
  Dir d;
  REQUIRE(vbl_synth("text", (d / "t.txt").c_str(), 2000, 4, 8, 0) == VBL_OK);
  vbl_config* cfg = small_config(d, d / "t.txt", "char");
  int lines = 0;
  vbl_train_summary s{};
  REQUIRE(vbl_train(cfg, count_line, &lines, &s) == VBL_OK);
  CHECK(lines > 0);
  CHECK(s.epochs_run == 2);
  CHECK(s.best_epoch >= 1);
  CHECK(std::isfinite(s.valid_bpc));
  CHECK(std::isfinite(s.test_bpc));
  CHECK(fs::exists(d / "log.csv"));
  vbl_config_free(cfg);

  vbl_model* m = nullptr;
  REQUIRE(vbl_model_load((d / "m.ckpt").c_str(), &m) == VBL_OK);
  vbl_model_info info{};
  REQUIRE(vbl_model_info_get(m, &info) == VBL_OK);
  CHECK(info.modality == VBL_DISCRETE);
  CHECK(info.input_dim == 9);
  CHECK(info.hidden == 6);
  CHECK(info.epoch == s.best_epoch);

  vbl_eval_result post{}, prior{};
  REQUIRE(vbl_eval(m, (d / "t.txt").c_str(), "char", VBL_Z_POSTERIOR, 1, &post) == VBL_OK);
  REQUIRE(vbl_eval(m, (d / "t.txt").c_str(), "char", VBL_Z_PRIOR, 1, &prior) == VBL_OK);
  CHECK(post.tokens == 2000);
  CHECK(post.sequences == 125);
  CHECK(post.bpc > 0);
  CHECK(prior.kl_per_step == 0.0);
  CHECK(vbl_eval(m, (d / "t.txt").c_str(), "frames", VBL_Z_PRIOR, 1, &prior) == VBL_ERR_DATA);

  vbl_generate_options o;
  vbl_generate_options_init(&o);
  CHECK(o.steps == 100);
  o.steps = 24;
  o.seed = 3;
  char* before = nullptr;
  REQUIRE(vbl_generate_text(m, "abc", &o, &before) == VBL_OK);
  const std::string text = take(before);
  CHECK(text.rfind("abc", 0) == 0);
  o.token_ids = 1;
  char* ids = nullptr;
  REQUIRE(vbl_generate_text(m, "abc", &o, &ids) == VBL_OK);
  CHECK(take(ids).rfind("1 2 3 ", 0) == 0);
  o.token_ids = 0;

  for (const char* g : {"bwd", "enc", "head_b", "dec_h"}) {
    size_t removed = 0;
    REQUIRE(vbl_model_strip(m, g, &removed) == VBL_OK);
    CHECK(removed > 0);
  }
  char* after = nullptr;
  REQUIRE(vbl_generate_text(m, "abc", &o, &after) == VBL_OK);
  CHECK(take(after) == text);
  REQUIRE(vbl_model_save(m, (d / "lean.ckpt").c_str()) == VBL_OK);
  CHECK(fs::file_size(d / "lean.ckpt") < fs::file_size(d / "m.ckpt"));
  CHECK(vbl_eval(m, (d / "t.txt").c_str(), "char", VBL_Z_POSTERIOR, 1, &post) == VBL_ERR_DATA);
  vbl_model_free(m);
}

TEST_CASE("frame models generate to files") {
  Dir d;
  REQUIRE(vbl_synth("bits", (d / "b.vblb").c_str(), 40, 6, 4, 2) == VBL_OK);
  vbl_config* cfg = small_config(d, d / "b.vblb", "binary");
  REQUIRE(vbl_train(cfg, nullptr, nullptr, nullptr) == VBL_OK);
  vbl_config_free(cfg);
  vbl_model* m = nullptr;
  REQUIRE(vbl_model_load((d / "m.ckpt").c_str(), &m) == VBL_OK);
  vbl_generate_options o;
  vbl_generate_options_init(&o);
  o.steps = 5;
  REQUIRE(vbl_generate_frames(m, (d / "b.vblb").c_str(), &o, (d / "out.vblb").c_str()) == VBL_OK);
  // Header plus 11 frames of 4 one-byte values.
  CHECK(fs::file_size(d / "out.vblb") == 32 + 11 * 4);
  char* t = nullptr;
  CHECK(vbl_generate_text(m, "", &o, &t) == VBL_ERR_DATA);
  vbl_model_free(m);
}

TEST_CASE("bad inputs map to status codes") {
  Dir d;
  vbl_model* m = nullptr;
  CHECK(vbl_model_load((d / "none.ckpt").c_str(), &m) == VBL_ERR_DATA);
  CHECK(vbl_synth("noise", (d / "x").c_str(), 1, 1, 1, 0) == VBL_ERR_ARGUMENT);
  vbl_config* cfg = nullptr;
  REQUIRE(vbl_config_new(&cfg) == VBL_OK);
  REQUIRE(vbl_config_set(cfg, "data", (d / "missing.txt").c_str()) == VBL_OK);
  CHECK(vbl_train(cfg, nullptr, nullptr, nullptr) == VBL_ERR_DATA);
  REQUIRE(vbl_config_set(cfg, "lr", "0") == VBL_OK);
  CHECK(vbl_ablate(cfg, 9, (d / "a.csv").c_str(), nullptr, nullptr) == VBL_ERR_CONFIG);
  vbl_config_free(cfg);
}

TEST_CASE("gradient check through the C interface") {
  vbl_gradcheck_options o;
  vbl_gradcheck_options_init(&o);
  o.steps = 2;
  char* report = nullptr;
  int passed = 0;
  REQUIRE(vbl_gradcheck(&o, &report, &passed) == VBL_OK);
  const std::string r = take(report);
  CHECK(passed == 1);
  CHECK(r.find("fwd.U") != std::string::npos);
  CHECK(r.find("PASS") != std::string::npos);
  o.sign_flip = 1;
  REQUIRE(vbl_gradcheck(&o, &report, &passed) == VBL_OK);
  CHECK(passed == 0);
  CHECK(take(report).find("FAIL") != std::string::npos);
}
