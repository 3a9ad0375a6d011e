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


#include "vbl/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vbl/errors.hpp"

namespace vbl {

namespace {

constexpr std::string_view kMagic = "VBLSTM-CKPT 1";

using nlohmann::json;

json config_json(const ModelConfig& c) {
  return {{"modality", modality_name(c.modality)},
          {"input_dim", c.input_dim},
          {"hidden", c.hidden},
          {"backward_hidden", c.backward_hidden},
          {"latent", c.latent},
          {"mlp_hidden", c.mlp_hidden},
          {"sigma_min", c.sigma_min},
          {"leaky_slope", c.leaky_slope}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.modality = parse_modality(j.at("modality").get<std::string>());
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.backward_hidden = j.at("backward_hidden").get<std::size_t>();
  c.latent = j.at("latent").get<std::size_t>();
  c.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
  c.sigma_min = j.at("sigma_min").get<double>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  return c;
}

json objective_json(const ObjectiveConfig& o) {
  return {{"alpha", o.alpha},
          {"beta", o.beta},
          {"sb_prob", o.sb_prob},
          {"stochastic_backprop", o.stochastic_backprop},
          {"prior", prior_mode_name(o.prior_mode)},
          {"z_mode", z_mode_name(o.z_mode)},
          {"aux", aux_mode_name(o.aux_mode)},
          {"gamma", o.gamma}};
}

ObjectiveConfig objective_from(const json& j) {
  ObjectiveConfig o;
  o.alpha = j.at("alpha").get<double>();
  o.beta = j.at("beta").get<double>();
  o.sb_prob = j.at("sb_prob").get<double>();
  o.stochastic_backprop = j.at("stochastic_backprop").get<bool>();
  o.prior_mode = parse_prior_mode(j.at("prior").get<std::string>());
  o.z_mode = parse_z_mode(j.at("z_mode").get<std::string>());
  o.aux_mode = parse_aux_mode(j.at("aux").get<std::string>());
  o.gamma = j.at("gamma").get<double>();
  return o;
}

void put_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string checkpoint_bytes(const Checkpoint& ckpt) {
  json header;
  header["config"] = config_json(ckpt.model.config);
  header["objective"] = objective_json(ckpt.objective);
  header["vocab"] = ckpt.vocab ? json(ckpt.vocab->symbols()) : json(nullptr);
  header["standardizer"] = ckpt.standardizer
      ? json{{"mean", ckpt.standardizer->mean}, {"stddev", ckpt.standardizer->stddev}}
      : json(nullptr);
  header["chunk"] = ckpt.chunk;
  header["epoch"] = ckpt.epoch;
  json table = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : ckpt.model.params.entries()) {
    table.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel();
  }
  header["tensors"] = table;
  const std::string text = header.dump();

  std::string out;
  out.reserve(text.size() + 32 + offset * 8);
  out += kMagic;
  out += '\n';
  out += std::to_string(text.size());
  out += '\n';
  out += text;
  out += '\n';
  for (const auto& [name, t] : ckpt.model.params.entries())
    for (double v : t.data()) put_f64(out, v);
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  std::size_t pos = bytes.find('\n');
  if (pos == std::string::npos || bytes.compare(0, pos, kMagic) != 0)
    throw DataError("not a checkpoint file (bad magic line)");
  const std::size_t len_end = bytes.find('\n', pos + 1);
  if (len_end == std::string::npos) throw DataError("truncated checkpoint header");
  std::size_t header_len = 0;
  try {
    header_len = std::stoull(bytes.substr(pos + 1, len_end - pos - 1));
  } catch (const std::exception&) {
    throw DataError("malformed checkpoint header length");
  }
  const std::size_t header_begin = len_end + 1;
  if (header_begin + header_len + 1 > bytes.size() || bytes[header_begin + header_len] != '\n')
    throw DataError("truncated checkpoint header");

  Checkpoint ckpt;
  std::size_t payload_begin = header_begin + header_len + 1;
  try {
    const json header = json::parse(bytes.substr(header_begin, header_len));
    ckpt.model.config = config_from(header.at("config"));
    ckpt.objective = objective_from(header.at("objective"));
    if (!header.at("vocab").is_null())
      ckpt.vocab = Vocab::from_symbols(header.at("vocab").get<std::vector<std::string>>());
    if (!header.at("standardizer").is_null())
      ckpt.standardizer = Standardizer{header["standardizer"].at("mean").get<std::vector<double>>(),
                                       header["standardizer"].at("stddev").get<std::vector<double>>()};
    ckpt.chunk = header.at("chunk").get<std::size_t>();
    ckpt.epoch = header.at("epoch").get<std::size_t>();
    const auto* payload = reinterpret_cast<const unsigned char*>(bytes.data()) + payload_begin;
    const std::size_t n_values = (bytes.size() - payload_begin) / 8;
    if ((bytes.size() - payload_begin) % 8 != 0) throw DataError("checkpoint payload is not f64-aligned");
    for (const auto& entry : header.at("tensors")) {
      const Shape shape = entry.at("shape").get<Shape>();
      const std::size_t offset = entry.at("offset").get<std::size_t>();
      const std::size_t n = shape_numel(shape);
      if (offset + n > n_values) throw DataError("checkpoint payload is truncated");
      Tensor t(shape);
      for (std::size_t i = 0; i < n; ++i) t[i] = get_f64(payload + 8 * (offset + i));
      ckpt.model.params.add(entry.at("name").get<std::string>(), std::move(t));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  ckpt.model.config.validate();
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = checkpoint_bytes(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace vbl
