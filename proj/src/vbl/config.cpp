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


#include "vbl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vbl/errors.hpp"
#include "vbl/objective.hpp"

namespace vbl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError("key '" + key + "' expects a non-negative integer, got '" + v + "'", key);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'", key);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "' expects on/off, got '" + v + "'", key);
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename Parse>
auto keyed(const std::string& key, Parse parse) {
  try {
    return parse();
  } catch (const ConfigError& e) {
    if (e.key() == key) throw;
    throw ConfigError(e.what(), key);
  } catch (const Error& e) {
    throw ConfigError(e.what(), key);
  }
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "data",        "data_format",   "chunk",       "split",       "standardize",
      "lr",          "batch",         "epochs",      "clip",        "seed",
      "patience",    "bptt",          "hidden",      "backward_hidden", "latent",
      "mlp_hidden",  "alpha",         "beta",        "sb_prob",     "stochastic_backprop",
      "prior",       "z_mode",        "aux",         "gamma",       "sigma_min",
      "leaky_slope", "check_finite",  "checkpoint",  "log",         "log_wall_time"};
  return k;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  ObjectiveConfig& o = train.objective;
  if (key == "data") data = v;
  else if (key == "data_format") {
    if (v != "char" && v != "binary" && v != "frames")
      throw ConfigError("data_format must be char, binary or frames, got '" + v + "'", key);
    data_format = v;
  } else if (key == "chunk") chunk = to_size(key, v);
  else if (key == "split") {
    std::vector<double> parts;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(to_double(key, trim(item)));
    if (parts.size() != 3 || parts[0] < 0 || parts[1] < 0 || parts[2] < 0 ||
        std::abs(parts[0] + parts[1] + parts[2] - 1.0) > 1e-9)
      throw ConfigError("split expects three non-negative fractions summing to 1", key);
    split = {parts[0], parts[1], parts[2]};
  } else if (key == "standardize") standardize = to_bool(key, v);
  else if (key == "lr") train.lr = to_double(key, v);
  else if (key == "batch") train.batch = to_size(key, v);
  else if (key == "epochs") train.epochs = to_size(key, v);
  else if (key == "clip") train.clip = to_double(key, v);
  else if (key == "seed") train.seed = to_size(key, v);
  else if (key == "patience") train.patience = to_size(key, v);
  else if (key == "bptt") train.bptt = to_size(key, v);
  else if (key == "hidden") model.hidden = to_size(key, v);
  else if (key == "backward_hidden") model.backward_hidden = to_size(key, v);
  else if (key == "latent") model.latent = to_size(key, v);
  else if (key == "mlp_hidden") model.mlp_hidden = to_size(key, v);
  else if (key == "alpha") o.alpha = to_double(key, v);
  else if (key == "beta") o.beta = to_double(key, v);
  else if (key == "sb_prob") o.sb_prob = to_double(key, v);
  else if (key == "stochastic_backprop") o.stochastic_backprop = to_bool(key, v);
  else if (key == "prior") o.prior_mode = keyed(key, [&] { return parse_prior_mode(v); });
  else if (key == "z_mode") o.z_mode = keyed(key, [&] { return parse_z_mode(v); });
  else if (key == "aux") o.aux_mode = keyed(key, [&] { return parse_aux_mode(v); });
  else if (key == "gamma") o.gamma = to_double(key, v);
  else if (key == "sigma_min") model.sigma_min = to_double(key, v);
  else if (key == "leaky_slope") model.leaky_slope = to_double(key, v);
  else if (key == "check_finite") train.check_finite = to_bool(key, v);
  else if (key == "checkpoint") train.checkpoint = v;
  else if (key == "log") log = v;
  else if (key == "log_wall_time") train.log_wall_time = to_bool(key, v);
  else throw ConfigError("unknown config key '" + key + "'", key);
}

std::string RunConfig::get(const std::string& key) const {
  const ObjectiveConfig& o = train.objective;
  const auto onoff = [](bool b) { return std::string(b ? "on" : "off"); };
  if (key == "data") return data;
  if (key == "data_format") return data_format;
  if (key == "chunk") return std::to_string(chunk);
  if (key == "split") return num(split.train) + "," + num(split.valid) + "," + num(split.test);
  if (key == "standardize") return onoff(standardize);
  if (key == "lr") return num(train.lr);
  if (key == "batch") return std::to_string(train.batch);
  if (key == "epochs") return std::to_string(train.epochs);
  if (key == "clip") return num(train.clip);
  if (key == "seed") return std::to_string(train.seed);
  if (key == "patience") return std::to_string(train.patience);
  if (key == "bptt") return std::to_string(train.bptt);
  if (key == "hidden") return std::to_string(model.hidden);
  if (key == "backward_hidden") return std::to_string(model.backward_hidden);
  if (key == "latent") return std::to_string(model.latent);
  if (key == "mlp_hidden") return std::to_string(model.mlp_hidden);
  if (key == "alpha") return num(o.alpha);
  if (key == "beta") return num(o.beta);
  if (key == "sb_prob") return num(o.sb_prob);
  if (key == "stochastic_backprop") return onoff(o.stochastic_backprop);
  if (key == "prior") return std::string(prior_mode_name(o.prior_mode));
  if (key == "z_mode") return std::string(z_mode_name(o.z_mode));
  if (key == "aux") return std::string(aux_mode_name(o.aux_mode));
  if (key == "gamma") return num(o.gamma);
  if (key == "sigma_min") return num(model.sigma_min);
  if (key == "leaky_slope") return num(model.leaky_slope);
  if (key == "check_finite") return onoff(train.check_finite);
  if (key == "checkpoint") return train.checkpoint;
  if (key == "log") return log;
  if (key == "log_wall_time") return onoff(train.log_wall_time);
  throw ConfigError("unknown config key '" + key + "'", key);
}

Modality RunConfig::modality() const {
  if (data_format == "binary") return Modality::kBinary;
  if (data_format == "frames") return Modality::kContinuous;
  return Modality::kDiscrete;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'", trim(line));
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path.string() + "'", "config");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& k : keys()) out += k + " = " + get(k) + "\n";
  return out;
}

std::pair<std::string, std::string> split_assignment(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw ConfigError("expected key=value, got '" + kv + "'", trim(kv));
  return {trim(kv.substr(0, eq)), trim(kv.substr(eq + 1))};
}

}  // namespace vbl
