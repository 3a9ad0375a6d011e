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

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vbl/data.hpp"
#include "vbl/model.hpp"
#include "vbl/training.hpp"

namespace vbl {

/// A complete experiment: data source, architecture and training settings.
/// Read from flat `key = value` files; `#` starts a comment.
struct RunConfig {
  std::string data;
  std::string data_format = "char";  // char | binary | frames
  std::size_t chunk = 128;
  SplitFractions split;
  bool standardize = false;
  ModelConfig model;
  TrainConfig train;
  std::string log;  // CSV metric log path; empty to skip

  /// Sets one key from its text form. Unknown keys and bad values throw
  /// ConfigError naming the key.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  /// All keys in documentation order.
  static const std::vector<std::string>& keys();

  Modality modality() const;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  /// `key = value` lines for every key.
  std::string dump() const;
};

/// Splits "k=v" into its parts; throws ConfigError without '='.
std::pair<std::string, std::string> split_assignment(const std::string& kv);

}  // namespace vbl
