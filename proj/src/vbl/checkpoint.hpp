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
#include <optional>
#include <string>

#include "vbl/data.hpp"
#include "vbl/model.hpp"
#include "vbl/objective.hpp"

namespace vbl {

/// Everything needed to evaluate or sample from a trained model.
struct Checkpoint {
  Model model;
  ObjectiveConfig objective;
  std::optional<Vocab> vocab;               // character data
  std::optional<Standardizer> standardizer;  // standardized frame data
  std::size_t chunk = 0;                     // character chunk length
  std::size_t epoch = 0;                     // epoch the parameters come from
};

// Checkpoint file:
//   line 1   "VBLSTM-CKPT 1"
//   line 2   decimal byte length N of the header
//   N bytes  JSON header: config, objective, vocab, standardizer, chunk,
//            epoch and a tensor table [{name, shape, offset}] (offset in values)
//   "\n"
//   payload  f64 little-endian values of every tensor in table order
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Serialized bytes of a checkpoint (what save_checkpoint writes).
std::string checkpoint_bytes(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);

}  // namespace vbl
