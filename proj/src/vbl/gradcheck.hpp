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

#include <cstdint>
#include <string>
#include <vector>

#include "vbl/data.hpp"
#include "vbl/model.hpp"
#include "vbl/objective.hpp"

namespace vbl {

struct GradcheckConfig {
  Modality modality = Modality::kDiscrete;
  std::size_t hidden = 3;
  std::size_t backward_hidden = 3;
  std::size_t latent = 2;
  std::size_t mlp_hidden = 3;
  std::size_t input_dim = 4;  // vocabulary or frame size
  std::size_t steps = 4;
  std::size_t batch = 2;
  double eps = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor of the relative error, so exact-zero gradients compare
  /// by absolute error.
  double floor = 1e-6;
  std::uint64_t seed = 7;
  ObjectiveConfig objective = gradcheck_objective();
  /// Negates the analytic gradient of `fwd.U` (a mutation fixture that must fail).
  bool sign_flip = false;

  static ObjectiveConfig gradcheck_objective();
};

struct ParamCheck {
  std::string name;
  std::size_t count = 0;
  double max_rel_err = 0;
  double max_abs_err = 0;
};

struct GradcheckReport {
  std::vector<ParamCheck> params;  // in model order
  double max_rel_err = 0;
  bool passed = false;
  double seconds = 0;

  /// Maximum relative error per parameter group ("fwd", "enc", ...).
  std::vector<std::pair<std::string, double>> groups() const;
};

double relative_error(double analytic, double numeric, double floor);

/// Central-difference check of every parameter gradient of the objective on
/// a random tiny model and batch, with all noise fixed by the seed.
GradcheckReport run_gradcheck(const GradcheckConfig& cfg);

/// The model and batch the check uses (exposed for tests).
Model gradcheck_model(const GradcheckConfig& cfg);
SequenceBatch gradcheck_batch(const GradcheckConfig& cfg);

}  // namespace vbl
