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

#include <cstddef>
#include <string_view>
#include <vector>

#include "vbl/data.hpp"
#include "vbl/model.hpp"
#include "vbl/tensor.hpp"

namespace vbl {

/// Gate blocks are concatenated along columns in the order i, f, o, g.
struct LstmParams {
  Var W;  // [d_in x 4h]; a token table when the input is discrete
  Var U;  // [h x 4h]
  Var b;  // [4h]
  std::size_t hidden = 0;
};

struct VarForwardLstmParams {
  LstmParams base;
  Var V;  // [d_z x 4h]
  Var R;  // [d_b x 4h]
};

struct CellState {
  Var h;
  Var c;
};

/// One timestep of input: a dense [batch x d] matrix or one token per row.
struct StepInput {
  Var dense;
  std::vector<std::size_t> tokens;

  bool is_tokens() const noexcept { return !dense.valid(); }
  std::size_t rows() const { return is_tokens() ? tokens.size() : dense.value().rows(); }
};

LstmParams bind_lstm(BoundParams& params, std::string_view prefix, std::size_t hidden);
VarForwardLstmParams bind_var_forward(BoundParams& params, std::size_t hidden);

CellState zero_state(Tape& tape, std::size_t batch, std::size_t hidden);

/// x_t W + h U + b for every gate at once.
Var gate_preactivation(const LstmParams& p, const StepInput& x, Var h_prev);
/// Applies the gate nonlinearities and the cell update to a preactivation.
CellState lstm_cell(Var preact, Var c_prev, std::size_t hidden);

CellState lstm_step(const LstmParams& p, const StepInput& x, const CellState& prev);
/// As lstm_step with z_t V + b~_t R added to every gate preactivation.
CellState var_forward_step(const VarForwardLstmParams& p, const StepInput& x,
                           const CellState& prev, Var z, Var b_tilde);

/// Input fed at step t: the reserved start token (or a zero frame) at t = 0,
/// then x_{t-1}. Positions past a sequence's length carry pad content.
StepInput step_input(Tape& tape, const SequenceBatch& batch, std::size_t t);
/// Observation at step t (the prediction target of step t).
StepInput step_target(Tape& tape, const SequenceBatch& batch, std::size_t t);

/// [batch x width] constant of 1 where t < length and 0 elsewhere.
Tensor length_mask(const SequenceBatch& batch, std::size_t t, std::size_t width);

/// Runs the backward LSTM from t = T-1 down to 0 starting at zero state and
/// returns b_0..b_{T-1}. b_t summarizes inputs t..len-1 of its own sequence;
/// states at padded positions are exactly zero.
std::vector<Var> run_backward_lstm(const LstmParams& p, const SequenceBatch& batch);

}  // namespace vbl
