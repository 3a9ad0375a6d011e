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


#include "vbl/recurrent.hpp"

#include <string>

#include "vbl/errors.hpp"

namespace vbl {

LstmParams bind_lstm(BoundParams& params, std::string_view prefix, std::size_t hidden) {
  const std::string p(prefix);
  LstmParams out{params[p + ".W"], params[p + ".U"], params[p + ".b"], hidden};
  if (out.U.shape() != Shape{hidden, 4 * hidden} || out.b.shape() != Shape{4 * hidden} ||
      out.W.value().cols() != 4 * hidden)
    throw ShapeError("LSTM parameters '" + p + "' do not match hidden size " +
                     std::to_string(hidden));
  return out;
}

VarForwardLstmParams bind_var_forward(BoundParams& params, std::size_t hidden) {
  VarForwardLstmParams out{bind_lstm(params, "fwd", hidden), params["fwd.V"], params["fwd.R"]};
  if (out.V.value().cols() != 4 * hidden || out.R.value().cols() != 4 * hidden)
    throw ShapeError("forward latent matrices do not match hidden size");
  return out;
}

CellState zero_state(Tape& tape, std::size_t batch, std::size_t hidden) {
  Var z = tape.constant(Tensor(Shape{batch, hidden}, 0.0));
  return {z, z};
}

Var gate_preactivation(const LstmParams& p, const StepInput& x, Var h_prev) {
  const std::size_t rows = x.rows();
  if (h_prev.value().rows() != rows || h_prev.value().cols() != p.hidden)
    throw ShapeError("LSTM state shape " + shape_str(h_prev.shape()) + " does not match input");
  Var xw;
  if (x.is_tokens()) {
    xw = gather_rows(p.W, x.tokens);
  } else {
    if (x.dense.value().cols() != p.W.value().rows())
      throw ShapeError("LSTM input width " + std::to_string(x.dense.value().cols()) +
                       " does not match weights " + shape_str(p.W.shape()));
    xw = matmul(x.dense, p.W);
  }
  return xw + matmul(h_prev, p.U) + broadcast_rows(p.b, rows);
}

CellState lstm_cell(Var preact, Var c_prev, std::size_t hidden) {
  Var i = sigmoid(slice_cols(preact, 0, hidden));
  Var f = sigmoid(slice_cols(preact, hidden, hidden));
  Var o = sigmoid(slice_cols(preact, 2 * hidden, hidden));
  Var g = tanh(slice_cols(preact, 3 * hidden, hidden));
  Var c = f * c_prev + i * g;
  return {o * tanh(c), c};
}

CellState lstm_step(const LstmParams& p, const StepInput& x, const CellState& prev) {
  return lstm_cell(gate_preactivation(p, x, prev.h), prev.c, p.hidden);
}

CellState var_forward_step(const VarForwardLstmParams& p, const StepInput& x,
                           const CellState& prev, Var z, Var b_tilde) {
  if (z.value().cols() != p.V.value().rows() || b_tilde.value().cols() != p.R.value().rows())
    throw ShapeError("latent inputs " + shape_str(z.shape()) + ", " + shape_str(b_tilde.shape()) +
                     " do not match V/R");
  Var pre = gate_preactivation(p.base, x, prev.h) + matmul(z, p.V) + matmul(b_tilde, p.R);
  return lstm_cell(pre, prev.c, p.base.hidden);
}

namespace {

StepInput observation(Tape& tape, const SequenceBatch& batch, std::size_t t) {
  const std::size_t B = batch.size();
  StepInput in;
  if (batch.modality == Modality::kDiscrete) {
    in.tokens.resize(B);
    for (std::size_t r = 0; r < B; ++r) in.tokens[r] = batch.token(r, t);
    return in;
  }
  const std::size_t d = batch.dim();
  Tensor x(Shape{B, d});
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t k = 0; k < d; ++k) x[r * d + k] = batch.value(r, t, k);
  in.dense = tape.constant(std::move(x));
  return in;
}

}  // namespace

StepInput step_input(Tape& tape, const SequenceBatch& batch, std::size_t t) {
  if (t > 0) return observation(tape, batch, t - 1);
  StepInput in;
  if (batch.modality == Modality::kDiscrete)
    in.tokens.assign(batch.size(), Vocab::kReserved);
  else
    in.dense = tape.constant(Tensor(Shape{batch.size(), batch.dim()}, 0.0));
  return in;
}

StepInput step_target(Tape& tape, const SequenceBatch& batch, std::size_t t) {
  return observation(tape, batch, t);
}

Tensor length_mask(const SequenceBatch& batch, std::size_t t, std::size_t width) {
  Tensor m(Shape{batch.size(), width}, 0.0);
  for (std::size_t r = 0; r < batch.size(); ++r)
    if (t < batch.lengths[r])
      for (std::size_t k = 0; k < width; ++k) m[r * width + k] = 1.0;
  return m;
}

std::vector<Var> run_backward_lstm(const LstmParams& p, const SequenceBatch& batch) {
  if (batch.size() == 0 || batch.max_len() == 0)
    throw DataError("backward LSTM: empty batch");
  Tape& tape = p.U.tape();
  const std::size_t T = batch.max_len();
  std::vector<Var> out(T);
  CellState state = zero_state(tape, batch.size(), p.hidden);
  for (std::size_t t = T; t-- > 0;) {
    CellState next = lstm_step(p, step_input(tape, batch, t), state);
    Var mask = tape.constant(length_mask(batch, t, p.hidden));
    state = {next.h * mask, next.c * mask};
    out[t] = state.h;
  }
  return out;
}

}  // namespace vbl
