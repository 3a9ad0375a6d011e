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


#include <cmath>
#include <random>

#include "doctest.h"
#include "support/finite_diff.hpp"
#include "support/reference_lstm.hpp"
#include "vbl/errors.hpp"
#include "vbl/recurrent.hpp"

using namespace vbl;
using namespace vbl::testing;

namespace {

LstmParams make_lstm(Tape& tape, const Tensor& W, const Tensor& U, const Tensor& b, bool vars = false) {
  const auto put = [&](const Tensor& t) { return vars ? tape.variable(t) : tape.constant(t); };
  return {put(W), put(U), put(b), U.rows()};
}

StepInput dense(Tape& tape, Tensor x) {
  StepInput in;
  in.dense = tape.constant(std::move(x));
  return in;
}

RefLstm ref_of(const Tensor& W, const Tensor& U, const Tensor& b) {
  return {to_mat({W.data().begin(), W.data().end()}, W.rows(), W.cols()),
          to_mat({U.data().begin(), U.data().end()}, U.rows(), U.cols()),
          Vec(b.data().begin(), b.data().end()), U.rows()};
}

}  // namespace

TEST_CASE("zero weights and zero state give h = 0") {
  Tape tape;
  const std::size_t h = 3;
  LstmParams p = make_lstm(tape, Tensor(Shape{2, 4 * h}), Tensor(Shape{h, 4 * h}), Tensor(Shape{4 * h}));
  CellState s = lstm_step(p, dense(tape, Tensor::matrix({{0.3, -2}})), zero_state(tape, 1, h));
  for (double v : s.h.value().data()) CHECK(v == 0.0);
  for (double v : s.c.value().data()) CHECK(v == 0.0);
}

TEST_CASE("single-unit cell matches hand arithmetic over two steps") {
  Tape tape;
  LstmParams p = make_lstm(tape, Tensor::matrix({{0.5, 0.5, 0.5, 0.5}}),
                           Tensor::matrix({{0.25, 0.25, 0.25, 0.25}}), Tensor(Shape{4}));
  CellState s = lstm_step(p, dense(tape, Tensor::matrix({{0}})), zero_state(tape, 1, 1));
  CHECK(s.h.value().item() == 0.0);
  // Restart from zero state with x = 1 (U has no effect at h = 0).
  s = lstm_step(p, dense(tape, Tensor::matrix({{1}})), zero_state(tape, 1, 1));
  CHECK(s.c.value().item() == doctest::Approx(0.28764913664496794).epsilon(1e-12));
  CHECK(s.h.value().item() == doctest::Approx(0.17426971865610508).epsilon(1e-12));
  s = lstm_step(p, dense(tape, Tensor::matrix({{-1}})), s);
  CHECK(s.c.value().item() == doctest::Approx(-0.054111573484924985).epsilon(1e-12));
  CHECK(s.h.value().item() == doctest::Approx(-0.020965765509063247).epsilon(1e-12));
}

TEST_CASE("gate order is i, f, o, g") {
  // Saturating only the forget gate keeps c; only the output gate exposes it.
  Tape tape;
  const double big = 50;
  LstmParams p = make_lstm(tape, Tensor(Shape{1, 4}), Tensor(Shape{1, 4}),
                           Tensor::vector({-big, big, -big, 0}));
  CellState prev{tape.constant(Tensor::matrix({{0}})), tape.constant(Tensor::matrix({{0.7}}))};
  CellState s = lstm_step(p, dense(tape, Tensor::matrix({{0}})), prev);
  CHECK(s.c.value().item() == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(std::abs(s.h.value().item()) < 1e-20);
}

TEST_CASE("token input gathers rows of W like a one-hot product") {
  std::mt19937_64 rng(1);
  const std::size_t h = 2, V = 5;
  const Tensor W = random_tensor({V, 4 * h}, rng), U = random_tensor({h, 4 * h}, rng),
               b = random_tensor({4 * h}, rng);
  Tape tape;
  LstmParams p = make_lstm(tape, W, U, b);
  StepInput tok;
  tok.tokens = {3, 0};
  Tensor onehot(Shape{2, V}, 0.0);
  onehot.at(0, 3) = 1;
  onehot.at(1, 0) = 1;
  const CellState a = lstm_step(p, tok, zero_state(tape, 2, h));
  const CellState c = lstm_step(p, dense(tape, onehot), zero_state(tape, 2, h));
  for (std::size_t i = 0; i < a.h.value().numel(); ++i)
    CHECK(a.h.value()[i] == doctest::Approx(c.h.value()[i]).epsilon(1e-14));
}

TEST_CASE("property: V = R = 0 reduces the variational step to a plain step") {
  std::mt19937_64 rng(17);
  const std::size_t h = 3, d = 2, dz = 2, db = 4;
  for (int trial = 0; trial < 100; ++trial) {
    Tape tape;
    const Tensor W = random_tensor({d, 4 * h}, rng), U = random_tensor({h, 4 * h}, rng),
                 b = random_tensor({4 * h}, rng);
    VarForwardLstmParams vp{make_lstm(tape, W, U, b), tape.constant(Tensor(Shape{dz, 4 * h})),
                            tape.constant(Tensor(Shape{db, 4 * h}))};
    const StepInput x = dense(tape, random_tensor({2, d}, rng));
    const CellState prev{tape.constant(random_tensor({2, h}, rng, -1, 1)),
                         tape.constant(random_tensor({2, h}, rng))};
    Var z = tape.constant(random_tensor({2, dz}, rng));
    Var bt = tape.constant(random_tensor({2, db}, rng));
    const CellState a = var_forward_step(vp, x, prev, z, bt);
    const CellState c = lstm_step(vp.base, x, prev);
    CHECK(a.h.value() == c.h.value());
    CHECK(a.c.value() == c.c.value());
  }
}

TEST_CASE("z = 0 and b~ = 0 also reduce to a plain step") {
  std::mt19937_64 rng(18);
  const std::size_t h = 3, d = 2, dz = 2, db = 4;
  Tape tape;
  VarForwardLstmParams vp{make_lstm(tape, random_tensor({d, 4 * h}, rng), random_tensor({h, 4 * h}, rng),
                                    random_tensor({4 * h}, rng)),
                          tape.constant(random_tensor({dz, 4 * h}, rng)),
                          tape.constant(random_tensor({db, 4 * h}, rng))};
  const StepInput x = dense(tape, random_tensor({2, d}, rng));
  const CellState prev = zero_state(tape, 2, h);
  const CellState a = var_forward_step(vp, x, prev, tape.constant(Tensor(Shape{2, dz})),
                                       tape.constant(Tensor(Shape{2, db})));
  CHECK(a.h.value() == lstm_step(vp.base, x, prev).h.value());
}

TEST_CASE("variational step matches the oracle with z V + b~ R in every gate") {
  std::mt19937_64 rng(19);
  const std::size_t h = 2, d = 3, dz = 2, db = 2;
  const Tensor W = random_tensor({d, 4 * h}, rng), U = random_tensor({h, 4 * h}, rng),
               b = random_tensor({4 * h}, rng), V = random_tensor({dz, 4 * h}, rng),
               R = random_tensor({db, 4 * h}, rng);
  const Tensor x = random_tensor({1, d}, rng), z = random_tensor({1, dz}, rng),
               bt = random_tensor({1, db}, rng), h0 = random_tensor({1, h}, rng, -1, 1),
               c0 = random_tensor({1, h}, rng);
  Tape tape;
  VarForwardLstmParams vp{make_lstm(tape, W, U, b), tape.constant(V), tape.constant(R)};
  const CellState s = var_forward_step(vp, dense(tape, x), {tape.constant(h0), tape.constant(c0)},
                                       tape.constant(z), tape.constant(bt));
  const RefLstm ref = ref_of(W, U, b);
  Vec extra = vec_mat({z[0], z[1]}, to_mat({V.data().begin(), V.data().end()}, dz, 4 * h));
  const Vec er = vec_mat({bt[0], bt[1]}, to_mat({R.data().begin(), R.data().end()}, db, 4 * h));
  for (std::size_t j = 0; j < extra.size(); ++j) extra[j] += er[j];
  Vec hv{h0[0], h0[1]}, cv{c0[0], c0[1]};
  ref.step({x[0], x[1], x[2]}, hv, cv, extra);
  for (std::size_t k = 0; k < h; ++k) {
    CHECK(s.h.value()[k] == doctest::Approx(hv[k]).epsilon(1e-13));
    CHECK(s.c.value()[k] == doctest::Approx(cv[k]).epsilon(1e-13));
  }
}

TEST_CASE("property: |h| < 1 and |c_t| <= |c_{t-1}| + 1") {
  std::mt19937_64 rng(23);
  const std::size_t h = 4, d = 3;
  Tape tape;
  LstmParams p = make_lstm(tape, random_tensor({d, 4 * h}, rng, -5, 5),
                           random_tensor({h, 4 * h}, rng, -5, 5), random_tensor({4 * h}, rng, -5, 5));
  CellState s = zero_state(tape, 3, h);
  for (int t = 0; t < 50; ++t) {
    CellState next = lstm_step(p, dense(tape, random_tensor({3, d}, rng, -10, 10)), s);
    for (std::size_t i = 0; i < next.h.value().numel(); ++i) {
      CHECK(std::abs(next.h.value()[i]) < 1.0);
      CHECK(std::abs(next.c.value()[i]) <= std::abs(s.c.value()[i]) + 1.0);
    }
    s = next;
  }
}

TEST_CASE("backward LSTM on a single step sees only the start input") {
  std::mt19937_64 rng(29);
  const std::size_t h = 3, V = 4;
  const Tensor W = random_tensor({V, 4 * h}, rng), U = random_tensor({h, 4 * h}, rng),
               b = random_tensor({4 * h}, rng);
  Tape tape;
  LstmParams p = make_lstm(tape, W, U, b);
  const SequenceBatch batch = make_batch(Modality::kDiscrete, 1, {{2}}, V);
  const auto states = run_backward_lstm(p, batch);
  REQUIRE(states.size() == 1);
  StepInput start;
  start.tokens = {Vocab::kReserved};
  const CellState ref = lstm_step(p, start, zero_state(tape, 1, h));
  CHECK(states[0].value() == ref.h.value());
}

TEST_CASE("backward LSTM equals a forward pass over the reversed input stream") {
  std::mt19937_64 rng(31);
  const std::size_t h = 3, d = 2;
  const Tensor W = random_tensor({d, 4 * h}, rng), U = random_tensor({h, 4 * h}, rng),
               b = random_tensor({4 * h}, rng);
  const std::vector<std::vector<double>> seqs = {
      {0.1, 0.2, -0.3, 0.4, 1.5, -0.6, 0.7, 0.8, 0.0, 1.0},  // length 5
      {2.0, -1.0, 0.5, 0.5}};                                // length 2
  const SequenceBatch batch = make_batch(Modality::kContinuous, d, seqs);
  Tape tape;
  const auto states = run_backward_lstm(make_lstm(tape, W, U, b), batch);
  REQUIRE(states.size() == 5);
  const RefLstm ref = ref_of(W, U, b);
  for (std::size_t r = 0; r < seqs.size(); ++r) {
    const std::size_t len = seqs[r].size() / d;
    // Inputs u_t: a zero frame at t = 0, then x_{t-1}.
    std::vector<Vec> u(len);
    u[0] = Vec(d, 0.0);
    for (std::size_t t = 1; t < len; ++t) u[t] = {seqs[r][(t - 1) * d], seqs[r][(t - 1) * d + 1]};
    Vec hv(h, 0.0), cv(h, 0.0);
    for (std::size_t t = len; t-- > 0;) {
      ref.step(u[t], hv, cv);
      for (std::size_t k = 0; k < h; ++k)
        CHECK(states[t].value().at(r, k) == doctest::Approx(hv[k]).epsilon(1e-13));
    }
    for (std::size_t t = len; t < states.size(); ++t)
      for (std::size_t k = 0; k < h; ++k) CHECK(states[t].value().at(r, k) == 0.0);
  }
}

TEST_CASE("property: backward states do not depend on padding content or batch mates") {
  std::mt19937_64 rng(37);
  const std::size_t h = 3, V = 6;
  const Tensor W = random_tensor({V, 4 * h}, rng), U = random_tensor({h, 4 * h}, rng),
               b = random_tensor({4 * h}, rng);
  const std::vector<double> short_seq = {1, 4, 2};
  SequenceBatch alone = make_batch(Modality::kDiscrete, 1, {short_seq}, V);
  SequenceBatch padded = make_batch(Modality::kDiscrete, 1, {short_seq, {5, 5, 5, 5, 5, 5, 5}}, V);
  // Garbage in the padded tail must not leak in.
  padded.data[3] = 5;
  padded.data[4] = 2;
  Tape tape;
  LstmParams p = make_lstm(tape, W, U, b);
  const auto a = run_backward_lstm(p, alone);
  const auto c = run_backward_lstm(p, padded);
  for (std::size_t t = 0; t < short_seq.size(); ++t)
    for (std::size_t k = 0; k < h; ++k) CHECK(a[t].value().at(0, k) == c[t].value().at(0, k));
}

TEST_CASE("empty batch is rejected") {
  Tape tape;
  LstmParams p = make_lstm(tape, Tensor(Shape{2, 4}), Tensor(Shape{1, 4}), Tensor(Shape{4}));
  SequenceBatch empty;
  empty.modality = Modality::kContinuous;
  CHECK_THROWS_AS(run_backward_lstm(p, empty), DataError);
}

TEST_CASE("gradient of a five-step unrolled loss matches finite differences") {
  std::mt19937_64 rng(41);
  const std::size_t h = 2, d = 2, dz = 2, db = 2, B = 2;
  std::vector<Tensor> xs, zs, bs;
  for (int t = 0; t < 5; ++t) {
    xs.push_back(random_tensor({B, d}, rng));
    zs.push_back(random_tensor({B, dz}, rng));
    bs.push_back(random_tensor({B, db}, rng));
  }
  const Tensor wout = random_tensor({B, h}, rng);
  const ScalarFn f = [&](Tape& tape, const std::vector<Var>& v) {
    VarForwardLstmParams p{{v[0], v[1], v[2], h}, v[3], v[4]};
    CellState s = zero_state(tape, B, h);
    Var loss = tape.constant(Tensor::scalar(0));
    for (int t = 0; t < 5; ++t) {
      s = var_forward_step(p, dense(tape, xs[t]), s, tape.constant(zs[t]), tape.constant(bs[t]));
      loss = loss + sum(s.h * tape.constant(wout)) + scale(sum(square(s.c)), 0.1);
    }
    return loss;
  };
  const double err = fd_max_rel_error(f, {random_tensor({d, 4 * h}, rng), random_tensor({h, 4 * h}, rng),
                                          random_tensor({4 * h}, rng), random_tensor({dz, 4 * h}, rng),
                                          random_tensor({db, 4 * h}, rng)});
  CHECK(err < 1e-4);
}

TEST_CASE("backward LSTM gradient matches finite differences") {
  std::mt19937_64 rng(43);
  const std::size_t h = 2, V = 4;
  const SequenceBatch batch = make_batch(Modality::kDiscrete, 1, {{1, 2, 3, 1}, {3, 2}}, V);
  const Tensor wout = random_tensor({2, h}, rng);
  const ScalarFn f = [&](Tape& tape, const std::vector<Var>& v) {
    const auto states = run_backward_lstm({v[0], v[1], v[2], h}, batch);
    Var loss = tape.constant(Tensor::scalar(0));
    for (const Var& s : states) loss = loss + sum(s * tape.constant(wout));
    return loss;
  };
  CHECK(fd_max_rel_error(f, {random_tensor({V, 4 * h}, rng), random_tensor({h, 4 * h}, rng),
                             random_tensor({4 * h}, rng)}) < 1e-4);
}
