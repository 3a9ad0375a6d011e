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


// Plain-double LSTM used as an oracle for the tape implementation.

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace vbl::testing {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major [rows][cols]

inline double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// out[j] = sum_i x[i] * M[i][j]
inline Vec vec_mat(const Vec& x, const Mat& m) {
  Vec out(m.empty() ? 0 : m[0].size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += x[i] * m[i][j];
  return out;
}

struct RefLstm {
  Mat W, U;
  Vec b;
  std::size_t hidden = 0;

  /// One step given the extra gate preactivation `extra` (may be empty).
  void step(const Vec& x, Vec& h, Vec& c, const Vec& extra = {}) const {
    Vec pre = vec_mat(x, W);
    const Vec hu = vec_mat(h, U);
    for (std::size_t j = 0; j < pre.size(); ++j) {
      pre[j] += hu[j] + b[j];
      if (!extra.empty()) pre[j] += extra[j];
    }
    const std::size_t n = hidden;
    for (std::size_t k = 0; k < n; ++k) {
      const double i = ref_sigmoid(pre[k]);
      const double f = ref_sigmoid(pre[n + k]);
      const double o = ref_sigmoid(pre[2 * n + k]);
      const double g = std::tanh(pre[3 * n + k]);
      c[k] = f * c[k] + i * g;
      h[k] = o * std::tanh(c[k]);
    }
  }
};

inline Mat to_mat(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
  Mat m(rows, Vec(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < cols; ++k) m[r][k] = flat[r * cols + k];
  return m;
}

inline Vec one_hot(std::size_t k, std::size_t n) {
  Vec v(n, 0.0);
  v[k] = 1.0;
  return v;
}

}  // namespace vbl::testing
