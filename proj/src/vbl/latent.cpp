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


#include "vbl/latent.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "vbl/errors.hpp"

namespace vbl {

MlpParams bind_mlp(BoundParams& params, std::string_view prefix, const ModelConfig& config) {
  const std::string p(prefix);
  return {params[p + ".W1"],  params[p + ".b1"],   params[p + ".Wmu"],
          params[p + ".bmu"], params[p + ".Wsig"], params[p + ".bsig"],
          config.leaky_slope, config.sigma_min};
}

GaussianParams mlp_gaussian(const MlpParams& p, Var input) {
  const std::size_t rows = input.value().rows();
  if (input.value().rank() != 2 || input.value().cols() != p.W1.value().rows())
    throw ShapeError("MLP input " + shape_str(input.shape()) + " does not match weights " +
                     shape_str(p.W1.shape()));
  Var hidden = leaky_relu(matmul(input, p.W1) + broadcast_rows(p.b1, rows), p.leaky_slope);
  Var mu = matmul(hidden, p.Wmu) + broadcast_rows(p.bmu, rows);
  Var pre = matmul(hidden, p.Wsig) + broadcast_rows(p.bsig, rows);
  Var sigma = shift(softplus(pre), p.sigma_min);
  if (!mu.value().all_finite() || !sigma.value().all_finite())
    throw NumericError("Gaussian MLP produced non-finite parameters");
  return {mu, sigma};
}

GaussianParams encoder(const MlpParams& phi, Var h_prev, Var b_t) {
  if (h_prev.value().rows() != b_t.value().rows())
    throw ShapeError("encoder inputs are not batch-aligned");
  return mlp_gaussian(phi, concat_cols(h_prev, b_t));
}

GaussianParams prior(const MlpParams* theta, Var h_prev, std::size_t latent_dim) {
  if (theta) return mlp_gaussian(*theta, h_prev);
  Tape& tape = h_prev.tape();
  const Shape s{h_prev.value().rows(), latent_dim};
  return {tape.constant(Tensor(s, 0.0)), tape.constant(Tensor(s, 1.0))};
}

GaussianParams decode_b(const MlpParams& psi, Var z) { return mlp_gaussian(psi, z); }

GaussianParams decode_h(const MlpParams& xi, Var z) { return mlp_gaussian(xi, z); }

Var reparam_sample(const GaussianParams& g, const Tensor& eps) {
  if (eps.shape() != g.mu.shape())
    throw ShapeError("noise shape " + shape_str(eps.shape()) + " does not match " +
                     shape_str(g.mu.shape()));
  return g.mu + g.sigma * g.mu.tape().constant(eps);
}

Tensor step_noise(std::uint64_t seed, std::span<const std::uint64_t> ids, std::size_t step,
                  NoiseStream stream, std::size_t dim) {
  Tensor out(Shape{ids.size(), dim});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto eps = normal_noise(seed, ids[r], step, stream, dim);
    std::copy(eps.begin(), eps.end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * dim));
  }
  return out;
}

Var log_density(const GaussianParams& g, Var x) {
  if (x.shape() != g.mu.shape() || g.sigma.shape() != g.mu.shape())
    throw ShapeError("log_density: shapes " + shape_str(x.shape()) + " and " +
                     shape_str(g.mu.shape()) + " differ");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  Var diff = x - g.mu;
  Var quad = scale(square(diff / g.sigma), 0.5);
  Var per_dim = shift(-(log(g.sigma) + quad), -half_log_2pi);
  return sum(per_dim, 1);
}

Var kl_diag_gauss(const GaussianParams& q, const GaussianParams& p) {
  if (q.mu.shape() != p.mu.shape() || q.sigma.shape() != p.sigma.shape() ||
      q.mu.shape() != q.sigma.shape())
    throw ShapeError("kl_diag_gauss: shapes " + shape_str(q.mu.shape()) + " and " +
                     shape_str(p.mu.shape()) + " differ");
  // log(sp/sq) + (sq^2 + (mq-mp)^2) / (2 sp^2) - 1/2
  Var ratio = q.sigma / p.sigma;
  Var mean_term = (q.mu - p.mu) / p.sigma;
  Var per_dim = shift(scale(square(ratio) + square(mean_term), 0.5) - log(ratio), -0.5);
  return sum(per_dim, 1);
}

}  // namespace vbl
