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
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "vbl/model.hpp"
#include "vbl/rng.hpp"
#include "vbl/tensor.hpp"

namespace vbl {

/// Diagonal Gaussian; sigma is the standard deviation.
struct GaussianParams {
  Var mu;
  Var sigma;
};

/// One hidden leaky-ReLU layer feeding a mean head and a pre-sigma head.
struct MlpParams {
  Var W1, b1;
  Var Wmu, bmu;
  Var Wsig, bsig;
  double leaky_slope = 0.01;
  double sigma_min = 1e-4;
};

MlpParams bind_mlp(BoundParams& params, std::string_view prefix, const ModelConfig& config);

/// sigma = softplus(pre) + sigma_min.
GaussianParams mlp_gaussian(const MlpParams& p, Var input);

/// q(z_t | h_{t-1}, b_t) on the concatenation [h_{t-1}; b_t].
GaussianParams encoder(const MlpParams& phi, Var h_prev, Var b_t);
/// Learned p(z_t | h_{t-1}); with `theta == nullptr` the fixed N(0, I).
GaussianParams prior(const MlpParams* theta, Var h_prev, std::size_t latent_dim);
/// p(b~_t | z_t).
GaussianParams decode_b(const MlpParams& psi, Var z);
/// p(h~_{t-1} | z_t).
GaussianParams decode_h(const MlpParams& xi, Var z);

/// mu + sigma * eps with `eps` held constant.
Var reparam_sample(const GaussianParams& g, const Tensor& eps);
/// Standard normal noise for one step: row r is drawn from sequence ids[r].
Tensor step_noise(std::uint64_t seed, std::span<const std::uint64_t> ids, std::size_t step,
                  NoiseStream stream, std::size_t dim);

/// Per-row log N(x; mu, sigma^2), summed over features. Returns [batch].
Var log_density(const GaussianParams& g, Var x);
/// Per-row KL(q || p) between diagonal Gaussians. Returns [batch].
Var kl_diag_gauss(const GaussianParams& q, const GaussianParams& p);

}  // namespace vbl
