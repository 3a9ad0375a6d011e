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
#include <numbers>
#include <random>

#include "doctest.h"
#include "support/finite_diff.hpp"
#include "vbl/errors.hpp"
#include "vbl/latent.hpp"

using namespace vbl;
using namespace vbl::testing;

namespace {

MlpParams const_mlp(Tape& tape, const Tensor& W1, const Tensor& b1, const Tensor& Wmu,
                    const Tensor& bmu, const Tensor& Wsig, const Tensor& bsig) {
  return {tape.constant(W1),  tape.constant(b1),   tape.constant(Wmu),
          tape.constant(bmu), tape.constant(Wsig), tape.constant(bsig), 0.01, 1e-4};
}

MlpParams random_mlp(Tape& tape, std::mt19937_64& rng, std::size_t in, std::size_t hid,
                     std::size_t out) {
  return const_mlp(tape, random_tensor({in, hid}, rng), random_tensor({hid}, rng),
                   random_tensor({hid, out}, rng), random_tensor({out}, rng),
                   random_tensor({hid, out}, rng), random_tensor({out}, rng));
}

GaussianParams gauss(Tape& tape, const Tensor& mu, const Tensor& sigma) {
  return {tape.constant(mu), tape.constant(sigma)};
}

double scalar_log_normal(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -std::log(sigma) - 0.5 * std::log(2 * std::numbers::pi) - 0.5 * z * z;
}

}  // namespace

TEST_CASE("zero-weight MLP gives mu = 0 and sigma = log 2 + sigma_min") {
  Tape tape;
  const MlpParams p = const_mlp(tape, Tensor(Shape{3, 4}), Tensor(Shape{4}), Tensor(Shape{4, 2}),
                                Tensor(Shape{2}), Tensor(Shape{4, 2}), Tensor(Shape{2}));
  const GaussianParams g = mlp_gaussian(p, tape.constant(Tensor::matrix({{1, -2, 3}})));
  for (double v : g.mu.value().data()) CHECK(v == 0.0);
  for (double v : g.sigma.value().data()) CHECK(v == doctest::Approx(0.6932471805599453).epsilon(1e-14));
}

TEST_CASE("scalar MLP matches hand arithmetic on both sides of the leaky ReLU") {
  Tape tape;
  const MlpParams p = const_mlp(tape, Tensor::matrix({{2}}), Tensor::vector({-1}), Tensor::matrix({{3}}),
                                Tensor::vector({0.5}), Tensor::matrix({{-1}}), Tensor::vector({0}));
  const GaussianParams g = mlp_gaussian(p, tape.constant(Tensor::matrix({{1}, {-1}})));
  CHECK(g.mu.value()[0] == doctest::Approx(3.5).epsilon(1e-14));
  CHECK(g.sigma.value()[0] == doctest::Approx(0.31336168751822285).epsilon(1e-14));
  CHECK(g.mu.value()[1] == doctest::Approx(0.41).epsilon(1e-14));
  CHECK(g.sigma.value()[1] == doctest::Approx(0.7083596763414485).epsilon(1e-14));
}

TEST_CASE("property: sigma >= sigma_min even for hugely negative pre-activations") {
  Tape tape;
  const MlpParams p = const_mlp(tape, Tensor::matrix({{1}}), Tensor::vector({0}), Tensor::matrix({{0}}),
                                Tensor::vector({0}), Tensor::matrix({{-1e4}}), Tensor::vector({0}));
  const GaussianParams g = mlp_gaussian(p, tape.constant(Tensor::matrix({{1}, {5}})));
  for (double s : g.sigma.value().data()) CHECK(s >= 1e-4);
}

TEST_CASE("property: MLP outputs are batch equivariant") {
  std::mt19937_64 rng(3);
  Tape tape;
  const MlpParams p = random_mlp(tape, rng, 3, 5, 2);
  const Tensor x = random_tensor({4, 3}, rng);
  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  Tensor xp(Shape{4, 3});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t k = 0; k < 3; ++k) xp.at(r, k) = x.at(perm[r], k);
  const GaussianParams a = mlp_gaussian(p, tape.constant(x));
  const GaussianParams b = mlp_gaussian(p, tape.constant(xp));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(b.mu.value().at(r, k) == a.mu.value().at(perm[r], k));
      CHECK(b.sigma.value().at(r, k) == a.sigma.value().at(perm[r], k));
    }
}

TEST_CASE("encoder reads the concatenation [h; b]") {
  std::mt19937_64 rng(4);
  Tape tape;
  const MlpParams p = random_mlp(tape, rng, 5, 3, 2);
  const Tensor h = random_tensor({2, 3}, rng), b = random_tensor({2, 2}, rng);
  Tensor hb(Shape{2, 5});
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t k = 0; k < 3; ++k) hb.at(r, k) = h.at(r, k);
    for (std::size_t k = 0; k < 2; ++k) hb.at(r, 3 + k) = b.at(r, k);
  }
  const GaussianParams q = encoder(p, tape.constant(h), tape.constant(b));
  CHECK(q.mu.value() == mlp_gaussian(p, tape.constant(hb)).mu.value());
  CHECK_THROWS_AS(encoder(p, tape.constant(h), tape.constant(Tensor(Shape{3, 2}))), ShapeError);
  CHECK_THROWS_AS(mlp_gaussian(p, tape.constant(h)), ShapeError);
}

TEST_CASE("fixed prior is the standard normal") {
  Tape tape;
  const GaussianParams g = prior(nullptr, tape.constant(Tensor(Shape{3, 7}, 0.4)), 2);
  CHECK(g.mu.value() == Tensor(Shape{3, 2}, 0.0));
  CHECK(g.sigma.value() == Tensor(Shape{3, 2}, 1.0));
}

TEST_CASE("reparameterized sample") {
  Tape tape;
  const GaussianParams g = gauss(tape, Tensor::matrix({{1, -2}}), Tensor::matrix({{0.5, 3}}));
  CHECK(reparam_sample(g, Tensor(Shape{1, 2}, 0.0)).value() == Tensor::matrix({{1, -2}}));
  CHECK(reparam_sample(g, Tensor::matrix({{2, -1}})).value() == Tensor::matrix({{2, -5}}));
  CHECK_THROWS_AS(reparam_sample(g, Tensor(Shape{2, 2}, 0.0)), ShapeError);

  SUBCASE("concentrates on mu as sigma shrinks") {
    const Tensor eps = step_noise(5, std::vector<std::uint64_t>{0}, 0, NoiseStream::kLatent, 2);
    const GaussianParams tight = gauss(tape, Tensor::matrix({{1, -2}}), Tensor::matrix({{1e-9, 1e-9}}));
    const Tensor s = reparam_sample(tight, eps).value();
    CHECK(std::abs(s[0] - 1) < 1e-8);
    CHECK(std::abs(s[1] + 2) < 1e-8);
  }
  SUBCASE("gradient flows to mu and sigma") {
    Tape t2;
    Var mu = t2.variable(Tensor::matrix({{0.3}}));
    Var sg = t2.variable(Tensor::matrix({{2.0}}));
    t2.backward(sum(reparam_sample({mu, sg}, Tensor::matrix({{-1.5}}))));
    CHECK(t2.grad(mu).item() == 1.0);
    CHECK(t2.grad(sg).item() == -1.5);
  }
}

TEST_CASE("reparameterized samples have the right mean and variance") {
  const std::size_t n = 100000;
  std::vector<std::uint64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  Tape tape;
  const Tensor eps = step_noise(77, ids, 3, NoiseStream::kLatent, 1);
  const GaussianParams g = gauss(tape, Tensor(Shape{n, 1}, 1.5), Tensor(Shape{n, 1}, 0.7));
  const Tensor s = reparam_sample(g, eps).value();
  double m = 0, v = 0;
  for (double x : s.data()) m += x;
  m /= n;
  for (double x : s.data()) v += (x - m) * (x - m);
  v /= (n - 1);
  // Standard errors: sigma/sqrt(n) for the mean, sigma^2*sqrt(2/n) for the variance.
  CHECK(std::abs(m - 1.5) < 4 * 0.7 / std::sqrt(double(n)));
  CHECK(std::abs(v - 0.49) < 4 * 0.49 * std::sqrt(2.0 / n));
}

TEST_CASE("step noise is keyed by sequence id, step and stream") {
  const std::vector<std::uint64_t> ids = {4, 9};
  const Tensor a = step_noise(1, ids, 2, NoiseStream::kLatent, 3);
  const std::vector<std::uint64_t> swapped = {9, 4};
  const Tensor b = step_noise(1, swapped, 2, NoiseStream::kLatent, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a.at(0, k) == b.at(1, k));
    CHECK(a.at(1, k) == b.at(0, k));
  }
  CHECK(a != step_noise(1, ids, 3, NoiseStream::kLatent, 3));
  CHECK(a != step_noise(1, ids, 2, NoiseStream::kBackwardProxy, 3));
  CHECK(a != step_noise(2, ids, 2, NoiseStream::kLatent, 3));
  CHECK(a == step_noise(1, ids, 2, NoiseStream::kLatent, 3));
}

TEST_CASE("log density examples") {
  Tape tape;
  const GaussianParams std_normal = gauss(tape, Tensor::matrix({{0}}), Tensor::matrix({{1}}));
  CHECK(log_density(std_normal, tape.constant(Tensor::matrix({{0}}))).value()[0] ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-14));
  CHECK(log_density(std_normal, tape.constant(Tensor::matrix({{1}}))).value()[0] ==
        doctest::Approx(-0.9189385332046727 - 0.5).epsilon(1e-14));
  // Features are summed per row.
  const GaussianParams two = gauss(tape, Tensor::matrix({{0, 0}}), Tensor::matrix({{1, 1}}));
  CHECK(log_density(two, tape.constant(Tensor::matrix({{0, 1}}))).value()[0] ==
        doctest::Approx(2 * -0.9189385332046727 - 0.5).epsilon(1e-14));
  CHECK_THROWS_AS(log_density(two, tape.constant(Tensor::matrix({{0}}))), ShapeError);
}

TEST_CASE("property: log density matches the scalar formula") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    Tape tape;
    const Tensor mu = random_tensor({1, 3}, rng, -3, 3), sg = random_tensor({1, 3}, rng, 0.05, 4),
                 x = random_tensor({1, 3}, rng, -5, 5);
    double ref = 0;
    for (std::size_t k = 0; k < 3; ++k) ref += scalar_log_normal(x[k], mu[k], sg[k]);
    const double got = log_density(gauss(tape, mu, sg), tape.constant(x)).value()[0];
    CHECK(std::abs(got - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("density integrates to one") {
  const double mu = 0.4, sg = 0.8, lo = mu - 12 * sg, hi = mu + 12 * sg;
  const std::size_t n = 20001;
  Tensor xs(Shape{n, 1});
  for (std::size_t i = 0; i < n; ++i) xs[i] = lo + (hi - lo) * double(i) / double(n - 1);
  Tape tape;
  const Tensor lp = log_density(gauss(tape, Tensor(Shape{n, 1}, mu), Tensor(Shape{n, 1}, sg)),
                                tape.constant(xs))
                        .value();
  double integral = 0;
  const double dx = (hi - lo) / double(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) integral += 0.5 * (std::exp(lp[i]) + std::exp(lp[i + 1])) * dx;
  CHECK(std::abs(integral - 1.0) < 1e-6);
}

TEST_CASE("KL examples") {
  Tape tape;
  const GaussianParams q = gauss(tape, Tensor::matrix({{0.3, -1}}), Tensor::matrix({{0.2, 2}}));
  CHECK(kl_diag_gauss(q, q).value()[0] == 0.0);
  const GaussianParams n0 = gauss(tape, Tensor::matrix({{0}}), Tensor::matrix({{1}}));
  const GaussianParams n1 = gauss(tape, Tensor::matrix({{1}}), Tensor::matrix({{1}}));
  CHECK(kl_diag_gauss(n0, n1).value()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(kl_diag_gauss(q, n0), ShapeError);
}

TEST_CASE("property: KL is non-negative and matches the scalar closed form") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    Tape tape;
    const Tensor mq = random_tensor({1, 2}, rng, -3, 3), sq = random_tensor({1, 2}, rng, 0.01, 5),
                 mp = random_tensor({1, 2}, rng, -3, 3), sp = random_tensor({1, 2}, rng, 0.01, 5);
    const double kl = kl_diag_gauss(gauss(tape, mq, sq), gauss(tape, mp, sp)).value()[0];
    double ref = 0;
    for (std::size_t k = 0; k < 2; ++k)
      ref += std::log(sp[k] / sq[k]) + (sq[k] * sq[k] + (mq[k] - mp[k]) * (mq[k] - mp[k])) / (2 * sp[k] * sp[k]) - 0.5;
    CHECK(kl >= 0.0);
    CHECK(std::abs(kl - ref) <= 1e-11 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("KL matches a Monte Carlo estimate") {
  const std::size_t n = 100000;
  std::vector<std::uint64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  Tape tape;
  const GaussianParams q = gauss(tape, Tensor(Shape{n, 1}, 0.5), Tensor(Shape{n, 1}, 0.6));
  const GaussianParams p = gauss(tape, Tensor(Shape{n, 1}, -0.2), Tensor(Shape{n, 1}, 1.3));
  Var z = reparam_sample(q, step_noise(3, ids, 0, NoiseStream::kLatent, 1));
  const Tensor diff = (log_density(q, z) - log_density(p, z)).value();
  double m = 0, v = 0;
  for (double d : diff.data()) m += d;
  m /= n;
  for (double d : diff.data()) v += (d - m) * (d - m);
  const double se = std::sqrt(v / (n - 1) / n);
  const double kl = kl_diag_gauss(gauss(tape, Tensor::matrix({{0.5}}), Tensor::matrix({{0.6}})),
                                  gauss(tape, Tensor::matrix({{-0.2}}), Tensor::matrix({{1.3}})))
                        .value()[0];
  CHECK(std::abs(m - kl) < 4 * se);
}

TEST_CASE("log density and KL gradients match finite differences") {
  std::mt19937_64 rng(21);
  const ScalarFn ld = [](Tape&, const std::vector<Var>& v) {
    return sum(log_density({v[0], shift(square(v[1]), 0.1)}, v[2]));
  };
  CHECK(fd_max_rel_error(ld, {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng),
                              random_tensor({2, 3}, rng)}) < 1e-4);
  const ScalarFn kl = [](Tape&, const std::vector<Var>& v) {
    return sum(kl_diag_gauss({v[0], shift(square(v[1]), 0.1)}, {v[2], shift(square(v[3]), 0.1)}));
  };
  CHECK(fd_max_rel_error(kl, {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng),
                              random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}) < 1e-4);
  const ScalarFn mlp = [](Tape&, const std::vector<Var>& v) {
    const GaussianParams g = mlp_gaussian({v[0], v[1], v[2], v[3], v[4], v[5], 0.01, 1e-4}, v[6]);
    return sum(g.mu * g.sigma);
  };
  CHECK(fd_max_rel_error(mlp, {random_tensor({3, 4}, rng), random_tensor({4}, rng),
                               random_tensor({4, 2}, rng), random_tensor({2}, rng),
                               random_tensor({4, 2}, rng), random_tensor({2}, rng),
                               random_tensor({2, 3}, rng)}) < 1e-4);
}
