// Copyright 2026 The Slipstream Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "../oracles.hpp"
#include "slipstream/error.hpp"
#include "slipstream/numeric.hpp"

using namespace slipstream;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (float& v : m.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return m;
}

std::vector<float> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(-scale, scale));
  return v;
}

}  // namespace

TEST_CASE("matmul: identity, hand product, zero annihilator") {
  const Matrix a(2, 2, {1, 2, 3, 4});
  CHECK(matmul(Matrix::identity(2), a) == a);
  CHECK(matmul(Matrix(1, 2, {1, 2}), Matrix(2, 1, {3, 4})) == Matrix(1, 1, {11}));
  const Matrix z = matmul(Matrix(3, 2), a);
  for (float v : z.values()) CHECK(v == 0.0f);
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
}

TEST_CASE("matmul: non-finite inputs are rejected") {
  Matrix a(1, 1, {std::numeric_limits<float>::infinity()});
  CHECK_THROWS_AS(matmul(a, Matrix(1, 1, {1})), DomainError);
}

TEST_CASE("matmul associativity on random 8x8 chains") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(8, 8, rng);
    const Matrix b = random_matrix(8, 8, rng);
    const Matrix c = random_matrix(8, 8, rng);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < left.values().size(); ++i) {
      num = std::max(num, std::abs(double(left.values()[i]) - right.values()[i]));
      den = std::max(den, std::abs(double(left.values()[i])));
    }
    CHECK(num / den < 1e-4);
  }
}

TEST_CASE("MlpSpec validation") {
  CHECK_THROWS_AS((MlpSpec{{3}, Activation::kRelu}.validate()), ConfigError);
  CHECK_THROWS_AS((MlpSpec{{3, 0, 1}, Activation::kRelu}.validate()), ConfigError);
  CHECK_NOTHROW((MlpSpec{{3, 1}, Activation::kRelu}.validate()));
}

TEST_CASE("mlp_forward: relu identity layer, zero weights with sigmoid head") {
  MlpSpec spec{{2, 2}, Activation::kRelu};
  MlpParams p = zero_mlp(spec);
  p.weights[0] = Matrix::identity(2);
  const std::vector<float> x{1.0f, -1.0f};
  CHECK(mlp_forward(spec, p, x).output == std::vector<float>{1.0f, 0.0f});

  MlpSpec head{{3, 4, 1}, Activation::kSigmoidOnLast};
  const auto out = mlp_forward(head, zero_mlp(head), std::vector<float>{1, 2, 3}).output;
  CHECK(out[0] == doctest::Approx(0.5));
}

TEST_CASE("mlp_forward: 2-2-1 net matches scalar oracle") {
  MlpSpec spec{{2, 2, 1}, Activation::kSigmoidOnLast};
  MlpParams p = zero_mlp(spec);
  p.weights[0] = Matrix(2, 2, {0.5f, -0.25f, 0.75f, 0.1f});
  p.biases[0] = {0.1f, -0.2f};
  p.weights[1] = Matrix(1, 2, {1.5f, -0.5f});
  p.biases[1] = {0.05f};
  const std::vector<float> x{0.3f, -0.7f};
  const double expected = oracle::mlp_forward(oracle::to_double(spec, p), {0.3f, -0.7f})[0];
  CHECK(mlp_forward(spec, p, x).output[0] == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("mlp_forward: shape errors") {
  MlpSpec spec{{3, 2}, Activation::kRelu};
  const MlpParams p = zero_mlp(spec);
  CHECK_THROWS_AS(mlp_forward(spec, p, std::vector<float>{1, 2}), ShapeError);
  MlpSpec other{{3, 4}, Activation::kRelu};
  CHECK_THROWS_AS(mlp_forward(other, p, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST_CASE("mlp_backward: linear closed form, zero upstream, empty tape") {
  MlpSpec spec{{3, 2}, Activation::kRelu};
  MlpParams p = zero_mlp(spec);
  p.weights[0] = Matrix(2, 3, {1, 1, 1, 1, 1, 1});
  const std::vector<float> x{1, 2, 3};  // positive pre-activations: relu is the identity
  const auto fwd = mlp_forward(spec, p, x);
  const std::vector<float> g{0.5f, -2.0f};
  const MlpGrads grads = mlp_backward(fwd.tape, p, g);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) CHECK(grads.weights[0](r, c) == doctest::Approx(g[r] * x[c]));
  }
  CHECK(grads.biases[0] == g);

  const MlpGrads zero = mlp_backward(fwd.tape, p, std::vector<float>{0, 0});
  for (float v : zero.weights[0].values()) CHECK(v == 0.0f);
  for (float v : zero.input) CHECK(v == 0.0f);

  CHECK_THROWS_AS(mlp_backward(MlpTape{}, p, g), DomainError);
}

TEST_CASE("gradient check on random 2-3-1 and 4-8-4-1 nets") {
  for (const auto& widths : {std::vector<std::size_t>{2, 3, 1}, std::vector<std::size_t>{4, 8, 4, 1}}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      MlpSpec spec{widths, Activation::kSigmoidOnLast};
      Rng rng(derive_seed(seed, "gradcheck"));
      MlpParams p = init_mlp(spec, rng);
      for (auto& b : p.biases) for (float& v : b) v = static_cast<float>(rng.uniform(-0.5, 0.5));
      const auto x = random_vector(widths[0], rng);
      const GradCheckReport r = check_gradients(spec, p, x);
      CHECK(r.parameter_count == p.parameter_count());
      CHECK(r.max_rel_error < 1e-2);  // float differencing; the tight bound lives in acceptance
    }
  }
}

TEST_CASE("bce_loss closed forms and clamping") {
  CHECK(bce_loss(0.5, 1) == doctest::Approx(std::log(2.0)));
  CHECK(bce_loss(0.9, 0) == doctest::Approx(-std::log(0.1)));
  CHECK(bce_loss(1.0, 1) == doctest::Approx(1e-7).epsilon(1e-3));
  CHECK(bce_loss(0.0, 1) == doctest::Approx(-std::log(1e-7)));
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    CHECK(bce_loss(rng.uniform(), static_cast<int>(rng.below(2))) >= 0.0);
  }
}

TEST_CASE("layer_norm values and properties") {
  const auto c = layer_norm(std::vector<float>{3, 3, 3, 3});
  for (float v : c) CHECK(v == 0.0f);

  const auto y = layer_norm(std::vector<float>{1, 2, 3, 4}, 1e-5);
  const double s = std::sqrt(1.25 + 1e-5);
  CHECK(y[0] == doctest::Approx(-1.5 / s));
  CHECK(y[1] == doctest::Approx(-0.5 / s));
  CHECK(y[2] == doctest::Approx(0.5 / s));
  CHECK(y[3] == doctest::Approx(1.5 / s));
  CHECK(y[0] == doctest::Approx(-1.3416).epsilon(1e-4));

  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_vector(4 + rng.below(60), rng, 3.0);
    const auto n = layer_norm(x);
    double mean = 0.0, var = 0.0;
    for (float v : n) mean += v;
    mean /= n.size();
    for (float v : n) var += (v - mean) * (v - mean);
    var /= n.size();
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-3);
    const auto again = layer_norm(n);
    for (std::size_t i = 0; i < n.size(); ++i) CHECK(again[i] == doctest::Approx(n[i]).epsilon(1e-4));
  }
}

TEST_CASE("layer_norm_backward matches finite differences") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_vector(6, rng, 2.0);
    const auto w = random_vector(6, rng);
    LayerNormCache cache;
    layer_norm(x, 1e-5, cache);
    std::vector<float> dx(6);
    layer_norm_backward(cache, w, dx);
    auto objective = [&](const std::vector<double>& v) {
      const auto n = oracle::layer_norm(v, 1e-5);
      double s = 0.0;
      for (std::size_t i = 0; i < n.size(); ++i) s += n[i] * w[i];
      return s;
    };
    for (std::size_t i = 0; i < 6; ++i) {
      std::vector<double> up(x.begin(), x.end()), down(x.begin(), x.end());
      up[i] += 1e-6;
      down[i] -= 1e-6;
      const double fd = (objective(up) - objective(down)) / 2e-6;
      CHECK(dx[i] == doctest::Approx(fd).epsilon(1e-3).scale(1.0));
    }
  }
}

TEST_CASE("sgd_step") {
  CHECK(sgd_step(std::vector<float>{1.0f}, std::vector<float>{1.0f}, 0.1)[0] ==
        doctest::Approx(0.9));
  const std::vector<float> p{1, -2, 3};
  CHECK(sgd_step(p, std::vector<float>{0, 0, 0}, 0.5) == p);
  CHECK_THROWS_AS(sgd_step(p, std::vector<float>{0, 0}, 0.5), ShapeError);

  // Two steps with fixed gradients equal one step with their sum.
  Rng rng(4);
  const auto g1 = random_vector(16, rng);
  const auto g2 = random_vector(16, rng);
  const auto base = random_vector(16, rng);
  const auto two = sgd_step(sgd_step(base, g1, 0.05), g2, 0.05);
  std::vector<float> sum(16);
  for (std::size_t i = 0; i < 16; ++i) sum[i] = g1[i] + g2[i];
  const auto one = sgd_step(base, sum, 0.05);
  for (std::size_t i = 0; i < 16; ++i) CHECK(two[i] == doctest::Approx(one[i]).epsilon(1e-6));
}

TEST_CASE("init_mlp is deterministic and finite") {
  MlpSpec spec{{4, 8, 1}, Activation::kSigmoidOnLast};
  Rng a(1), b(1);
  const MlpParams pa = init_mlp(spec, a);
  CHECK(pa == init_mlp(spec, b));
  for (const auto& w : pa.weights) CHECK(w.all_finite());
}
