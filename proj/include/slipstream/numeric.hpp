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

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "slipstream/rng.hpp"

namespace slipstream {

// Dense row-major matrix of 32-bit reals.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> values);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  float& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  std::vector<float>& values() noexcept { return values_; }
  const std::vector<float>& values() const noexcept { return values_; }

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> values_;
};

// Throws ShapeError when a.cols != b.rows. Dot products accumulate in double.
Matrix matmul(const Matrix& a, const Matrix& b);

enum class Activation {
  kRelu,           // ReLU after every layer
  kSigmoidOnLast,  // ReLU on hidden layers, sigmoid on the output layer
};

struct MlpSpec {
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::kRelu;

  std::size_t layer_count() const { return layer_widths.size() - 1; }
  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t output_width() const { return layer_widths.back(); }

  // Throws ConfigError unless there are >= 2 widths, all >= 1.
  void validate() const;
};

// weights[l] is (width[l+1] x width[l]); biases[l] has width[l+1] entries.
struct MlpParams {
  std::vector<Matrix> weights;
  std::vector<std::vector<float>> biases;

  std::size_t parameter_count() const;
  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// Glorot-uniform weights, zero biases.
MlpParams init_mlp(const MlpSpec& spec, Rng& rng);
MlpParams zero_mlp(const MlpSpec& spec);

// Activation record of one forward pass. `pre[l]` holds the pre-activation of
// layer l and `post[l]` its activated output; post.back() is the MLP output.
struct MlpTape {
  MlpSpec spec;
  std::vector<float> input;
  std::vector<std::vector<float>> pre;
  std::vector<std::vector<float>> post;

  bool empty() const { return post.empty(); }
  std::span<const float> output() const { return post.back(); }
};

struct MlpForward {
  std::vector<float> output;
  MlpTape tape;
};

MlpForward mlp_forward(const MlpSpec& spec, const MlpParams& params,
                       std::span<const float> x);

// Allocation-reusing variant for training loops.
void mlp_forward(const MlpSpec& spec, const MlpParams& params,
                 std::span<const float> x, MlpTape& tape);

struct MlpGrads {
  std::vector<Matrix> weights;
  std::vector<std::vector<float>> biases;
  std::vector<float> input;

  static MlpGrads zeros_like(const MlpParams& params, std::size_t input_width);
  void set_zero();
};

// Where the upstream gradient is taken: at the MLP output (after the final
// activation) or directly at the final pre-activation (e.g. d loss / d logit).
enum class GradAt { kOutput, kPreActivation };

// Adds the parameter gradients of this tape into `grads` and overwrites
// grads.input with the gradient wrt the MLP input.
void mlp_backward(const MlpTape& tape, const MlpParams& params,
                  std::span<const float> upstream, GradAt at, MlpGrads& grads);

MlpGrads mlp_backward(const MlpTape& tape, const MlpParams& params,
                      std::span<const float> upstream,
                      GradAt at = GradAt::kOutput);

inline constexpr double kProbabilityClamp = 1e-7;

double clamp_probability(double p);

// Binary cross entropy on a clamped probability.
double bce_loss(double p, int y);

// Normalizes to zero mean and unit variance (population variance). No affine
// parameters. A constant vector maps to all zeros.
std::vector<float> layer_norm(std::span<const float> x, double eps = 1e-5);

struct LayerNormCache {
  std::vector<float> normalized;
  double inv_std = 0.0;
};

void layer_norm(std::span<const float> x, double eps, LayerNormCache& cache);

// dx given the forward cache and dy.
void layer_norm_backward(const LayerNormCache& cache, std::span<const float> dy,
                         std::span<float> dx);

// p <- p - lr * g
void sgd_step(std::span<float> params, std::span<const float> grads, double lr);
std::vector<float> sgd_step(std::vector<float> params, std::span<const float> grads,
                            double lr);
void sgd_step(MlpParams& params, const MlpGrads& grads, double lr);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t parameter_count = 0;
  // Parameters skipped because the probe crossed a ReLU kink.
  std::size_t skipped = 0;
};

// Central finite differences of sum(output) against mlp_backward. Relative
// error is |a - n| / max(|a|, |n|, floor).
GradCheckReport check_gradients(const MlpSpec& spec, const MlpParams& params,
                                std::span<const float> x, double step = 1e-2,
                                double floor = 1e-2);

}  // namespace slipstream
