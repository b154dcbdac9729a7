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

#include "slipstream/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slipstream/error.hpp"

namespace slipstream {
namespace {

std::string dims(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

float sigmoid(double z) { return static_cast<float>(1.0 / (1.0 + std::exp(-z))); }

bool sigmoid_layer(const MlpSpec& spec, std::size_t layer) {
  return spec.activation == Activation::kSigmoidOnLast &&
         layer + 1 == spec.layer_count();
}

void check_params(const MlpSpec& spec, const MlpParams& params) {
  if (params.weights.size() != spec.layer_count() ||
      params.biases.size() != spec.layer_count()) {
    throw ShapeError("mlp: expected " + std::to_string(spec.layer_count()) +
                     " layers of parameters");
  }
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const Matrix& w = params.weights[l];
    if (w.rows() != spec.layer_widths[l + 1] || w.cols() != spec.layer_widths[l]) {
      throw ShapeError("mlp: layer " + std::to_string(l) + " weight is " +
                       dims(w.rows(), w.cols()) + ", expected " +
                       dims(spec.layer_widths[l + 1], spec.layer_widths[l]));
    }
    if (params.biases[l].size() != spec.layer_widths[l + 1]) {
      throw ShapeError("mlp: layer " + std::to_string(l) + " bias length mismatch");
    }
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ShapeError("matrix " + dims(rows, cols) + " given " +
                     std::to_string(values_.size()) + " values");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](float v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + dims(a.rows(), a.cols()) + " x " +
                     dims(b.rows(), b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        acc += static_cast<double>(a(i, k)) * b(k, j);
      }
      out(i, j) = static_cast<float>(acc);
    }
  }
  if (!out.all_finite()) throw DomainError("matmul: non-finite result");
  return out;
}

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) {
    throw ConfigError("mlp spec needs at least two layer widths");
  }
  for (const std::size_t w : layer_widths) {
    if (w == 0) throw ConfigError("mlp spec widths must be >= 1");
  }
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.values().size();
  for (const auto& b : biases) n += b.size();
  return n;
}

MlpParams init_mlp(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  MlpParams p;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = spec.layer_widths[l];
    const std::size_t out = spec.layer_widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix w(out, in);
    for (float& v : w.values()) v = static_cast<float>(rng.uniform(-limit, limit));
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(out, 0.0f);
  }
  return p;
}

MlpParams zero_mlp(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    p.weights.emplace_back(spec.layer_widths[l + 1], spec.layer_widths[l]);
    p.biases.emplace_back(spec.layer_widths[l + 1], 0.0f);
  }
  return p;
}

void mlp_forward(const MlpSpec& spec, const MlpParams& params,
                 std::span<const float> x, MlpTape& tape) {
  spec.validate();
  check_params(spec, params);
  if (x.size() != spec.input_width()) {
    throw ShapeError("mlp_forward: input has " + std::to_string(x.size()) +
                     " values, expected " + std::to_string(spec.input_width()));
  }
  tape.spec = spec;
  tape.input.assign(x.begin(), x.end());
  tape.pre.resize(spec.layer_count());
  tape.post.resize(spec.layer_count());
  std::span<const float> in = tape.input;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const Matrix& w = params.weights[l];
    const auto& b = params.biases[l];
    auto& pre = tape.pre[l];
    auto& post = tape.post[l];
    pre.resize(w.rows());
    post.resize(w.rows());
    const bool last_sigmoid = sigmoid_layer(spec, l);
    for (std::size_t o = 0; o < w.rows(); ++o) {
      double acc = b[o];
      const auto wr = w.row(o);
      for (std::size_t i = 0; i < wr.size(); ++i) {
        acc += static_cast<double>(wr[i]) * in[i];
      }
      pre[o] = static_cast<float>(acc);
      post[o] = last_sigmoid ? sigmoid(acc) : std::max(pre[o], 0.0f);
    }
    in = post;
  }
}

MlpForward mlp_forward(const MlpSpec& spec, const MlpParams& params,
                       std::span<const float> x) {
  MlpForward result;
  mlp_forward(spec, params, x, result.tape);
  const auto out = result.tape.output();
  result.output.assign(out.begin(), out.end());
  return result;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& params, std::size_t input_width) {
  MlpGrads g;
  for (const auto& w : params.weights) g.weights.emplace_back(w.rows(), w.cols());
  for (const auto& b : params.biases) g.biases.emplace_back(b.size(), 0.0f);
  g.input.assign(input_width, 0.0f);
  return g;
}

void MlpGrads::set_zero() {
  for (auto& w : weights) std::fill(w.values().begin(), w.values().end(), 0.0f);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0f);
  std::fill(input.begin(), input.end(), 0.0f);
}

void mlp_backward(const MlpTape& tape, const MlpParams& params,
                  std::span<const float> upstream, GradAt at, MlpGrads& grads) {
  if (tape.empty()) throw DomainError("mlp_backward: empty tape");
  const MlpSpec& spec = tape.spec;
  check_params(spec, params);
  if (upstream.size() != spec.output_width()) {
    throw ShapeError("mlp_backward: upstream gradient length mismatch");
  }
  if (grads.weights.size() != spec.layer_count()) {
    grads = MlpGrads::zeros_like(params, spec.input_width());
  }
  grads.input.resize(spec.input_width());

  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> next;
  for (std::size_t l = spec.layer_count(); l-- > 0;) {
    const auto& pre = tape.pre[l];
    const auto& post = tape.post[l];
    const bool skip_activation = (l + 1 == spec.layer_count() && at == GradAt::kPreActivation);
    if (!skip_activation) {
      if (sigmoid_layer(spec, l)) {
        for (std::size_t o = 0; o < delta.size(); ++o) {
          const double s = post[o];
          delta[o] *= s * (1.0 - s);
        }
      } else {
        for (std::size_t o = 0; o < delta.size(); ++o) {
          if (pre[o] <= 0.0f) delta[o] = 0.0;
        }
      }
    }
    std::span<const float> in =
        l == 0 ? std::span<const float>(tape.input) : std::span<const float>(tape.post[l - 1]);
    const Matrix& w = params.weights[l];
    Matrix& gw = grads.weights[l];
    auto& gb = grads.biases[l];
    next.assign(w.cols(), 0.0);
    for (std::size_t o = 0; o < w.rows(); ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      gb[o] += static_cast<float>(d);
      auto gwr = gw.row(o);
      const auto wr = w.row(o);
      for (std::size_t i = 0; i < w.cols(); ++i) {
        gwr[i] += static_cast<float>(d * in[i]);
        next[i] += d * wr[i];
      }
    }
    delta.swap(next);
  }
  for (std::size_t i = 0; i < delta.size(); ++i) {
    grads.input[i] = static_cast<float>(delta[i]);
  }
}

MlpGrads mlp_backward(const MlpTape& tape, const MlpParams& params,
                      std::span<const float> upstream, GradAt at) {
  if (tape.empty()) throw DomainError("mlp_backward: empty tape");
  MlpGrads grads = MlpGrads::zeros_like(params, tape.spec.input_width());
  mlp_backward(tape, params, upstream, at, grads);
  return grads;
}

double clamp_probability(double p) {
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

double bce_loss(double p, int y) {
  const double q = clamp_probability(p);
  return y != 0 ? -std::log(q) : -std::log1p(-q);
}

void layer_norm(std::span<const float> x, double eps, LayerNormCache& cache) {
  const std::size_t n = x.size();
  cache.normalized.resize(n);
  if (n == 0) {
    cache.inv_std = 0.0;
    return;
  }
  double mean = 0.0;
  for (const float v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const float v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  cache.inv_std = 1.0 / std::sqrt(var + eps);
  for (std::size_t i = 0; i < n; ++i) {
    cache.normalized[i] = static_cast<float>((x[i] - mean) * cache.inv_std);
  }
}

std::vector<float> layer_norm(std::span<const float> x, double eps) {
  LayerNormCache cache;
  layer_norm(x, eps, cache);
  return std::move(cache.normalized);
}

void layer_norm_backward(const LayerNormCache& cache, std::span<const float> dy,
                         std::span<float> dx) {
  const std::size_t n = cache.normalized.size();
  if (dy.size() != n || dx.size() != n) {
    throw ShapeError("layer_norm_backward: length mismatch");
  }
  if (n == 0) return;
  double mean_dy = 0.0;
  double mean_dy_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_dy += dy[i];
    mean_dy_y += static_cast<double>(dy[i]) * cache.normalized[i];
  }
  mean_dy /= static_cast<double>(n);
  mean_dy_y /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    dx[i] = static_cast<float>(
        cache.inv_std * (dy[i] - mean_dy - cache.normalized[i] * mean_dy_y));
  }
}

void sgd_step(std::span<float> params, std::span<const float> grads, double lr) {
  if (params.size() != grads.size()) {
    throw ShapeError("sgd_step: " + std::to_string(params.size()) + " params vs " +
                     std::to_string(grads.size()) + " grads");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] = static_cast<float>(params[i] - lr * grads[i]);
  }
}

std::vector<float> sgd_step(std::vector<float> params, std::span<const float> grads,
                            double lr) {
  sgd_step(std::span<float>(params), grads, lr);
  return params;
}

void sgd_step(MlpParams& params, const MlpGrads& grads, double lr) {
  if (params.weights.size() != grads.weights.size() ||
      params.biases.size() != grads.biases.size()) {
    throw ShapeError("sgd_step: layer count mismatch");
  }
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    sgd_step(std::span<float>(params.weights[l].values()),
             std::span<const float>(grads.weights[l].values()), lr);
    sgd_step(std::span<float>(params.biases[l]), std::span<const float>(grads.biases[l]), lr);
  }
}

GradCheckReport check_gradients(const MlpSpec& spec, const MlpParams& params,
                                std::span<const float> x, double step, double floor) {
  auto objective = [&](const MlpParams& p, std::vector<std::vector<float>>* pre) {
    MlpTape tape;
    mlp_forward(spec, p, x, tape);
    if (pre != nullptr) *pre = tape.pre;
    double sum = 0.0;
    for (const float v : tape.output()) sum += v;
    return sum;
  };
  auto same_pattern = [](const std::vector<std::vector<float>>& a,
                         const std::vector<std::vector<float>>& b) {
    for (std::size_t l = 0; l < a.size(); ++l) {
      for (std::size_t i = 0; i < a[l].size(); ++i) {
        if ((a[l][i] > 0.0f) != (b[l][i] > 0.0f)) return false;
      }
    }
    return true;
  };

  const MlpForward fwd = mlp_forward(spec, params, x);
  const std::vector<float> ones(spec.output_width(), 1.0f);
  const MlpGrads analytic = mlp_backward(fwd.tape, params, ones);

  GradCheckReport report;
  MlpParams probe = params;
  std::vector<std::vector<float>> pre_plus;
  std::vector<std::vector<float>> pre_minus;
  auto visit = [&](float& slot, float analytic_value) {
    const float saved = slot;
    slot = static_cast<float>(saved + step);
    const double up = objective(probe, &pre_plus);
    const double h_up = static_cast<double>(slot) - saved;
    slot = static_cast<float>(saved - step);
    const double down = objective(probe, &pre_minus);
    const double h_down = saved - static_cast<double>(slot);
    slot = saved;
    ++report.parameter_count;
    if (!same_pattern(pre_plus, pre_minus) || !same_pattern(pre_plus, fwd.tape.pre)) {
      ++report.skipped;
      return;
    }
    const double numeric = (up - down) / (h_up + h_down);
    const double a = analytic_value;
    const double denom = std::max({std::abs(numeric), std::abs(a), floor});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(numeric - a) / denom);
  };
  for (std::size_t l = 0; l < probe.weights.size(); ++l) {
    auto& w = probe.weights[l].values();
    for (std::size_t i = 0; i < w.size(); ++i) visit(w[i], analytic.weights[l].values()[i]);
    auto& b = probe.biases[l];
    for (std::size_t i = 0; i < b.size(); ++i) visit(b[i], analytic.biases[l][i]);
  }
  return report;
}

}  // namespace slipstream
