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
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "slipstream/data.hpp"
#include "slipstream/embedding.hpp"
#include "slipstream/numeric.hpp"

namespace slipstream {

struct ModelSpec {
  std::size_t n_dense = 4;
  std::vector<std::size_t> table_sizes;
  std::size_t dim = 8;
  std::vector<std::size_t> bottom_hidden{16};
  std::vector<std::size_t> top_hidden{16};
  bool layer_norm = true;
  double layer_norm_eps = 1e-5;

  // n_dense -> bottom_hidden... -> dim, ReLU throughout.
  MlpSpec bottom_spec() const;
  // dim + pairwise dots -> top_hidden... -> 1, sigmoid head.
  MlpSpec top_spec() const;
  std::size_t interaction_width() const;
  void validate() const;
};

// Scratch buffers for one input's forward/backward pass.
struct ModelWorkspace {
  MlpTape bottom;
  MlpTape top;
  std::vector<LayerNormCache> norms;       // [0] bottom output, [1 + j] table j
  std::vector<std::vector<float>> vectors;  // interaction operands
  std::vector<float> interaction;
  std::vector<std::vector<float>> vector_grads;
  std::vector<float> raw_grad;
};

// Miniature DLRM: bottom MLP over dense features, one embedding per sparse
// feature, pairwise dot-product interaction, top MLP with a sigmoid head.
class DlrmModel {
 public:
  DlrmModel() = default;
  DlrmModel(ModelSpec spec, std::uint64_t seed);
  // All parameters and embeddings zero.
  static DlrmModel zeros(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  const MlpParams& bottom() const { return bottom_; }
  const MlpParams& top() const { return top_; }
  MlpParams& bottom() { return bottom_; }
  MlpParams& top() { return top_; }
  const EmbeddingBag& bag() const { return bag_; }
  EmbeddingBag& bag() { return bag_; }

  // Installs a write-through hot mirror. Updates keep bag and mirror equal.
  void attach_hot_table(HotTable hot) { hot_ = std::move(hot); }
  const HotTable* hot_table() const { return hot_ ? &*hot_ : nullptr; }

  // Click probability of one input.
  float forward(const InputView& input, ModelWorkspace& ws) const;
  float predict(const InputView& input) const;
  std::vector<float> predict(const Dataset& data, std::span<const std::uint32_t> ids) const;
  std::vector<float> predict(const Dataset& data) const;

  // One SGD step on the mean BCE of the batch. Returns the per-input
  // probabilities computed before the update.
  std::vector<float> train_batch(const Dataset& data, std::span<const std::uint32_t> ids,
                                 double lr);

  // Bitwise equality of every trainable parameter.
  bool same_parameters(const DlrmModel& other) const;

 private:
  void backward(const InputView& input, float p, ModelWorkspace& ws);

  ModelSpec spec_;
  MlpSpec bottom_spec_;
  MlpSpec top_spec_;
  MlpParams bottom_;
  MlpParams top_;
  EmbeddingBag bag_;
  std::optional<HotTable> hot_;

  // per-batch accumulators
  MlpGrads bottom_grads_;
  MlpGrads top_grads_;
  std::unordered_map<std::uint64_t, std::size_t> row_slot_;
  std::vector<std::uint64_t> row_keys_;
  std::vector<float> row_grads_;
  ModelWorkspace ws_;
};

}  // namespace slipstream
