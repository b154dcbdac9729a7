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

#include "slipstream/model.hpp"

#include <algorithm>
#include <string>

#include "slipstream/error.hpp"

namespace slipstream {

MlpSpec ModelSpec::bottom_spec() const {
  MlpSpec s;
  s.layer_widths.push_back(n_dense);
  s.layer_widths.insert(s.layer_widths.end(), bottom_hidden.begin(), bottom_hidden.end());
  s.layer_widths.push_back(dim);
  s.activation = Activation::kRelu;
  return s;
}

std::size_t ModelSpec::interaction_width() const {
  const std::size_t vectors = table_sizes.size() + 1;
  return dim + vectors * (vectors - 1) / 2;
}

MlpSpec ModelSpec::top_spec() const {
  MlpSpec s;
  s.layer_widths.push_back(interaction_width());
  s.layer_widths.insert(s.layer_widths.end(), top_hidden.begin(), top_hidden.end());
  s.layer_widths.push_back(1);
  s.activation = Activation::kSigmoidOnLast;
  return s;
}

void ModelSpec::validate() const {
  if (n_dense == 0) throw ConfigError("model needs at least one dense feature");
  if (table_sizes.empty()) throw ConfigError("model needs at least one embedding table");
  if (dim == 0) throw ConfigError("embedding dimension must be >= 1");
  bottom_spec().validate();
  top_spec().validate();
  if (!(layer_norm_eps > 0.0)) throw ConfigError("layer_norm_eps must be > 0");
}

DlrmModel::DlrmModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  bottom_spec_ = spec_.bottom_spec();
  top_spec_ = spec_.top_spec();
  Rng mlp_rng(derive_seed(seed, "mlp"));
  bottom_ = init_mlp(bottom_spec_, mlp_rng);
  top_ = init_mlp(top_spec_, mlp_rng);
  Rng emb_rng(derive_seed(seed, "embeddings"));
  bag_ = EmbeddingBag::uniform(spec_.table_sizes, spec_.dim, emb_rng);
}

DlrmModel DlrmModel::zeros(ModelSpec spec) {
  spec.validate();
  DlrmModel m;
  m.spec_ = std::move(spec);
  m.bottom_spec_ = m.spec_.bottom_spec();
  m.top_spec_ = m.spec_.top_spec();
  m.bottom_ = zero_mlp(m.bottom_spec_);
  m.top_ = zero_mlp(m.top_spec_);
  m.bag_ = EmbeddingBag(m.spec_.table_sizes, m.spec_.dim);
  return m;
}

float DlrmModel::forward(const InputView& input, ModelWorkspace& ws) const {
  const std::size_t k = spec_.table_sizes.size();
  if (input.dense.size() != spec_.n_dense || input.sparse.size() != k) {
    throw ShapeError("input does not match the model schema");
  }
  const std::size_t d = spec_.dim;
  ws.vectors.resize(k + 1);
  ws.norms.resize(k + 1);

  mlp_forward(bottom_spec_, bottom_, input.dense, ws.bottom);
  auto place = [&](std::size_t v, std::span<const float> raw) {
    if (spec_.layer_norm) {
      layer_norm(raw, spec_.layer_norm_eps, ws.norms[v]);
      ws.vectors[v] = ws.norms[v].normalized;
    } else {
      ws.vectors[v].assign(raw.begin(), raw.end());
    }
  };
  place(0, ws.bottom.output());
  for (std::size_t j = 0; j < k; ++j) place(j + 1, bag_.row(j, input.sparse[j]));

  ws.interaction.assign(ws.vectors[0].begin(), ws.vectors[0].end());
  for (std::size_t a = 0; a <= k; ++a) {
    for (std::size_t b = a + 1; b <= k; ++b) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        dot += static_cast<double>(ws.vectors[a][c]) * ws.vectors[b][c];
      }
      ws.interaction.push_back(static_cast<float>(dot));
    }
  }
  mlp_forward(top_spec_, top_, ws.interaction, ws.top);
  return ws.top.output()[0];
}

float DlrmModel::predict(const InputView& input) const {
  ModelWorkspace ws;
  return forward(input, ws);
}

std::vector<float> DlrmModel::predict(const Dataset& data,
                                      std::span<const std::uint32_t> ids) const {
  ModelWorkspace ws;
  std::vector<float> out;
  out.reserve(ids.size());
  for (const std::uint32_t id : ids) out.push_back(forward(data.view(id), ws));
  return out;
}

std::vector<float> DlrmModel::predict(const Dataset& data) const {
  ModelWorkspace ws;
  std::vector<float> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(forward(data.view(i), ws));
  return out;
}

void DlrmModel::backward(const InputView& input, float p, ModelWorkspace& ws) {
  const std::size_t k = spec_.table_sizes.size();
  const std::size_t d = spec_.dim;
  // d BCE / d logit for a sigmoid head.
  const float dlogit = p - static_cast<float>(input.label);
  const float upstream[1] = {dlogit};
  mlp_backward(ws.top, top_, upstream, GradAt::kPreActivation, top_grads_);
  const auto& g_in = top_grads_.input;

  ws.vector_grads.resize(k + 1);
  for (auto& g : ws.vector_grads) g.assign(d, 0.0f);
  for (std::size_t c = 0; c < d; ++c) ws.vector_grads[0][c] += g_in[c];
  std::size_t pair = d;
  for (std::size_t a = 0; a <= k; ++a) {
    for (std::size_t b = a + 1; b <= k; ++b) {
      const float g = g_in[pair++];
      if (g == 0.0f) continue;
      for (std::size_t c = 0; c < d; ++c) {
        ws.vector_grads[a][c] += g * ws.vectors[b][c];
        ws.vector_grads[b][c] += g * ws.vectors[a][c];
      }
    }
  }

  ws.raw_grad.resize(d);
  auto raw = [&](std::size_t v) -> std::span<const float> {
    if (!spec_.layer_norm) return ws.vector_grads[v];
    layer_norm_backward(ws.norms[v], ws.vector_grads[v], ws.raw_grad);
    return ws.raw_grad;
  };

  mlp_backward(ws.bottom, bottom_, raw(0), GradAt::kOutput, bottom_grads_);

  for (std::size_t j = 0; j < k; ++j) {
    const auto g = raw(j + 1);
    const std::uint64_t key = (static_cast<std::uint64_t>(j) << 32) | input.sparse[j];
    auto [it, inserted] = row_slot_.try_emplace(key, row_keys_.size());
    if (inserted) {
      row_keys_.push_back(key);
      row_grads_.resize(row_grads_.size() + d, 0.0f);
    }
    float* dst = row_grads_.data() + it->second * d;
    for (std::size_t c = 0; c < d; ++c) dst[c] += g[c];
  }
}

std::vector<float> DlrmModel::train_batch(const Dataset& data,
                                          std::span<const std::uint32_t> ids, double lr) {
  if (ids.empty()) return {};
  if (bottom_grads_.weights.empty()) {
    bottom_grads_ = MlpGrads::zeros_like(bottom_, bottom_spec_.input_width());
    top_grads_ = MlpGrads::zeros_like(top_, top_spec_.input_width());
  } else {
    bottom_grads_.set_zero();
    top_grads_.set_zero();
  }
  row_slot_.clear();
  row_keys_.clear();
  row_grads_.clear();

  std::vector<float> preds;
  preds.reserve(ids.size());
  for (const std::uint32_t id : ids) {
    const InputView input = data.view(id);
    const float p = forward(input, ws_);
    preds.push_back(p);
    backward(input, p, ws_);
  }

  const double step = lr / static_cast<double>(ids.size());
  sgd_step(bottom_, bottom_grads_, step);
  sgd_step(top_, top_grads_, step);
  HotTable* hot = hot_ ? &*hot_ : nullptr;
  const std::size_t d = spec_.dim;
  for (std::size_t r = 0; r < row_keys_.size(); ++r) {
    const std::uint64_t key = row_keys_[r];
    update_row(bag_, hot, static_cast<std::size_t>(key >> 32),
               static_cast<std::size_t>(key & 0xffffffffULL),
               std::span<const float>(row_grads_.data() + r * d, d), step);
  }
  return preds;
}

bool DlrmModel::same_parameters(const DlrmModel& other) const {
  return bottom_ == other.bottom_ && top_ == other.top_ && bag_ == other.bag_;
}

}  // namespace slipstream
