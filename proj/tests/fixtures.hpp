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

// Small self-contained worlds for the staleness tests: a synthetic dataset, a
// hot table frozen from its access profile, and two snapshots separated by
// random per-row updates of varying magnitude.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "slipstream/classifier.hpp"
#include "slipstream/data.hpp"
#include "slipstream/embedding.hpp"
#include "slipstream/snapshot.hpp"

namespace fixture {

struct World {
  slipstream::Dataset data;
  slipstream::HotFlags flags;
  slipstream::EmbeddingBag before;
  slipstream::EmbeddingBag after;
  slipstream::HotTable hot;
  slipstream::SnapshotStore store{2};
  slipstream::DatasetPartition partition;
};

struct WorldSpec {
  std::size_t n_inputs = 5000;
  std::size_t n_sparse = 4;
  std::size_t table_size = 400;
  std::size_t dim = 4;
  double zipf = 1.2;
  double lambda = 1e-4;
  std::uint64_t seed = 1;
  // Row movement magnitudes are log-uniform in [10^lo, 10^hi]; a share of
  // rows stays put.
  double log_lo = -4.0;
  double log_hi = 0.0;
  double frozen_share = 0.1;
};

inline World make_world(const WorldSpec& ws) {
  using namespace slipstream;
  World w;
  SyntheticSpec spec;
  spec.n_inputs = ws.n_inputs;
  spec.schema = DatasetSchema{2, ws.n_sparse, std::vector<std::size_t>(ws.n_sparse, ws.table_size), true};
  spec.zipf_exponents = {ws.zipf};
  spec.seed = ws.seed;
  w.data = gen_synthetic(spec);

  AccessProfile profile(spec.schema.table_sizes, ws.lambda);
  for (std::size_t i = 0; i < w.data.size(); ++i) {
    const auto s = w.data.sparse(i);
    for (std::size_t j = 0; j < s.size(); ++j) profile.record(j, s[j]);
  }
  w.flags = classify_hot(profile);

  Rng rng(derive_seed(ws.seed, "world"));
  w.before = EmbeddingBag::uniform(spec.schema.table_sizes, ws.dim, rng);
  w.after = w.before;
  w.hot = freeze_hot_table(w.after, w.flags);
  w.store.capture(w.hot, 1);
  for (std::size_t t = 0; t < ws.n_sparse; ++t) {
    for (std::size_t r = 0; r < ws.table_size; ++r) {
      if (rng.bernoulli(ws.frozen_share)) continue;
      const double scale = std::pow(10.0, rng.uniform(ws.log_lo, ws.log_hi));
      std::vector<float> g(ws.dim);
      for (float& v : g) v = static_cast<float>(rng.normal() * scale);
      update_row(w.after, &w.hot, t, r, g, 1.0);
    }
  }
  w.store.capture(w.hot, 2);
  w.partition = partition_inputs(w.data, w.hot);
  return w;
}

}  // namespace fixture
