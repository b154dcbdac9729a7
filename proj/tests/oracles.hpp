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

// Brute-force reference implementations used by the tests. Each one recomputes
// a library result from first principles with plain loops in double precision
// and shares no code with the library beyond its data types.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "slipstream/data.hpp"
#include "slipstream/model.hpp"
#include "slipstream/numeric.hpp"

namespace oracle {

using Vec = std::vector<double>;

// ---- dense math -----------------------------------------------------------

struct Mlp {
  std::vector<std::vector<Vec>> w;  // [layer][out][in]
  std::vector<Vec> b;
  bool sigmoid_last = false;
};

inline Mlp to_double(const slipstream::MlpSpec& spec, const slipstream::MlpParams& p) {
  Mlp m;
  m.sigmoid_last = spec.activation == slipstream::Activation::kSigmoidOnLast;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const auto& W = p.weights[l];
    std::vector<Vec> rows(W.rows(), Vec(W.cols()));
    for (std::size_t r = 0; r < W.rows(); ++r) {
      for (std::size_t c = 0; c < W.cols(); ++c) rows[r][c] = W(r, c);
    }
    m.w.push_back(rows);
    m.b.emplace_back(p.biases[l].begin(), p.biases[l].end());
  }
  return m;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Returns the output; `pre` receives every pre-activation when given.
inline Vec mlp_forward(const Mlp& m, Vec x, std::vector<Vec>* pre = nullptr) {
  if (pre) pre->clear();
  for (std::size_t l = 0; l < m.w.size(); ++l) {
    Vec z(m.w[l].size());
    for (std::size_t r = 0; r < z.size(); ++r) {
      double acc = m.b[l][r];
      for (std::size_t c = 0; c < x.size(); ++c) acc += m.w[l][r][c] * x[c];
      z[r] = acc;
    }
    if (pre) pre->push_back(z);
    const bool last = l + 1 == m.w.size();
    for (double& v : z) v = (last && m.sigmoid_last) ? sigmoid(v) : std::max(v, 0.0);
    x = std::move(z);
  }
  return x;
}

inline Vec layer_norm(const Vec& x, double eps) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  Vec out(x.size());
  if (var == 0.0) return out;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / std::sqrt(var + eps);
  return out;
}

inline double bce(double p, int y) {
  p = std::clamp(p, 1e-7, 1.0 - 1e-7);
  return y ? -std::log(p) : -std::log(1.0 - p);
}

// Click probability of the toy model, recomputed with scalar loops.
inline double dlrm_forward(const slipstream::DlrmModel& model, const slipstream::InputView& in) {
  const auto& spec = model.spec();
  const Mlp bottom = to_double(spec.bottom_spec(), model.bottom());
  const Mlp top = to_double(spec.top_spec(), model.top());
  std::vector<Vec> vecs;
  vecs.push_back(mlp_forward(bottom, Vec(in.dense.begin(), in.dense.end())));
  for (std::size_t j = 0; j < in.sparse.size(); ++j) {
    const auto row = model.bag().row(j, in.sparse[j]);
    vecs.emplace_back(row.begin(), row.end());
  }
  if (spec.layer_norm) {
    // The library normalizes float vectors; mirror that rounding step.
    for (auto& v : vecs) {
      Vec f(v.begin(), v.end());
      for (double& e : f) e = static_cast<float>(e);
      v = layer_norm(f, spec.layer_norm_eps);
    }
  }
  Vec z = vecs[0];
  for (std::size_t a = 0; a < vecs.size(); ++a) {
    for (std::size_t b = a + 1; b < vecs.size(); ++b) {
      double dot = 0.0;
      for (std::size_t c = 0; c < vecs[a].size(); ++c) dot += vecs[a][c] * vecs[b][c];
      z.push_back(dot);
    }
  }
  return mlp_forward(top, z)[0];
}

// ---- statistics -----------------------------------------------------------

// AUC by counting every (positive, negative) pair; ties count one half.
inline double auc_pairs(const std::vector<float>& s, const std::vector<int>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

inline double mean(const std::vector<std::uint8_t>& v) {
  double s = 0.0;
  for (auto x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Population standard deviation (divisor n).
inline double pop_sd(const std::vector<std::uint8_t>& v) {
  const double m = mean(v);
  double acc = 0.0;
  for (auto x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

// Interval on the dropped-input count: centre D*I, half-width
// I * t * sqrt((I - m)/I * sd^2 / m).
inline std::pair<double, double> ci(double D, double sd, std::size_t m, std::size_t I, double t) {
  const double Id = static_cast<double>(I);
  const double half = Id * t * std::sqrt((Id - m) / Id * sd * sd / m);
  return {D * Id - half, D * Id + half};
}

// ---- hotness, partitions, staleness ---------------------------------------

using RowKey = std::pair<std::size_t, std::uint32_t>;  // (table, row)

// Replays the access log of a dataset.
inline std::map<RowKey, std::uint64_t> access_counts(const slipstream::Dataset& d) {
  std::map<RowKey, std::uint64_t> counts;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto s = d.sparse(i);
    for (std::size_t j = 0; j < s.size(); ++j) ++counts[{j, s[j]}];
  }
  return counts;
}

inline std::map<RowKey, bool> hot_rows(const slipstream::Dataset& d, double lambda) {
  const auto counts = access_counts(d);
  std::uint64_t total = 0;
  for (const auto& [k, c] : counts) total += c;
  std::map<RowKey, bool> hot;
  for (const auto& [k, c] : counts) {
    hot[k] = c > 0 && static_cast<double>(c) / static_cast<double>(total) >= lambda;
  }
  return hot;
}

inline bool is_hot(const std::map<RowKey, bool>& hot, std::size_t t, std::uint32_t r) {
  const auto it = hot.find({t, r});
  return it != hot.end() && it->second;
}

// Input ids whose every access is hot, and the rest.
inline std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> split_inputs(
    const slipstream::Dataset& d, const std::map<RowKey, bool>& hot) {
  std::vector<std::uint32_t> h, c;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto s = d.sparse(i);
    bool all = true;
    for (std::size_t j = 0; j < s.size(); ++j) all = all && is_hot(hot, j, s[j]);
    (all ? h : c).push_back(static_cast<std::uint32_t>(i));
  }
  return {h, c};
}

// Row (t, r) moved by more than T between two embedding bags.
inline bool row_varying(const slipstream::EmbeddingBag& before, const slipstream::EmbeddingBag& after,
                        std::size_t t, std::uint32_t r, double T) {
  const auto a = before.row(t, r);
  const auto b = after.row(t, r);
  double acc = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double d = static_cast<double>(b[c]) - static_cast<double>(a[c]);
    acc += d * d;
  }
  return std::sqrt(acc) > T;
}

// Stale inputs among `inputs`: at least alpha of their rows did not move by
// more than T.
inline std::vector<std::uint32_t> stale_inputs(const slipstream::Dataset& d,
                                               const std::vector<std::uint32_t>& inputs,
                                               const slipstream::EmbeddingBag& before,
                                               const slipstream::EmbeddingBag& after, double T,
                                               std::size_t alpha) {
  std::vector<std::uint32_t> out;
  for (const auto i : inputs) {
    const auto s = d.sparse(i);
    std::size_t stale = 0;
    for (std::size_t j = 0; j < s.size(); ++j) stale += !row_varying(before, after, j, s[j], T);
    if (stale >= alpha) out.push_back(i);
  }
  return out;
}

}  // namespace oracle
