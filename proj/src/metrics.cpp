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

#include "slipstream/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "slipstream/error.hpp"
#include "slipstream/numeric.hpp"

namespace slipstream {
namespace {

void check(std::span<const float> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  if (scores.empty()) throw DomainError("metrics over an empty prediction set");
}

}  // namespace

double accuracy(std::span<const float> scores, std::span<const int> labels) {
  check(scores, labels);
  std::size_t right = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    right += (scores[i] >= 0.5f ? 1 : 0) == (labels[i] != 0 ? 1 : 0);
  }
  return static_cast<double>(right) / static_cast<double>(scores.size());
}

std::optional<double> auc(std::span<const float> scores, std::span<const int> labels) {
  check(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // ranks i+1 .. j share the midrank
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) {
        positive_rank_sum += midrank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const auto pos = static_cast<double>(positives);
  const double u = positive_rank_sum - pos * (pos + 1.0) / 2.0;
  return u / (pos * static_cast<double>(negatives));
}

double mean_bce(std::span<const float> scores, std::span<const int> labels) {
  check(scores, labels);
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) sum += bce_loss(scores[i], labels[i]);
  return sum / static_cast<double>(scores.size());
}

EvalResult score_predictions(std::span<const float> scores, std::span<const int> labels) {
  return EvalResult{accuracy(scores, labels), auc(scores, labels), mean_bce(scores, labels)};
}

}  // namespace slipstream
