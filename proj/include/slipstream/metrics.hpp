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

#include <optional>
#include <span>

namespace slipstream {

struct EvalResult {
  double accuracy = 0.0;
  std::optional<double> auc;  // absent for single-class label sets
  double bce = 0.0;
};

// Fraction of predictions on the right side of 0.5 (p >= 0.5 predicts 1).
double accuracy(std::span<const float> scores, std::span<const int> labels);

// Mann-Whitney rank statistic with midranks for ties.
std::optional<double> auc(std::span<const float> scores, std::span<const int> labels);

double mean_bce(std::span<const float> scores, std::span<const int> labels);

EvalResult score_predictions(std::span<const float> scores, std::span<const int> labels);

}  // namespace slipstream
