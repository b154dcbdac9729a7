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
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "slipstream/classifier.hpp"
#include "slipstream/data.hpp"

namespace slipstream {

struct SampleSet {
  std::vector<std::uint32_t> indices;  // input ids drawn from I_hot
  double s = 1.0;
  std::uint64_t seed = 0;
  std::size_t population = 0;          // |I_hot|
};

// round(s * |I_hot|) ids (at least one) without replacement; deterministic in
// the seed. Throws DomainError on an empty I_hot, ConfigError unless 0 < s <= 1.
SampleSet sample_hot_inputs(std::span<const std::uint32_t> hot_inputs, double s,
                            std::uint64_t seed);

// Confidence level -> two-sided critical t value.
class TCriticalTable {
 public:
  TCriticalTable();  // {0.999 -> 3.340}
  void set(double confidence, double t) { table_[confidence] = t; }
  // Throws ConfigError for an unknown confidence level.
  double at(double confidence) const;
  const std::map<double, double>& entries() const { return table_; }

 private:
  std::map<double, double> table_;
};

inline constexpr double kDefaultConfidence = 0.999;

struct DropEstimate {
  double T = 0.0;
  double D = 0.0;       // sampled drop fraction
  double D_bar = 0.0;   // D * |I_hot|
  double sd = 0.0;      // population standard deviation of the indicators
  double ci_low = 0.0;  // bounds on D_bar, in inputs
  double ci_high = 0.0;
  double t_crit = 0.0;
  std::size_t m = 0;            // sample size
  std::size_t population = 0;   // |I_hot|
};

// D, sd and D_bar from a vector of 0/1 indicators; the interval is attached
// when m >= 2, otherwise it collapses onto D_bar.
DropEstimate estimate_from_indicators(std::span<const std::uint8_t> indicators,
                                      std::size_t population, double T, double t_crit);

// Evaluates every sampled input at threshold T.
DropEstimate estimate_drop_fraction(const SampleSet& sample, const Dataset& dataset,
                                    StalenessEvaluator& evaluator, double T, std::size_t alpha,
                                    double t_crit);

// Interval on D_bar: D_bar -/+ population * t * sqrt((I - m) / I * sd^2 / m).
// Throws DomainError when m < 2 or m > population.
std::pair<double, double> confidence_interval(const DropEstimate& est, std::size_t population,
                                              double t_crit);

struct SearchConfig {
  double target = 0.25;       // D*
  double T_lo = 0.0;
  double T_hi = 1.0;
  double tolerance = 0.05;    // accepted overshoot D - D*
  std::size_t max_iters = 40;
  double resolution = 0.0;    // stop once hi - lo <= resolution; 0 = (T_hi - T_lo) * 1e-9
  double confidence = kDefaultConfidence;
  bool early_stop = false;    // stop at the first candidate within tolerance

  void validate() const;
};

struct SearchTraceRow {
  std::size_t iteration = 0;
  double T = 0.0;
  double D = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::uint64_t evaluations = 0;  // cumulative
};

struct SearchResult {
  double T = 0.0;
  DropEstimate estimate;
  bool reached = false;  // D >= D* at T, within tolerance
  std::size_t iterations = 0;
  std::uint64_t evaluations = 0;
  std::vector<SearchTraceRow> trace;
};

// Bisection for the smallest tested T whose sampled D >= D*. Each candidate T
// is one iteration and is evaluated only on the sample.
SearchResult search_threshold(const SearchConfig& cfg, const SampleSet& sample,
                              const Dataset& dataset, StalenessEvaluator& evaluator,
                              std::size_t alpha, const TCriticalTable& t_table = {});

// Distance evaluations tallied over a search run.
std::uint64_t count_distance_evaluations(const SearchResult& run);

// Columns: iteration,T,D,ci_low,ci_high,evaluations
void write_search_trace(const std::filesystem::path& path, const SearchResult& run);

}  // namespace slipstream
