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

#include "slipstream/threshold_search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

#include "slipstream/error.hpp"
#include "slipstream/rng.hpp"

namespace slipstream {

SampleSet sample_hot_inputs(std::span<const std::uint32_t> hot_inputs, double s,
                            std::uint64_t seed) {
  if (hot_inputs.empty()) throw DomainError("cannot sample from an empty hot input set");
  if (!(s > 0.0 && s <= 1.0)) throw ConfigError("sampling fraction s must lie in (0, 1]");
  const std::size_t n = hot_inputs.size();
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(s * static_cast<double>(n))), 1, n);

  std::vector<std::uint32_t> pool(hot_inputs.begin(), hot_inputs.end());
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return SampleSet{std::move(pool), s, seed, n};
}

TCriticalTable::TCriticalTable() { table_[kDefaultConfidence] = 3.340; }

double TCriticalTable::at(double confidence) const {
  for (const auto& [c, t] : table_) {
    if (std::abs(c - confidence) < 1e-12) return t;
  }
  throw ConfigError("no critical t value configured for confidence " +
                    std::to_string(confidence));
}

std::pair<double, double> confidence_interval(const DropEstimate& est, std::size_t population,
                                              double t_crit) {
  if (est.m < 2) throw DomainError("confidence interval needs a sample of at least 2");
  if (est.m > population) throw DomainError("sample larger than its population");
  const auto pop = static_cast<double>(population);
  const auto m = static_cast<double>(est.m);
  const double fpc = (pop - m) / pop;
  const double half = pop * t_crit * std::sqrt(fpc * est.sd * est.sd / m);
  return {est.D_bar - half, est.D_bar + half};
}

DropEstimate estimate_from_indicators(std::span<const std::uint8_t> indicators,
                                      std::size_t population, double T, double t_crit) {
  if (indicators.empty()) throw DomainError("drop estimate over an empty sample");
  DropEstimate est;
  est.T = T;
  est.m = indicators.size();
  est.population = population;
  est.t_crit = t_crit;
  double sum = 0.0;
  for (const auto v : indicators) sum += v;
  est.D = sum / static_cast<double>(est.m);
  double ss = 0.0;
  for (const auto v : indicators) ss += (v - est.D) * (v - est.D);
  est.sd = std::sqrt(ss / static_cast<double>(est.m));
  est.D_bar = est.D * static_cast<double>(population);
  if (est.m >= 2) {
    std::tie(est.ci_low, est.ci_high) = confidence_interval(est, population, t_crit);
  } else {
    est.ci_low = est.ci_high = est.D_bar;
  }
  return est;
}

DropEstimate estimate_drop_fraction(const SampleSet& sample, const Dataset& dataset,
                                    StalenessEvaluator& evaluator, double T, std::size_t alpha,
                                    double t_crit) {
  std::vector<std::uint8_t> indicators(sample.indices.size());
  for (std::size_t i = 0; i < indicators.size(); ++i) {
    indicators[i] = static_cast<std::uint8_t>(
        evaluator.drop_indicator(dataset.sparse(sample.indices[i]), T, alpha));
  }
  return estimate_from_indicators(indicators, sample.population, T, t_crit);
}

void SearchConfig::validate() const {
  if (!(T_lo < T_hi)) throw ConfigError("search range needs T_lo < T_hi");
  if (!(T_lo >= 0.0)) throw ConfigError("T_lo must be >= 0");
  if (!(tolerance > 0.0 && tolerance < 1.0)) {
    throw ConfigError("search tolerance must lie in (0, 1)");
  }
  if (!(target >= 0.0 && target <= 1.0)) throw ConfigError("target drop must lie in [0, 1]");
  if (resolution < 0.0) throw ConfigError("search resolution must be >= 0");
}

SearchResult search_threshold(const SearchConfig& cfg, const SampleSet& sample,
                              const Dataset& dataset, StalenessEvaluator& evaluator,
                              std::size_t alpha, const TCriticalTable& t_table) {
  cfg.validate();
  const double t_crit = t_table.at(cfg.confidence);
  const std::uint64_t base = evaluator.evaluations();
  SearchResult result;

  auto evaluate = [&](double T) {
    DropEstimate est = estimate_drop_fraction(sample, dataset, evaluator, T, alpha, t_crit);
    result.trace.push_back(SearchTraceRow{result.trace.size(), T, est.D, est.ci_low,
                                          est.ci_high, evaluator.evaluations() - base});
    return est;
  };
  auto finish = [&](double T, const DropEstimate& est) {
    result.T = T;
    result.estimate = est;
    result.reached = est.D >= cfg.target && est.D - cfg.target <= cfg.tolerance;
    result.iterations = result.trace.size();
    result.evaluations = evaluator.evaluations() - base;
    return result;
  };

  const DropEstimate at_lo = evaluate(cfg.T_lo);
  if (at_lo.D >= cfg.target) return finish(cfg.T_lo, at_lo);
  const DropEstimate at_hi = evaluate(cfg.T_hi);
  if (at_hi.D < cfg.target) return finish(cfg.T_hi, at_hi);

  const double resolution =
      cfg.resolution > 0.0 ? cfg.resolution : (cfg.T_hi - cfg.T_lo) * 1e-9;
  double lo = cfg.T_lo;
  double hi = cfg.T_hi;
  DropEstimate best = at_hi;
  for (std::size_t step = 0; step < cfg.max_iters && hi - lo > resolution; ++step) {
    const double mid = lo + (hi - lo) / 2.0;
    const DropEstimate est = evaluate(mid);
    if (est.D >= cfg.target) {
      hi = mid;
      best = est;
      if (cfg.early_stop && est.D - cfg.target <= cfg.tolerance) break;
    } else {
      lo = mid;
    }
  }
  return finish(hi, best);
}

std::uint64_t count_distance_evaluations(const SearchResult& run) { return run.evaluations; }

void write_search_trace(const std::filesystem::path& path, const SearchResult& run) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "iteration,T,D,ci_low,ci_high,evaluations\n" << std::setprecision(17);
  for (const auto& row : run.trace) {
    out << row.iteration << ',' << row.T << ',' << row.D << ',' << row.ci_low << ','
        << row.ci_high << ',' << row.evaluations << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace slipstream
