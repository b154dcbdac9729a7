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
#include <span>
#include <vector>

#include "slipstream/data.hpp"
#include "slipstream/embedding.hpp"
#include "slipstream/snapshot.hpp"

namespace slipstream {

enum class PredicateMode {
  kRowNorm,     // Euclidean distance of the row > T marks it varying
  kPerElement,  // stale iff at most alpha_elems elements move by >= theta
};

struct ClassifierConfig {
  double T = 0.0;
  std::size_t alpha = 1;  // stale hot rows an input must touch to be skipped
  PredicateMode predicate_mode = PredicateMode::kRowNorm;
  double theta = 0.0;
  std::size_t alpha_elems = 0;
  PairMode pair_mode = PairMode::kLastPair;

  // The threshold searched for and applied by the active predicate.
  double threshold() const { return predicate_mode == PredicateMode::kRowNorm ? T : theta; }
  void set_threshold(double value) {
    (predicate_mode == PredicateMode::kRowNorm ? T : theta) = value;
  }

  // Throws ConfigError when alpha > n_sparse or alpha_elems > dim.
  void validate(std::size_t n_sparse, std::size_t dim) const;
};

// Stale iff #{k : |delta_k| >= theta} <= alpha_elems.
bool row_stale_per_element(std::span<const float> delta, double theta, std::size_t alpha_elems);

// Row-level staleness over a snapshot store. Every call that compares a row
// across one snapshot pair counts as one distance evaluation.
class StalenessEvaluator {
 public:
  StalenessEvaluator(const SnapshotStore& store, const HotTable& hot, ClassifierConfig cfg);

  // The row is varying at `threshold` under the configured predicate.
  bool varying(std::size_t hot_slot, double threshold);

  // 1 when the input touches >= alpha stale hot rows. Throws DomainError when
  // the input accesses a cold row.
  int drop_indicator(std::span<const std::uint32_t> sparse, double threshold, std::size_t alpha);

  std::uint64_t evaluations() const { return evaluations_; }
  void reset_evaluations() { evaluations_ = 0; }

  const ClassifierConfig& config() const { return cfg_; }
  const HotTable& hot() const { return *hot_; }

  // Per-slot varying flags at `threshold` (uncounted).
  std::vector<std::uint8_t> varying_flags(double threshold) const;

  // Largest per-slot statistic the threshold is compared against: the row
  // distance (row_norm) or element magnitude (per_element).
  double max_statistic() const;

 private:
  bool varying_uncounted(std::size_t hot_slot, double threshold) const;

  const SnapshotStore* store_;
  const HotTable* hot_;
  ClassifierConfig cfg_;
  std::vector<std::size_t> pairs_;
  std::uint64_t evaluations_ = 0;
};

// Decides an input from its accessed rows and per-slot varying flags.
int input_drop_indicator(std::span<const std::uint32_t> sparse,
                         std::span<const std::uint8_t> varying_flags, const HotTable& hot,
                         std::size_t alpha);

struct Partition {
  std::vector<std::uint32_t> vary_indices;
  std::vector<std::uint32_t> stale_indices;
  double drop_percentage = 0.0;
};

// Single pass over the hot inputs: stale iff the input's stale hot-row count
// is >= cfg.alpha.
Partition classify_inputs(const Dataset& dataset, std::span<const std::uint32_t> hot_inputs,
                          std::span<const std::uint8_t> varying_flags, const HotTable& hot,
                          const ClassifierConfig& cfg);

// |stale| / |I_hot|. Throws DomainError on an empty partition.
double drop_percentage(const Partition& partition);

// One input id per line.
void write_index_list(const std::filesystem::path& path, std::span<const std::uint32_t> ids);
std::vector<std::uint32_t> read_index_list(const std::filesystem::path& path);

}  // namespace slipstream
