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

#include "slipstream/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "slipstream/error.hpp"

namespace slipstream {

void ClassifierConfig::validate(std::size_t n_sparse, std::size_t dim) const {
  if (alpha > n_sparse) {
    throw ConfigError("alpha = " + std::to_string(alpha) + " exceeds the " +
                      std::to_string(n_sparse) + " sparse features");
  }
  if (predicate_mode == PredicateMode::kPerElement && alpha_elems > dim) {
    throw ConfigError("alpha_elems = " + std::to_string(alpha_elems) +
                      " exceeds the embedding dimension " + std::to_string(dim));
  }
  if (!(T >= 0.0)) throw ConfigError("T must be >= 0");
  if (!(theta >= 0.0)) throw ConfigError("theta must be >= 0");
}

bool row_stale_per_element(std::span<const float> delta, double theta, std::size_t alpha_elems) {
  std::size_t changed = 0;
  for (const float v : delta) changed += std::abs(static_cast<double>(v)) >= theta;
  return changed <= alpha_elems;
}

StalenessEvaluator::StalenessEvaluator(const SnapshotStore& store, const HotTable& hot,
                                       ClassifierConfig cfg)
    : store_(&store), hot_(&hot), cfg_(cfg), pairs_(pair_positions(store, cfg.pair_mode)) {
  if (store.hot_row_count() != hot.hot_row_count()) {
    throw ShapeError("snapshots and hot table disagree on the hot row count");
  }
}

bool StalenessEvaluator::varying_uncounted(std::size_t slot, double threshold) const {
  for (const std::size_t n : pairs_) {
    const auto cur = store_->at(n).values.row(slot);
    const auto prev = store_->at(n - 1).values.row(slot);
    if (cfg_.predicate_mode == PredicateMode::kRowNorm) {
      double acc = 0.0;
      for (std::size_t k = 0; k < cur.size(); ++k) {
        const double d = static_cast<double>(cur[k]) - prev[k];
        acc += d * d;
      }
      if (std::sqrt(acc) > threshold) return true;
    } else {
      std::size_t changed = 0;
      for (std::size_t k = 0; k < cur.size(); ++k) {
        changed += std::abs(static_cast<double>(cur[k]) - prev[k]) >= threshold;
      }
      if (changed > cfg_.alpha_elems) return true;
    }
  }
  return false;
}

bool StalenessEvaluator::varying(std::size_t slot, double threshold) {
  evaluations_ += pairs_.size();
  return varying_uncounted(slot, threshold);
}

int StalenessEvaluator::drop_indicator(std::span<const std::uint32_t> sparse, double threshold,
                                       std::size_t alpha) {
  std::size_t stale = 0;
  for (std::size_t j = 0; j < sparse.size(); ++j) {
    const std::int32_t slot = hot_->slot(j, sparse[j]);
    if (slot == HotTable::kCold) {
      throw DomainError("input accesses cold row " + std::to_string(sparse[j]) + " of table " +
                        std::to_string(j) + "; only hot inputs can be classified");
    }
    stale += !varying(static_cast<std::size_t>(slot), threshold);
  }
  return stale >= alpha ? 1 : 0;
}

std::vector<std::uint8_t> StalenessEvaluator::varying_flags(double threshold) const {
  std::vector<std::uint8_t> flags(hot_->hot_row_count());
  for (std::size_t s = 0; s < flags.size(); ++s) flags[s] = varying_uncounted(s, threshold);
  return flags;
}

double StalenessEvaluator::max_statistic() const {
  if (cfg_.predicate_mode == PredicateMode::kRowNorm) {
    const auto norms = staleness_norms(*store_, cfg_.pair_mode);
    return norms.empty() ? 0.0 : *std::max_element(norms.begin(), norms.end());
  }
  double best = 0.0;
  for (const std::size_t n : pairs_) {
    const auto& cur = store_->at(n).values.values();
    const auto& prev = store_->at(n - 1).values.values();
    for (std::size_t i = 0; i < cur.size(); ++i) {
      best = std::max(best, std::abs(static_cast<double>(cur[i]) - prev[i]));
    }
  }
  return best;
}

int input_drop_indicator(std::span<const std::uint32_t> sparse,
                         std::span<const std::uint8_t> varying_flags, const HotTable& hot,
                         std::size_t alpha) {
  if (varying_flags.size() != hot.hot_row_count()) {
    throw ShapeError("varying flags do not cover the hot table");
  }
  std::size_t stale = 0;
  for (std::size_t j = 0; j < sparse.size(); ++j) {
    const std::int32_t slot = hot.slot(j, sparse[j]);
    if (slot == HotTable::kCold) {
      throw DomainError("input accesses cold row " + std::to_string(sparse[j]) + " of table " +
                        std::to_string(j) + "; only hot inputs can be classified");
    }
    stale += varying_flags[static_cast<std::size_t>(slot)] == 0;
  }
  return stale >= alpha ? 1 : 0;
}

Partition classify_inputs(const Dataset& dataset, std::span<const std::uint32_t> hot_inputs,
                          std::span<const std::uint8_t> varying_flags, const HotTable& hot,
                          const ClassifierConfig& cfg) {
  cfg.validate(dataset.schema().n_sparse, hot.dim());
  Partition part;
  for (const std::uint32_t id : hot_inputs) {
    const int drop = input_drop_indicator(dataset.sparse(id), varying_flags, hot, cfg.alpha);
    (drop != 0 ? part.stale_indices : part.vary_indices).push_back(id);
  }
  part.drop_percentage =
      hot_inputs.empty() ? 0.0
                         : static_cast<double>(part.stale_indices.size()) /
                               static_cast<double>(hot_inputs.size());
  return part;
}

double drop_percentage(const Partition& partition) {
  const std::size_t total = partition.vary_indices.size() + partition.stale_indices.size();
  if (total == 0) throw DomainError("drop_percentage of an empty hot input set");
  return static_cast<double>(partition.stale_indices.size()) / static_cast<double>(total);
}

void write_index_list(const std::filesystem::path& path, std::span<const std::uint32_t> ids) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const std::uint32_t id : ids) out << id << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::uint32_t> read_index_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint32_t> ids;
  std::uint64_t id = 0;
  while (in >> id) ids.push_back(static_cast<std::uint32_t>(id));
  if (!in.eof()) throw IoError("malformed index list " + path.string());
  return ids;
}

}  // namespace slipstream
