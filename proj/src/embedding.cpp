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

#include "slipstream/embedding.hpp"

#include <cmath>
#include <string>

#include "slipstream/error.hpp"

namespace slipstream {

AccessProfile::AccessProfile(std::span<const std::size_t> table_sizes, double lambda)
    : lambda_(lambda) {
  counts_.reserve(table_sizes.size());
  for (const std::size_t m : table_sizes) counts_.emplace_back(m, 0);
}

void AccessProfile::record(std::size_t table, std::size_t row) {
  if (table >= counts_.size() || row >= counts_[table].size()) {
    throw RangeError("access profile: (" + std::to_string(table) + ", " +
                     std::to_string(row) + ") out of range");
  }
  ++counts_[table][row];
  ++total_;
}

std::size_t hot_row_count(const HotFlags& flags) {
  std::size_t n = 0;
  for (const auto& t : flags) {
    for (const auto f : t) n += f != 0;
  }
  return n;
}

EmbeddingBag::EmbeddingBag(std::span<const std::size_t> table_sizes, std::size_t dim)
    : dim_(dim) {
  if (dim == 0) throw ConfigError("embedding dimension must be >= 1");
  for (std::size_t t = 0; t < table_sizes.size(); ++t) {
    if (table_sizes[t] == 0) {
      throw ConfigError("embedding table " + std::to_string(t) + " has no rows");
    }
    tables_.push_back(EmbeddingTable{t, Matrix(table_sizes[t], dim)});
  }
}

EmbeddingBag EmbeddingBag::uniform(std::span<const std::size_t> table_sizes,
                                   std::size_t dim, Rng& rng) {
  EmbeddingBag bag(table_sizes, dim);
  const double limit = 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto& table : bag.tables_) {
    for (float& v : table.values.values()) v = static_cast<float>(rng.uniform(-limit, limit));
  }
  return bag;
}

std::vector<std::size_t> EmbeddingBag::table_sizes() const {
  std::vector<std::size_t> sizes;
  for (const auto& t : tables_) sizes.push_back(t.rows());
  return sizes;
}

void EmbeddingBag::check(std::size_t table, std::size_t row) const {
  if (table >= tables_.size()) {
    throw RangeError("embedding table " + std::to_string(table) + " does not exist");
  }
  if (row >= tables_[table].rows()) {
    throw RangeError("row " + std::to_string(row) + " out of range for table " +
                     std::to_string(table) + " with " +
                     std::to_string(tables_[table].rows()) + " rows");
  }
}

std::vector<float> EmbeddingBag::lookup(std::size_t table, std::size_t row) {
  check(table, row);
  if (profile_) profile_->record(table, row);
  const auto r = tables_[table].values.row(row);
  return {r.begin(), r.end()};
}

std::span<const float> EmbeddingBag::row(std::size_t table, std::size_t row) const {
  check(table, row);
  return tables_[table].values.row(row);
}

std::span<float> EmbeddingBag::mutable_row(std::size_t table, std::size_t row) {
  check(table, row);
  return tables_[table].values.row(row);
}

void EmbeddingBag::start_profiling(double lambda) {
  const auto sizes = table_sizes();
  profile_.emplace(sizes, lambda);
}

const AccessProfile& EmbeddingBag::profile() const {
  if (!profile_) throw DomainError("embedding bag is not profiling");
  return *profile_;
}

AccessProfile EmbeddingBag::stop_profiling() {
  if (!profile_) throw DomainError("embedding bag is not profiling");
  AccessProfile p = std::move(*profile_);
  profile_.reset();
  return p;
}

bool operator==(const EmbeddingBag& a, const EmbeddingBag& b) {
  if (a.dim_ != b.dim_ || a.tables_.size() != b.tables_.size()) return false;
  for (std::size_t t = 0; t < a.tables_.size(); ++t) {
    if (!(a.tables_[t].values == b.tables_[t].values)) return false;
  }
  return true;
}

HotFlags classify_hot(const AccessProfile& profile, double lambda) {
  if (profile.total() == 0) throw DomainError("classify_hot: empty access profile");
  const auto total = static_cast<double>(profile.total());
  HotFlags flags(profile.table_count());
  for (std::size_t t = 0; t < profile.table_count(); ++t) {
    const auto counts = profile.table_counts(t);
    flags[t].resize(counts.size());
    for (std::size_t r = 0; r < counts.size(); ++r) {
      flags[t][r] = counts[r] > 0 && static_cast<double>(counts[r]) / total >= lambda;
    }
  }
  return flags;
}

HotFlags classify_hot(const AccessProfile& profile) {
  return classify_hot(profile, profile.lambda());
}

std::int32_t HotTable::slot(std::size_t table, std::size_t row) const {
  if (table >= slot_of_.size() || row >= slot_of_[table].size()) {
    throw RangeError("hot table: (" + std::to_string(table) + ", " + std::to_string(row) +
                     ") out of range");
  }
  return slot_of_[table][row];
}

std::size_t HotTable::mapping_bytes() const {
  std::size_t bytes = origins_.size() * sizeof(origins_[0]);
  for (const auto& t : slot_of_) bytes += t.size() * sizeof(std::int32_t);
  return bytes;
}

HotTable freeze_hot_table(const EmbeddingBag& bag, const HotFlags& flags) {
  if (flags.size() != bag.table_count()) {
    throw ShapeError("freeze_hot_table: flags cover " + std::to_string(flags.size()) +
                     " tables, bag has " + std::to_string(bag.table_count()));
  }
  HotTable hot;
  hot.slot_of_.resize(flags.size());
  for (std::size_t t = 0; t < flags.size(); ++t) {
    if (flags[t].size() != bag.table(t).rows()) {
      throw ShapeError("freeze_hot_table: flag count mismatch for table " + std::to_string(t));
    }
    hot.slot_of_[t].assign(flags[t].size(), HotTable::kCold);
    for (std::size_t r = 0; r < flags[t].size(); ++r) {
      if (flags[t][r] != 0) {
        hot.slot_of_[t][r] = static_cast<std::int32_t>(hot.origins_.size());
        hot.origins_.emplace_back(t, r);
      }
    }
  }
  if (hot.origins_.empty()) {
    throw ConfigError("no embedding rows are hot at this lambda; lower lambda");
  }
  hot.values_ = Matrix(hot.origins_.size(), bag.dim());
  for (std::size_t s = 0; s < hot.origins_.size(); ++s) {
    const auto [t, r] = hot.origins_[s];
    const auto src = bag.row(t, r);
    std::copy(src.begin(), src.end(), hot.values_.row(s).begin());
  }
  return hot;
}

void update_row(EmbeddingBag& bag, HotTable* hot, std::size_t table, std::size_t row,
                std::span<const float> grad, double lr) {
  auto dst = bag.mutable_row(table, row);
  if (grad.size() != dst.size()) {
    throw ShapeError("update_row: gradient has " + std::to_string(grad.size()) +
                     " values, row has " + std::to_string(dst.size()));
  }
  for (std::size_t k = 0; k < dst.size(); ++k) {
    dst[k] = static_cast<float>(dst[k] - lr * grad[k]);
  }
  if (hot != nullptr && table < hot->slot_of_.size()) {
    const std::int32_t s = hot->slot(table, row);
    if (s != HotTable::kCold) {
      auto mirror = hot->values_.row(static_cast<std::size_t>(s));
      std::copy(dst.begin(), dst.end(), mirror.begin());
    }
  }
}

}  // namespace slipstream
