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
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "slipstream/numeric.hpp"
#include "slipstream/rng.hpp"

namespace slipstream {

struct EmbeddingTable {
  std::size_t table_id = 0;
  Matrix values;  // rows x dim

  std::size_t rows() const { return values.rows(); }
  std::size_t dim() const { return values.cols(); }
};

// Per-row access counters over every table plus the hotness ratio lambda.
class AccessProfile {
 public:
  AccessProfile() = default;
  AccessProfile(std::span<const std::size_t> table_sizes, double lambda);

  void record(std::size_t table, std::size_t row);

  std::uint64_t count(std::size_t table, std::size_t row) const { return counts_[table][row]; }
  std::uint64_t total() const { return total_; }
  double lambda() const { return lambda_; }
  void set_lambda(double lambda) { lambda_ = lambda; }

  std::size_t table_count() const { return counts_.size(); }
  std::span<const std::uint64_t> table_counts(std::size_t table) const {
    return counts_[table];
  }

 private:
  std::vector<std::vector<std::uint64_t>> counts_;
  std::uint64_t total_ = 0;
  double lambda_ = 0.0;
};

// flags[table][row] != 0 marks a hot row.
using HotFlags = std::vector<std::vector<std::uint8_t>>;

std::size_t hot_row_count(const HotFlags& flags);

// The bag of per-feature tables. All tables share one embedding dimension.
class EmbeddingBag {
 public:
  EmbeddingBag() = default;
  EmbeddingBag(std::span<const std::size_t> table_sizes, std::size_t dim);

  // Uniform in [-1/sqrt(d), 1/sqrt(d)].
  static EmbeddingBag uniform(std::span<const std::size_t> table_sizes, std::size_t dim,
                              Rng& rng);

  std::size_t table_count() const { return tables_.size(); }
  std::size_t dim() const { return dim_; }
  std::vector<std::size_t> table_sizes() const;
  const EmbeddingTable& table(std::size_t t) const { return tables_.at(t); }
  EmbeddingTable& table(std::size_t t) { return tables_.at(t); }

  // Copy of a row; counts the access while profiling. Throws RangeError.
  std::vector<float> lookup(std::size_t table, std::size_t row);

  // Uncounted views.
  std::span<const float> row(std::size_t table, std::size_t row) const;
  std::span<float> mutable_row(std::size_t table, std::size_t row);

  void start_profiling(double lambda);
  bool profiling() const { return profile_.has_value(); }
  const AccessProfile& profile() const;
  AccessProfile stop_profiling();

  friend bool operator==(const EmbeddingBag& a, const EmbeddingBag& b);

 private:
  void check(std::size_t table, std::size_t row) const;

  std::vector<EmbeddingTable> tables_;
  std::size_t dim_ = 0;
  std::optional<AccessProfile> profile_;
};

// flag = (M_i > 0) && (M_i / M >= lambda). Throws DomainError when M == 0.
HotFlags classify_hot(const AccessProfile& profile);
HotFlags classify_hot(const AccessProfile& profile, double lambda);

// Compact copy of the hot rows with a two-way (table, row) <-> slot mapping.
class HotTable {
 public:
  static constexpr std::int32_t kCold = -1;

  std::size_t hot_row_count() const { return origins_.size(); }
  std::size_t dim() const { return values_.cols(); }
  std::size_t table_count() const { return slot_of_.size(); }

  std::int32_t slot(std::size_t table, std::size_t row) const;
  bool is_hot(std::size_t table, std::size_t row) const { return slot(table, row) != kCold; }
  std::pair<std::size_t, std::size_t> origin(std::size_t slot) const { return origins_.at(slot); }

  const Matrix& values() const { return values_; }
  std::span<const float> slot_row(std::size_t slot) const { return values_.row(slot); }

  // Bytes used by the mapping structures.
  std::size_t mapping_bytes() const;
  // Same accounting for a table not yet built.
  static std::size_t mapping_bytes_for(std::size_t hot_rows, std::size_t total_rows) {
    return hot_rows * sizeof(std::pair<std::size_t, std::size_t>) +
           total_rows * sizeof(std::int32_t);
  }

 private:
  friend HotTable freeze_hot_table(const EmbeddingBag&, const HotFlags&);
  friend void update_row(EmbeddingBag&, HotTable*, std::size_t, std::size_t,
                         std::span<const float>, double);

  std::vector<std::vector<std::int32_t>> slot_of_;
  std::vector<std::pair<std::size_t, std::size_t>> origins_;
  Matrix values_;
};

// Throws ConfigError when no row is flagged.
HotTable freeze_hot_table(const EmbeddingBag& bag, const HotFlags& flags);

// row <- row - lr * grad, mirrored bit-for-bit into the hot slot when hot.
void update_row(EmbeddingBag& bag, HotTable* hot, std::size_t table, std::size_t row,
                std::span<const float> grad, double lr);

}  // namespace slipstream
