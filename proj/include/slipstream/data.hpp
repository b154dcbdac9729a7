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
#include <string_view>
#include <vector>

#include "slipstream/embedding.hpp"
#include "slipstream/rng.hpp"

namespace slipstream {

struct DatasetSchema {
  std::size_t n_dense = 0;
  std::size_t n_sparse = 0;
  std::vector<std::size_t> table_sizes;
  bool has_label = true;

  // Throws ConfigError unless table_sizes has n_sparse entries, each >= 1.
  void validate() const;
  friend bool operator==(const DatasetSchema&, const DatasetSchema&) = default;
};

struct InputRecord {
  int label = 0;
  std::vector<float> dense;
  std::vector<std::uint32_t> sparse;
};

struct InputView {
  int label = 0;
  std::span<const float> dense;
  std::span<const std::uint32_t> sparse;
};

// Column-major store of training inputs.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(DatasetSchema schema);

  const DatasetSchema& schema() const { return schema_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  // Throws RangeError on a sparse index outside its table, ShapeError on
  // wrong field counts.
  void push_back(const InputRecord& record);
  void reserve(std::size_t n);

  InputView view(std::size_t i) const;
  InputRecord record(std::size_t i) const;
  int label(std::size_t i) const { return labels_[i]; }
  std::span<const std::uint32_t> sparse(std::size_t i) const {
    return {sparse_.data() + i * schema_.n_sparse, schema_.n_sparse};
  }

  // Copy of records [begin, end).
  Dataset slice(std::size_t begin, std::size_t end) const;

  // FNV-1a over the cache encoding; identifies a dataset in run summaries.
  std::uint64_t fingerprint() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  friend void write_dataset_cache(const std::filesystem::path&, const Dataset&);
  friend Dataset read_dataset_cache(const std::filesystem::path&);

  DatasetSchema schema_;
  std::vector<std::uint8_t> labels_;
  std::vector<float> dense_;
  std::vector<std::uint32_t> sparse_;
};

// Criteo sparse-feature hash: FNV-1a/64 of the raw field text, modulo the
// table size.
std::uint32_t hash_category(std::string_view field, std::size_t table_size);

// Tab-separated: [label] n_dense integers, n_sparse hex strings. Empty fields
// are missing: dense -> 0, sparse -> index 0. Dense values become
// log(1 + max(x, 0)). Throws ParseError carrying `line_number`.
InputRecord parse_criteo_line(std::string_view line, const DatasetSchema& schema,
                              std::size_t line_number = 1);

// Reads a Criteo TSV, plain or gzip-compressed. `limit` = 0 reads everything.
Dataset load_criteo(const std::filesystem::path& path, const DatasetSchema& schema,
                    std::size_t limit = 0);

// Versioned binary cache: "SLPDSET1", u32 version, u32 has_label, u64 records,
// u32 n_dense, u32 n_sparse, u64 table_sizes[n_sparse], then per record
// u8 label, f32 dense[n_dense], u32 sparse[n_sparse]. Little-endian.
void write_dataset_cache(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset_cache(const std::filesystem::path& path);

// Inverse-CDF sampler of Zipf ranks over [0, m) with P(k) ~ (k+1)^-s.
class ZipfSampler {
 public:
  ZipfSampler(std::size_t m, double exponent);
  std::size_t operator()(Rng& rng) const;
  double probability(std::size_t rank) const;
  std::size_t size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

struct SyntheticSpec {
  std::size_t n_inputs = 1'000'000;
  DatasetSchema schema{4, 8, std::vector<std::size_t>(8, 50'000), true};
  // One exponent per table; a single value applies to every table.
  std::vector<double> zipf_exponents{1.2};
  // Standard deviation of the teacher logit.
  double teacher_scale = 2.5;
  double teacher_bias = 0.0;
  double noise_rate = 0.05;
  std::uint64_t seed = 1;

  double exponent(std::size_t table) const {
    return zipf_exponents.size() == 1 ? zipf_exponents[0] : zipf_exponents.at(table);
  }
  // Throws ConfigError on out-of-range fields.
  void validate() const;
};

// Hidden logistic model that labels synthetic inputs.
struct Teacher {
  std::vector<double> dense_weights;
  std::vector<std::vector<double>> row_effects;  // [table][row]
  double bias = 0.0;
  // rank -> row, per table; rank 0 is the most popular row.
  std::vector<std::vector<std::uint32_t>> rank_to_row;

  double logit(const InputView& input) const;
};

Teacher make_teacher(const SyntheticSpec& spec);

// Zipf sparse indices, standard-normal dense values, labels drawn from the
// teacher's sigmoid and flipped with probability noise_rate.
Dataset gen_synthetic(const SyntheticSpec& spec);

struct DatasetPartition {
  std::vector<std::uint32_t> hot;
  std::vector<std::uint32_t> cold;
};

// An input is hot iff every sparse access lands on a hot row.
DatasetPartition partition_inputs(const Dataset& dataset, const HotFlags& hot_flags);
DatasetPartition partition_inputs(const Dataset& dataset, const HotTable& hot);

// Shuffled minibatch stream over a dataset. Each epoch is a fresh permutation
// derived from the seed and the epoch number; masked inputs are passed over and
// counted. The last batch of an epoch may be short.
class Minibatcher {
 public:
  Minibatcher(std::size_t n_inputs, std::size_t batch_size, std::uint64_t seed);
  Minibatcher(std::vector<std::uint32_t> indices, std::size_t batch_size, std::uint64_t seed);

  // mask[i] != 0 removes input i from every later batch. The mask is indexed
  // by input id and must cover every id in the stream.
  void set_drop_mask(std::vector<std::uint8_t> mask);
  void clear_drop_mask() { mask_.clear(); }

  // Fills `batch` with the next batch of input ids.
  void next(std::vector<std::uint32_t>& batch);
  std::vector<std::uint32_t> next();

  std::uint64_t epoch() const { return epoch_; }
  std::uint64_t skipped() const { return skipped_; }
  std::size_t batch_size() const { return batch_size_; }

 private:
  void start_epoch();
  bool masked(std::uint32_t id) const { return !mask_.empty() && mask_[id] != 0; }

  std::vector<std::uint32_t> indices_;
  std::vector<std::uint32_t> order_;
  std::vector<std::uint8_t> mask_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::uint64_t skipped_ = 0;
  bool started_ = false;
};

// All batches of one epoch in order, with the given mask.
std::vector<std::vector<std::uint32_t>> epoch_batches(std::size_t n_inputs,
                                                      std::size_t batch_size,
                                                      std::uint64_t seed,
                                                      std::uint64_t epoch,
                                                      std::span<const std::uint8_t> mask = {});

// Fisher-Yates shuffle with the portable generator.
void shuffle(std::span<std::uint32_t> values, Rng& rng);

}  // namespace slipstream
