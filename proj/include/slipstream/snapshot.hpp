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
#include <deque>
#include <filesystem>
#include <vector>

#include "slipstream/embedding.hpp"
#include "slipstream/numeric.hpp"

namespace slipstream {

struct HotSnapshot {
  std::size_t snapshot_index = 0;  // capture ordinal, 0-based
  std::uint64_t iteration_tag = 0;
  Matrix values;                   // hot_row_count x d
};

struct DeltaRow {
  std::size_t hot_slot = 0;
  double norm = 0.0;
};

// Which consecutive snapshot pairs decide staleness.
enum class PairMode {
  kLastPair,  // the two most recent snapshots
  kAnyPair,   // varying when any consecutive pair exceeds the threshold
};

// Ring of at most `capacity` hot-table snapshots ordered by iteration tag.
class SnapshotStore {
 public:
  explicit SnapshotStore(std::size_t capacity = 2) : capacity_(capacity) {}

  // Deep-copies the hot table. Throws DomainError if the table is empty (not
  // frozen), the iteration does not increase, or dimensions change.
  void capture(const HotTable& hot, std::uint64_t iteration);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return snapshots_.size(); }
  bool empty() const { return snapshots_.empty(); }
  std::size_t captured() const { return captured_; }

  // Position n in the retained sequence, oldest first.
  const HotSnapshot& at(std::size_t n) const;
  const HotSnapshot& latest() const { return at(size() - 1); }

  std::size_t hot_row_count() const;
  std::size_t dim() const;

 private:
  std::size_t capacity_;
  std::deque<HotSnapshot> snapshots_;
  std::size_t captured_ = 0;
  std::uint64_t last_tag_ = 0;
};

// Euclidean distance between slot rows of retained snapshots n and n-1.
DeltaRow row_delta(const SnapshotStore& store, std::size_t n, std::size_t hot_slot);

// Element-wise difference (snapshot n minus snapshot n-1) of one slot.
std::vector<float> row_delta_values(const SnapshotStore& store, std::size_t n,
                                    std::size_t hot_slot);

// flag = row_delta(n, slot).norm > T
std::vector<std::uint8_t> mark_varying(const SnapshotStore& store, std::size_t n, double T);

// Per-slot distance used for staleness: the latest pair, or the maximum over
// every consecutive pair.
std::vector<double> staleness_norms(const SnapshotStore& store, PairMode mode);

// Positions n (paired with n-1) inspected by a pair mode.
std::vector<std::size_t> pair_positions(const SnapshotStore& store, PairMode mode);

// N x rows x d x sizeof(float) + mapping bytes.
std::size_t snapshot_footprint_bytes(std::size_t snapshots, std::size_t hot_rows,
                                     std::size_t dim, std::size_t mapping_bytes);
std::size_t memory_footprint(const SnapshotStore& store, const HotTable& hot);

// Capture ticks for `count` snapshots spread evenly over a warmup window of
// `warmup_iterations`, the last one at the end. Throws ConfigError when the
// window is shorter than the number of captures.
std::vector<std::uint64_t> snapshot_schedule(std::uint64_t warmup_iterations,
                                             std::size_t count);

// Flat dump: u64 snapshot index, u64 rows, u64 d, then rows*d little-endian
// float32 values, row-major.
void write_snapshot(const std::filesystem::path& path, const HotSnapshot& snapshot);
HotSnapshot read_snapshot(const std::filesystem::path& path);

}  // namespace slipstream
