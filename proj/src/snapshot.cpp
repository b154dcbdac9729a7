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

#include "slipstream/snapshot.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <string>

#include "slipstream/error.hpp"

namespace slipstream {

static_assert(std::endian::native == std::endian::little,
              "binary dump formats assume a little-endian host");

void SnapshotStore::capture(const HotTable& hot, std::uint64_t iteration) {
  if (hot.hot_row_count() == 0) {
    throw DomainError("snapshot capture before the hot table was frozen");
  }
  if (captured_ > 0 && iteration <= last_tag_) {
    throw DomainError("snapshot iteration " + std::to_string(iteration) +
                      " does not follow " + std::to_string(last_tag_));
  }
  if (!snapshots_.empty() && (snapshots_.back().values.rows() != hot.hot_row_count() ||
                              snapshots_.back().values.cols() != hot.dim())) {
    throw DomainError("snapshot dimensions changed between captures");
  }
  last_tag_ = iteration;
  const std::size_t index = captured_++;
  if (capacity_ == 0) return;
  snapshots_.push_back(HotSnapshot{index, iteration, hot.values()});
  while (snapshots_.size() > capacity_) snapshots_.pop_front();
}

const HotSnapshot& SnapshotStore::at(std::size_t n) const {
  if (n >= snapshots_.size()) {
    throw DomainError("snapshot " + std::to_string(n) + " not retained (" +
                      std::to_string(snapshots_.size()) + " present)");
  }
  return snapshots_[n];
}

std::size_t SnapshotStore::hot_row_count() const {
  return snapshots_.empty() ? 0 : snapshots_.front().values.rows();
}

std::size_t SnapshotStore::dim() const {
  return snapshots_.empty() ? 0 : snapshots_.front().values.cols();
}

namespace {

void check_pair(const SnapshotStore& store, std::size_t n) {
  if (n == 0 || n >= store.size()) {
    throw DomainError("snapshot pair (" + std::to_string(n) + ", " +
                      std::to_string(n == 0 ? 0 : n - 1) + ") not available; " +
                      std::to_string(store.size()) + " snapshots retained");
  }
}

double slot_distance(const Matrix& a, const Matrix& b, std::size_t slot) {
  const auto ra = a.row(slot);
  const auto rb = b.row(slot);
  double acc = 0.0;
  for (std::size_t k = 0; k < ra.size(); ++k) {
    const double diff = static_cast<double>(ra[k]) - rb[k];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

}  // namespace

DeltaRow row_delta(const SnapshotStore& store, std::size_t n, std::size_t hot_slot) {
  check_pair(store, n);
  if (hot_slot >= store.hot_row_count()) {
    throw RangeError("hot slot " + std::to_string(hot_slot) + " out of range");
  }
  return DeltaRow{hot_slot, slot_distance(store.at(n).values, store.at(n - 1).values, hot_slot)};
}

std::vector<float> row_delta_values(const SnapshotStore& store, std::size_t n,
                                    std::size_t hot_slot) {
  check_pair(store, n);
  if (hot_slot >= store.hot_row_count()) {
    throw RangeError("hot slot " + std::to_string(hot_slot) + " out of range");
  }
  const auto cur = store.at(n).values.row(hot_slot);
  const auto prev = store.at(n - 1).values.row(hot_slot);
  std::vector<float> delta(cur.size());
  for (std::size_t k = 0; k < cur.size(); ++k) delta[k] = cur[k] - prev[k];
  return delta;
}

std::vector<std::uint8_t> mark_varying(const SnapshotStore& store, std::size_t n, double T) {
  check_pair(store, n);
  if (T < 0.0) throw ConfigError("staleness threshold T must be >= 0");
  const Matrix& cur = store.at(n).values;
  const Matrix& prev = store.at(n - 1).values;
  std::vector<std::uint8_t> flags(cur.rows());
  for (std::size_t s = 0; s < cur.rows(); ++s) flags[s] = slot_distance(cur, prev, s) > T;
  return flags;
}

std::vector<std::size_t> pair_positions(const SnapshotStore& store, PairMode mode) {
  if (store.size() < 2) {
    throw DomainError("staleness needs two snapshots, " + std::to_string(store.size()) +
                      " retained");
  }
  if (mode == PairMode::kLastPair) return {store.size() - 1};
  std::vector<std::size_t> positions;
  for (std::size_t n = 1; n < store.size(); ++n) positions.push_back(n);
  return positions;
}

std::vector<double> staleness_norms(const SnapshotStore& store, PairMode mode) {
  const auto positions = pair_positions(store, mode);
  std::vector<double> norms(store.hot_row_count(), 0.0);
  for (const std::size_t n : positions) {
    const Matrix& cur = store.at(n).values;
    const Matrix& prev = store.at(n - 1).values;
    for (std::size_t s = 0; s < norms.size(); ++s) {
      norms[s] = std::max(norms[s], slot_distance(cur, prev, s));
    }
  }
  return norms;
}

std::size_t snapshot_footprint_bytes(std::size_t snapshots, std::size_t hot_rows,
                                     std::size_t dim, std::size_t mapping_bytes) {
  return snapshots * hot_rows * dim * sizeof(float) + mapping_bytes;
}

std::size_t memory_footprint(const SnapshotStore& store, const HotTable& hot) {
  return snapshot_footprint_bytes(store.capacity(), hot.hot_row_count(), hot.dim(),
                                  hot.mapping_bytes());
}

std::vector<std::uint64_t> snapshot_schedule(std::uint64_t warmup_iterations,
                                             std::size_t count) {
  if (count == 0) return {};
  if (warmup_iterations < count) {
    throw ConfigError("warmup window of " + std::to_string(warmup_iterations) +
                      " iterations is shorter than the " + std::to_string(count) +
                      " snapshot captures");
  }
  std::vector<std::uint64_t> ticks;
  for (std::size_t n = 1; n <= count; ++n) {
    ticks.push_back(warmup_iterations * n / count);
  }
  return ticks;
}

void write_snapshot(const std::filesystem::path& path, const HotSnapshot& snapshot) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::uint64_t header[3] = {snapshot.snapshot_index, snapshot.values.rows(),
                                   snapshot.values.cols()};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(snapshot.values.values().data()),
            static_cast<std::streamsize>(snapshot.values.values().size() * sizeof(float)));
  if (!out) throw IoError("failed writing " + path.string());
}

HotSnapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint64_t header[3];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in) throw IoError("truncated snapshot header in " + path.string());
  std::vector<float> values(header[1] * header[2]);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!in) throw IoError("truncated snapshot body in " + path.string());
  HotSnapshot snap;
  snap.snapshot_index = header[0];
  snap.values = Matrix(header[1], header[2], std::move(values));
  return snap;
}

}  // namespace slipstream
