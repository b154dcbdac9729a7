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
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "slipstream/config.hpp"
#include "slipstream/data.hpp"
#include "slipstream/trainer.hpp"

namespace slipstream {

// Share of table `table`'s accesses that land on its most frequently accessed
// ceil(fraction * rows) rows.
double top_mass(const Dataset& data, std::size_t table, double fraction);

struct GenerateResult {
  std::filesystem::path dataset_path;
  std::filesystem::path manifest_path;
  nlohmann::ordered_json manifest;
};

// Writes <out>/dataset.bin and <out>/manifest.json. Requires a synthetic
// dataset source.
GenerateResult cmd_generate(const RunConfig& config);

struct TableProfile {
  std::size_t table = 0;
  std::size_t rows = 0;
  std::size_t accessed_rows = 0;
  std::uint64_t max_count = 0;
  double top1_mass = 0.0;
  std::size_t hot_rows = 0;
  // histogram[0] counts untouched rows; histogram[b] rows with
  // 2^(b-1) <= count < 2^b.
  std::vector<std::size_t> histogram;
};

struct LambdaSweepRow {
  double lambda = 0.0;
  std::size_t hot_rows = 0;
  std::size_t hot_inputs = 0;
  std::size_t footprint_bytes = 0;
};

struct ProfileReport {
  std::uint64_t accesses = 0;
  double lambda = 0.0;
  std::size_t hot_rows = 0;
  std::size_t hot_inputs = 0;
  std::size_t cold_inputs = 0;
  std::size_t footprint_bytes = 0;  // hot rows x d x 4 plus the slot mapping
  std::vector<TableProfile> tables;
  std::vector<LambdaSweepRow> sweep;  // ascending lambda
};

// Access-skew report over the training split; also written to
// <out>/profile.json.
ProfileReport profile_dataset(const Dataset& train, std::size_t dim, double lambda,
                              std::vector<double> sweep);
ProfileReport cmd_profile(const RunConfig& config);
nlohmann::ordered_json to_json(const ProfileReport& report);

struct TrainOptions {
  std::optional<std::string> mode;  // overrides config.mode
  std::optional<std::uint64_t> seed;
  std::optional<std::string> predicate;
  std::optional<std::filesystem::path> out;
  bool force_no_skip = false;
};

// Applies command-line overrides and revalidates.
RunConfig apply_overrides(RunConfig config, const TrainOptions& options);

// Runs one training job and writes metrics.jsonl, metrics.csv, summary.json,
// config.json and, for slipstream runs, search_trace.csv and stale_inputs.txt.
RunResult cmd_train(const RunConfig& config, const TrainOptions& options = {});

struct SideMetrics {
  double accuracy = 0.0;
  std::optional<double> auc;
  double bce = 0.0;
};

struct ComparisonReport {
  std::uint64_t seed = 0;
  std::uint64_t dataset_fingerprint = 0;
  SideMetrics baseline;
  SideMetrics slipstream;
  double drop_percentage = 0.0;
  std::uint64_t inputs_skipped = 0;
  std::optional<std::uint64_t> sampled_evaluations;
  std::optional<std::uint64_t> full_scan_evaluations;
  double accuracy_delta = 0.0;  // slipstream - baseline
  std::optional<double> auc_delta;
  double bce_delta = 0.0;
};

// Pure copies and differences of two summary documents. Throws ConfigError
// when seed or dataset fingerprint differ.
ComparisonReport compare_summaries(const nlohmann::json& baseline,
                                   const nlohmann::json& slipstream);
ComparisonReport cmd_compare(const std::filesystem::path& baseline_summary,
                             const std::filesystem::path& slipstream_summary,
                             const std::optional<std::filesystem::path>& out = std::nullopt);
nlohmann::ordered_json to_json(const ComparisonReport& report);

}  // namespace slipstream
