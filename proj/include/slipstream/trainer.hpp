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

#include "slipstream/classifier.hpp"
#include "slipstream/data.hpp"
#include "slipstream/metrics.hpp"
#include "slipstream/model.hpp"
#include "slipstream/snapshot.hpp"
#include "slipstream/threshold_search.hpp"

namespace slipstream {

struct TrainerConfig {
  // model
  std::size_t dim = 8;
  std::vector<std::size_t> bottom_hidden{16};
  std::vector<std::size_t> top_hidden{16};
  bool layer_norm_enabled = true;
  double layer_norm_eps = 1e-5;

  // hot/cold split and snapshots
  double lambda = 1e-6;
  double warmup_fraction = 0.02;
  std::uint64_t warmup_min_iterations = 2000;
  std::size_t snapshots = 2;  // N
  PairMode pair_mode = PairMode::kLastPair;

  // sampling, search and classification
  double s = 0.001;
  std::size_t alpha = 2;
  PredicateMode predicate = PredicateMode::kRowNorm;
  std::optional<double> fixed_threshold;  // skips the search when set
  std::size_t alpha_elems = 0;
  SearchConfig search;                    // T_hi <= T_lo means "derive from snapshots"
  TCriticalTable t_table;
  bool skipping_enabled = true;

  // optimisation
  double lr = 0.2;
  std::size_t batch_size = 256;
  std::uint64_t total_iterations = 8000;
  std::uint64_t eval_interval = 1000;
  std::uint64_t seed = 7;

  TrainerConfig() {
    search.T_hi = 0.0;  // auto
  }

  ModelSpec model_spec(const DatasetSchema& schema) const;
  // max(warmup_min_iterations, ceil(warmup_fraction * total)), capped at half
  // of the run.
  std::uint64_t warmup_iterations() const;
  // Throws ConfigError with the offending key.
  void validate(const DatasetSchema& schema) const;
};

enum class Phase { kPreprocessing, kWarmup, kSlipstream, kDone };

const char* phase_name(Phase phase);

struct MetricsRow {
  std::uint64_t iteration = 0;
  std::string split;  // "train" or "test"
  double accuracy = 0.0;
  std::optional<double> auc;
  double bce = 0.0;
  std::uint64_t inputs_skipped_cum = 0;
  double drop_percentage = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

struct PreprocessingResult {
  AccessProfile profile;
  HotFlags hot_flags;
  HotTable hot_table;
  DatasetPartition partition;
};

// Everything a run carries between phases.
struct PhaseState {
  Phase phase = Phase::kPreprocessing;
  std::uint64_t iteration = 0;
  const Dataset* train = nullptr;
  const Dataset* test = nullptr;
  DlrmModel model;
  std::optional<Minibatcher> batches;

  std::optional<AccessProfile> profile;
  std::optional<DatasetPartition> partition;
  std::optional<SnapshotStore> snapshots;
  std::optional<SampleSet> sample;
  std::optional<SearchResult> search;
  std::optional<Partition> classification;
  double threshold = 0.0;
  double applied_drop = 0.0;

  std::vector<MetricsRow> metrics;
  // train predictions since the last evaluation
  std::vector<float> pending_scores;
  std::vector<int> pending_labels;
};

// Fresh model and batch stream for a run over `train`, evaluated on `test`.
PhaseState init_state(const TrainerConfig& config, const Dataset& train, const Dataset& test);

// Model probabilities for a batch.
std::vector<float> forward(const DlrmModel& model, const Dataset& data,
                           std::span<const std::uint32_t> batch);

// accuracy at 0.5, Mann-Whitney AUC, mean BCE over the whole set.
EvalResult evaluate(const DlrmModel& model, const Dataset& test);

// One counting pass over the training inputs, hot-row freeze and input split.
PreprocessingResult run_preprocessing(const TrainerConfig& config, const Dataset& train,
                                      const EmbeddingBag& bag);
void run_preprocessing(const TrainerConfig& config, PhaseState& state);

// Trains on every input for the warmup window, capturing N snapshots.
const SnapshotStore& run_warmup(const TrainerConfig& config, PhaseState& state);

// Threshold search on the sample, classification of I_hot, then training on
// I_hot^vary + I_cold until total_iterations.
const std::vector<MetricsRow>& run_slipstream_phase(const TrainerConfig& config,
                                                    PhaseState& state);

struct RunSummary {
  std::string mode;  // "baseline" or "slipstream"
  std::uint64_t seed = 0;
  std::uint64_t dataset_fingerprint = 0;
  std::uint64_t iterations = 0;
  std::uint64_t warmup_iterations = 0;
  bool skipping_enabled = false;
  EvalResult final_test;
  std::uint64_t inputs_skipped = 0;
  double drop_percentage = 0.0;

  // slipstream only
  std::size_t hot_rows = 0;
  std::size_t hot_inputs = 0;
  std::size_t cold_inputs = 0;
  std::size_t stale_inputs = 0;
  std::string predicate;
  double threshold = 0.0;
  bool threshold_searched = false;
  std::optional<SearchResult> search;
  std::uint64_t full_scan_evaluations = 0;
  std::size_t snapshot_bytes = 0;
  double mean_update_stale = 0.0;
  double mean_update_varying = 0.0;
  std::size_t stale_rows = 0;
};

struct RunResult {
  std::vector<MetricsRow> metrics;
  RunSummary summary;
  PhaseState state;
};

RunResult run_baseline(const TrainerConfig& config, const Dataset& train, const Dataset& test);
RunResult run_slipstream(const TrainerConfig& config, const Dataset& train, const Dataset& test);

// Splits off the last `test_fraction` of the inputs as the test set.
std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double test_fraction);

// Stable serialisations (fixed key order, round-trip float formatting).
std::string metrics_json_line(const MetricsRow& row);
void write_metrics_jsonl(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::string summary_json(const RunSummary& summary);
void write_summary(const std::filesystem::path& path, const RunSummary& summary);

}  // namespace slipstream
