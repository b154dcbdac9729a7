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

#include "slipstream/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "slipstream/error.hpp"

namespace slipstream {

using ordered_json = nlohmann::ordered_json;

ModelSpec TrainerConfig::model_spec(const DatasetSchema& schema) const {
  ModelSpec spec;
  spec.n_dense = schema.n_dense;
  spec.table_sizes = schema.table_sizes;
  spec.dim = dim;
  spec.bottom_hidden = bottom_hidden;
  spec.top_hidden = top_hidden;
  spec.layer_norm = layer_norm_enabled;
  spec.layer_norm_eps = layer_norm_eps;
  return spec;
}

std::uint64_t TrainerConfig::warmup_iterations() const {
  const auto by_fraction = static_cast<std::uint64_t>(
      std::ceil(warmup_fraction * static_cast<double>(total_iterations)));
  return std::min(std::max(warmup_min_iterations, by_fraction), total_iterations / 2);
}

void TrainerConfig::validate(const DatasetSchema& schema) const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("config '" + key + "': " + why);
  };
  if (!(lambda > 0.0 && lambda < 1.0)) fail("lambda", "must lie in (0, 1)");
  if (!(s > 0.0 && s <= 1.0)) fail("s", "must lie in (0, 1]");
  if (alpha > schema.n_sparse) {
    fail("alpha", "must not exceed the " + std::to_string(schema.n_sparse) + " sparse features");
  }
  if (!(warmup_fraction > 0.0 && warmup_fraction <= 0.5)) {
    fail("warmup_fraction", "must lie in (0, 0.5]");
  }
  if (snapshots < 2) fail("N", "at least two snapshots are needed to measure change");
  if (batch_size == 0) fail("batch_size", "must be >= 1");
  if (total_iterations < 2) fail("total_iterations", "must be >= 2");
  if (eval_interval == 0) fail("eval_interval", "must be >= 1");
  if (!(lr > 0.0)) fail("lr", "must be > 0");
  if (dim == 0) fail("dim", "must be >= 1");
  if (predicate == PredicateMode::kPerElement && alpha_elems > dim) {
    fail("alpha_elems", "must not exceed dim = " + std::to_string(dim));
  }
  if (fixed_threshold && !(*fixed_threshold >= 0.0)) fail("T", "must be >= 0");
  if (warmup_iterations() < snapshots) {
    fail("warmup_min_iterations", "warmup window of " + std::to_string(warmup_iterations()) +
                                      " iterations cannot hold " + std::to_string(snapshots) +
                                      " snapshots");
  }
  SearchConfig probe = search;
  if (probe.T_hi <= probe.T_lo) probe.T_hi = probe.T_lo + 1.0;
  try {
    probe.validate();
    t_table.at(search.confidence);
  } catch (const ConfigError& e) {
    fail("search", e.what());
  }
  model_spec(schema).validate();
}

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::kPreprocessing: return "preprocessing";
    case Phase::kWarmup: return "warmup";
    case Phase::kSlipstream: return "slipstream";
    case Phase::kDone: return "done";
  }
  return "?";
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1)");
  }
  const auto n_test =
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(data.size())));
  if (n_test == 0 || n_test >= data.size()) {
    throw ConfigError("dataset of " + std::to_string(data.size()) +
                      " inputs is too small for the requested test split");
  }
  const std::size_t n_train = data.size() - n_test;
  return {data.slice(0, n_train), data.slice(n_train, data.size())};
}

PhaseState init_state(const TrainerConfig& config, const Dataset& train, const Dataset& test) {
  config.validate(train.schema());
  if (test.empty()) throw DomainError("evaluation needs a nonempty test set");
  PhaseState state;
  state.train = &train;
  state.test = &test;
  state.model = DlrmModel(config.model_spec(train.schema()), derive_seed(config.seed, "model"));
  state.batches.emplace(train.size(), config.batch_size, derive_seed(config.seed, "shuffle"));
  return state;
}

std::vector<float> forward(const DlrmModel& model, const Dataset& data,
                           std::span<const std::uint32_t> batch) {
  return model.predict(data, batch);
}

EvalResult evaluate(const DlrmModel& model, const Dataset& test) {
  if (test.empty()) throw DomainError("evaluate: empty test set");
  const std::vector<float> scores = model.predict(test);
  std::vector<int> labels(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) labels[i] = test.label(i);
  return score_predictions(scores, labels);
}

namespace {

void record_metrics(PhaseState& state) {
  const std::uint64_t skipped = state.batches->skipped();
  if (!state.pending_scores.empty()) {
    const EvalResult train = score_predictions(state.pending_scores, state.pending_labels);
    state.metrics.push_back(MetricsRow{state.iteration, "train", train.accuracy, train.auc,
                                       train.bce, skipped, state.applied_drop});
    state.pending_scores.clear();
    state.pending_labels.clear();
  }
  const EvalResult test = evaluate(state.model, *state.test);
  state.metrics.push_back(MetricsRow{state.iteration, "test", test.accuracy, test.auc, test.bce,
                                     skipped, state.applied_drop});
}

// Trains until `until` iterations, invoking `after_step` after each one.
template <typename AfterStep>
void train_until(const TrainerConfig& config, PhaseState& state, std::uint64_t until,
                 AfterStep&& after_step) {
  std::vector<std::uint32_t> batch;
  while (state.iteration < until) {
    state.batches->next(batch);
    const std::vector<float> preds = state.model.train_batch(*state.train, batch, config.lr);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      state.pending_scores.push_back(preds[i]);
      state.pending_labels.push_back(state.train->label(batch[i]));
    }
    ++state.iteration;
    after_step();
    if (state.iteration % config.eval_interval == 0 || state.iteration == config.total_iterations) {
      record_metrics(state);
    }
  }
}

void train_until(const TrainerConfig& config, PhaseState& state, std::uint64_t until) {
  train_until(config, state, until, [] {});
}

void require_phase(const PhaseState& state, Phase expected) {
  if (state.phase != expected) {
    throw DomainError(std::string("phase order violated: expected ") + phase_name(expected) +
                      ", run is in " + phase_name(state.phase));
  }
}

}  // namespace

PreprocessingResult run_preprocessing(const TrainerConfig& config, const Dataset& train,
                                      const EmbeddingBag& bag) {
  const auto sizes = train.schema().table_sizes;
  AccessProfile profile(sizes, config.lambda);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto sparse = train.sparse(i);
    for (std::size_t j = 0; j < sparse.size(); ++j) profile.record(j, sparse[j]);
  }
  HotFlags flags = classify_hot(profile);
  HotTable hot = freeze_hot_table(bag, flags);
  DatasetPartition partition = partition_inputs(train, hot);
  return PreprocessingResult{std::move(profile), std::move(flags), std::move(hot),
                             std::move(partition)};
}

void run_preprocessing(const TrainerConfig& config, PhaseState& state) {
  require_phase(state, Phase::kPreprocessing);
  PreprocessingResult pre = run_preprocessing(config, *state.train, state.model.bag());
  state.profile = std::move(pre.profile);
  state.partition = std::move(pre.partition);
  state.model.attach_hot_table(std::move(pre.hot_table));
  state.phase = Phase::kWarmup;
}

const SnapshotStore& run_warmup(const TrainerConfig& config, PhaseState& state) {
  require_phase(state, Phase::kWarmup);
  const std::uint64_t window = config.warmup_iterations();
  const std::vector<std::uint64_t> ticks = snapshot_schedule(window, config.snapshots);
  state.snapshots.emplace(config.snapshots);
  std::size_t next_tick = 0;
  train_until(config, state, window, [&] {
    if (next_tick < ticks.size() && state.iteration == ticks[next_tick]) {
      state.snapshots->capture(*state.model.hot_table(), state.iteration);
      ++next_tick;
    }
  });
  state.phase = Phase::kSlipstream;
  return *state.snapshots;
}

namespace {

ClassifierConfig classifier_config(const TrainerConfig& config) {
  ClassifierConfig cfg;
  cfg.alpha = config.alpha;
  cfg.predicate_mode = config.predicate;
  cfg.alpha_elems = config.alpha_elems;
  cfg.pair_mode = config.pair_mode;
  return cfg;
}

}  // namespace

const std::vector<MetricsRow>& run_slipstream_phase(const TrainerConfig& config,
                                                    PhaseState& state) {
  require_phase(state, Phase::kSlipstream);
  if (!state.snapshots || state.snapshots->size() < 2) {
    throw DomainError("slipstream phase needs at least two snapshots");
  }
  const HotTable& hot = *state.model.hot_table();
  ClassifierConfig cfg = classifier_config(config);
  StalenessEvaluator evaluator(*state.snapshots, hot, cfg);
  const auto& hot_inputs = state.partition->hot;

  if (config.fixed_threshold) {
    state.threshold = *config.fixed_threshold;
  } else if (!hot_inputs.empty()) {
    state.sample = sample_hot_inputs(hot_inputs, config.s, derive_seed(config.seed, "sample"));
    SearchConfig search = config.search;
    if (search.T_hi <= search.T_lo) {
      const double top = evaluator.max_statistic();
      search.T_hi = top > search.T_lo ? top * (1.0 + 1e-6) : search.T_lo + 1.0;
    }
    state.search = search_threshold(search, *state.sample, *state.train, evaluator,
                                    config.alpha, config.t_table);
    state.threshold = state.search->T;
  }
  cfg.set_threshold(state.threshold);

  const std::vector<std::uint8_t> varying = evaluator.varying_flags(state.threshold);
  state.classification = classify_inputs(*state.train, hot_inputs, varying, hot, cfg);

  if (config.skipping_enabled && !state.classification->stale_indices.empty()) {
    std::vector<std::uint8_t> mask(state.train->size(), 0);
    for (const std::uint32_t id : state.classification->stale_indices) mask[id] = 1;
    state.batches->set_drop_mask(std::move(mask));
    state.applied_drop = state.classification->drop_percentage;
  }
  train_until(config, state, config.total_iterations);
  state.phase = Phase::kDone;
  return state.metrics;
}

namespace {

RunSummary base_summary(const TrainerConfig& config, const PhaseState& state, std::string mode) {
  RunSummary s;
  s.mode = std::move(mode);
  s.seed = config.seed;
  s.dataset_fingerprint = state.train->fingerprint() ^ (state.test->fingerprint() * 31);
  s.iterations = state.iteration;
  s.warmup_iterations = config.warmup_iterations();
  s.skipping_enabled = false;
  s.final_test = evaluate(state.model, *state.test);
  s.inputs_skipped = state.batches->skipped();
  s.drop_percentage = state.applied_drop;
  return s;
}

// Re-raises a library error with the phase it came from, keeping its type.
template <typename F>
void in_phase(const char* phase, F&& body) {
  auto tag = [phase](const Error& e) { return std::string(phase) + ": " + e.what(); };
  try {
    body();
  } catch (const ShapeError& e) {
    throw ShapeError(tag(e));
  } catch (const RangeError& e) {
    throw RangeError(tag(e));
  } catch (const ConfigError& e) {
    throw ConfigError(tag(e));
  } catch (const DomainError& e) {
    throw DomainError(tag(e));
  } catch (const IoError& e) {
    throw IoError(tag(e));
  }
}

}  // namespace

RunResult run_baseline(const TrainerConfig& config, const Dataset& train, const Dataset& test) {
  PhaseState state = init_state(config, train, test);
  train_until(config, state, config.total_iterations);
  state.phase = Phase::kDone;
  RunResult result;
  result.summary = base_summary(config, state, "baseline");
  result.metrics = state.metrics;
  result.state = std::move(state);
  return result;
}

RunResult run_slipstream(const TrainerConfig& config, const Dataset& train, const Dataset& test) {
  PhaseState state = init_state(config, train, test);
  in_phase("preprocessing", [&] { run_preprocessing(config, state); });
  in_phase("warmup", [&] { run_warmup(config, state); });
  in_phase("slipstream", [&] { run_slipstream_phase(config, state); });

  RunResult result;
  RunSummary s = base_summary(config, state, "slipstream");
  const HotTable& hot = *state.model.hot_table();
  s.skipping_enabled = config.skipping_enabled;
  s.hot_rows = hot.hot_row_count();
  s.hot_inputs = state.partition->hot.size();
  s.cold_inputs = state.partition->cold.size();
  s.stale_inputs = state.classification->stale_indices.size();
  s.predicate = config.predicate == PredicateMode::kRowNorm ? "row_norm" : "per_element";
  s.threshold = state.threshold;
  s.threshold_searched = state.search.has_value();
  s.search = state.search;
  if (state.search) {
    const std::size_t pairs = pair_positions(*state.snapshots, config.pair_mode).size();
    s.full_scan_evaluations = static_cast<std::uint64_t>(state.search->iterations) *
                              s.hot_inputs * train.schema().n_sparse * pairs;
  }
  s.snapshot_bytes = memory_footprint(*state.snapshots, hot);

  // Movement of each hot row since the last snapshot, split by staleness.
  ClassifierConfig cfg = classifier_config(config);
  StalenessEvaluator evaluator(*state.snapshots, hot, cfg);
  const std::vector<std::uint8_t> varying = evaluator.varying_flags(state.threshold);
  const Matrix& last = state.snapshots->latest().values;
  double stale_sum = 0.0;
  double vary_sum = 0.0;
  std::size_t stale_n = 0;
  for (std::size_t slot = 0; slot < hot.hot_row_count(); ++slot) {
    double acc = 0.0;
    const auto now = hot.slot_row(slot);
    const auto then = last.row(slot);
    for (std::size_t c = 0; c < now.size(); ++c) {
      const double d = static_cast<double>(now[c]) - then[c];
      acc += d * d;
    }
    (varying[slot] ? vary_sum : stale_sum) += std::sqrt(acc);
    stale_n += varying[slot] == 0;
  }
  const std::size_t vary_n = hot.hot_row_count() - stale_n;
  s.stale_rows = stale_n;
  s.mean_update_stale = stale_n ? stale_sum / static_cast<double>(stale_n) : 0.0;
  s.mean_update_varying = vary_n ? vary_sum / static_cast<double>(vary_n) : 0.0;

  result.summary = std::move(s);
  result.metrics = state.metrics;
  result.state = std::move(state);
  return result;
}

std::string metrics_json_line(const MetricsRow& row) {
  ordered_json j;
  j["iteration"] = row.iteration;
  j["split"] = row.split;
  j["accuracy"] = row.accuracy;
  j["auc"] = row.auc ? ordered_json(*row.auc) : ordered_json(nullptr);
  j["bce"] = row.bce;
  j["inputs_skipped_cum"] = row.inputs_skipped_cum;
  j["drop_percentage"] = row.drop_percentage;
  return j.dump();
}

void write_metrics_jsonl(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& row : rows) out << metrics_json_line(row) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "iteration,split,accuracy,auc,bce,inputs_skipped_cum,drop_percentage\n"
      << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.split << ',' << r.accuracy << ',';
    if (r.auc) out << *r.auc;
    out << ',' << r.bce << ',' << r.inputs_skipped_cum << ',' << r.drop_percentage << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::string summary_json(const RunSummary& s) {
  ordered_json j;
  j["schema_version"] = 1;
  j["mode"] = s.mode;
  j["seed"] = s.seed;
  j["dataset_fingerprint"] = s.dataset_fingerprint;
  j["iterations"] = s.iterations;
  j["warmup_iterations"] = s.warmup_iterations;
  j["skipping_enabled"] = s.skipping_enabled;
  j["final_test"] = {{"accuracy", s.final_test.accuracy},
                     {"auc", s.final_test.auc ? ordered_json(*s.final_test.auc)
                                              : ordered_json(nullptr)},
                     {"bce", s.final_test.bce}};
  j["inputs_skipped"] = s.inputs_skipped;
  j["drop_percentage"] = s.drop_percentage;
  if (s.mode == "slipstream") {
    j["hot_rows"] = s.hot_rows;
    j["hot_inputs"] = s.hot_inputs;
    j["cold_inputs"] = s.cold_inputs;
    j["stale_inputs"] = s.stale_inputs;
    j["predicate"] = s.predicate;
    j["threshold"] = s.threshold;
    j["threshold_searched"] = s.threshold_searched;
    if (s.search) {
      const DropEstimate& e = s.search->estimate;
      j["search"] = {{"T", s.search->T},
                     {"D", e.D},
                     {"D_bar", e.D_bar},
                     {"sd", e.sd},
                     {"ci_low", e.ci_low},
                     {"ci_high", e.ci_high},
                     {"t_crit", e.t_crit},
                     {"m", e.m},
                     {"reached", s.search->reached},
                     {"iterations", s.search->iterations},
                     {"distance_evaluations", s.search->evaluations},
                     {"full_scan_evaluations", s.full_scan_evaluations}};
    } else {
      j["search"] = nullptr;
    }
    j["snapshot_bytes"] = s.snapshot_bytes;
    j["stale_rows"] = s.stale_rows;
    j["mean_update_stale"] = s.mean_update_stale;
    j["mean_update_varying"] = s.mean_update_varying;
  }
  return j.dump(2);
}

void write_summary(const std::filesystem::path& path, const RunSummary& summary) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << summary_json(summary) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace slipstream
