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

#include "slipstream/commands.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>

#include "slipstream/embedding.hpp"
#include "slipstream/error.hpp"

namespace slipstream {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() +
                  (ec ? ": " + ec.message() : std::string()));
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + " is not valid JSON: " + e.what(), 1);
  }
}

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

double top_mass(const Dataset& data, std::size_t table, double fraction) {
  const DatasetSchema& schema = data.schema();
  if (table >= schema.n_sparse) throw RangeError("top_mass: no table " + std::to_string(table));
  if (data.empty()) return 0.0;
  std::vector<std::uint64_t> counts(schema.table_sizes[table], 0);
  for (std::size_t i = 0; i < data.size(); ++i) ++counts[data.sparse(i)[table]];
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(counts.size()))));
  std::partial_sort(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(k), counts.end(),
                    std::greater<>());
  const std::uint64_t top = std::accumulate(counts.begin(), counts.begin() + k, std::uint64_t{0});
  return static_cast<double>(top) / static_cast<double>(data.size());
}

GenerateResult cmd_generate(const RunConfig& config) {
  config.validate();
  if (config.dataset.source != DatasetSource::kSynthetic) {
    throw ConfigError("generate needs dataset.source = synthetic");
  }
  const SyntheticSpec& spec = config.dataset.synthetic;
  const Dataset data = gen_synthetic(spec);
  ensure_dir(config.out);

  GenerateResult result;
  result.dataset_path = config.out / "dataset.bin";
  result.manifest_path = config.out / "manifest.json";
  write_dataset_cache(result.dataset_path, data);

  std::size_t positives = 0;
  for (std::size_t i = 0; i < data.size(); ++i) positives += data.label(i) != 0;
  ordered_json m;
  m["seed"] = spec.seed;
  m["n_inputs"] = data.size();
  m["n_dense"] = spec.schema.n_dense;
  m["n_sparse"] = spec.schema.n_sparse;
  m["table_sizes"] = spec.schema.table_sizes;
  m["zipf_exponent"] = spec.zipf_exponents;
  m["teacher_scale"] = spec.teacher_scale;
  m["teacher_bias"] = spec.teacher_bias;
  m["noise_rate"] = spec.noise_rate;
  m["positive_rate"] = static_cast<double>(positives) / static_cast<double>(data.size());
  std::vector<double> mass;
  for (std::size_t t = 0; t < spec.schema.n_sparse; ++t) mass.push_back(top_mass(data, t, 0.01));
  m["top1_mass"] = mass;
  m["fingerprint"] = data.fingerprint();
  write_text(result.manifest_path, m.dump(2) + "\n");
  result.manifest = std::move(m);
  return result;
}

ProfileReport profile_dataset(const Dataset& train, std::size_t dim, double lambda,
                              std::vector<double> sweep) {
  const DatasetSchema& schema = train.schema();
  AccessProfile profile(schema.table_sizes, lambda);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto sparse = train.sparse(i);
    for (std::size_t j = 0; j < sparse.size(); ++j) profile.record(j, sparse[j]);
  }
  const std::size_t total_rows =
      std::accumulate(schema.table_sizes.begin(), schema.table_sizes.end(), std::size_t{0});
  auto footprint = [&](std::size_t hot_rows) {
    return hot_rows * dim * sizeof(float) + HotTable::mapping_bytes_for(hot_rows, total_rows);
  };
  auto hot_inputs = [&](const HotFlags& flags) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto sparse = train.sparse(i);
      bool all = true;
      for (std::size_t j = 0; j < sparse.size() && all; ++j) all = flags[j][sparse[j]] != 0;
      n += all;
    }
    return n;
  };

  ProfileReport report;
  report.accesses = profile.total();
  report.lambda = lambda;
  const HotFlags flags = classify_hot(profile);
  report.hot_rows = hot_row_count(flags);
  report.hot_inputs = hot_inputs(flags);
  report.cold_inputs = train.size() - report.hot_inputs;
  report.footprint_bytes = footprint(report.hot_rows);

  for (std::size_t t = 0; t < schema.n_sparse; ++t) {
    TableProfile tp;
    tp.table = t;
    const auto counts = profile.table_counts(t);
    tp.rows = counts.size();
    for (const std::uint64_t c : counts) {
      tp.accessed_rows += c > 0;
      tp.max_count = std::max(tp.max_count, c);
      const std::size_t bucket = c == 0 ? 0 : static_cast<std::size_t>(std::bit_width(c));
      if (tp.histogram.size() <= bucket) tp.histogram.resize(bucket + 1, 0);
      ++tp.histogram[bucket];
    }
    tp.top1_mass = top_mass(train, t, 0.01);
    tp.hot_rows = static_cast<std::size_t>(
        std::count(flags[t].begin(), flags[t].end(), std::uint8_t{1}));
    report.tables.push_back(std::move(tp));
  }

  if (sweep.empty()) {
    for (int e = -8; e <= -3; ++e) sweep.push_back(std::pow(10.0, e));
  }
  std::sort(sweep.begin(), sweep.end());
  sweep.erase(std::unique(sweep.begin(), sweep.end()), sweep.end());
  for (const double l : sweep) {
    const HotFlags f = classify_hot(profile, l);
    const std::size_t rows = hot_row_count(f);
    report.sweep.push_back(LambdaSweepRow{l, rows, hot_inputs(f), footprint(rows)});
  }
  return report;
}

ordered_json to_json(const ProfileReport& r) {
  ordered_json j;
  j["accesses"] = r.accesses;
  j["lambda"] = r.lambda;
  j["hot_rows"] = r.hot_rows;
  j["hot_inputs"] = r.hot_inputs;
  j["cold_inputs"] = r.cold_inputs;
  j["footprint_bytes"] = r.footprint_bytes;
  ordered_json tables = ordered_json::array();
  for (const auto& t : r.tables) {
    tables.push_back({{"table", t.table},
                      {"rows", t.rows},
                      {"accessed_rows", t.accessed_rows},
                      {"max_count", t.max_count},
                      {"top1_mass", t.top1_mass},
                      {"hot_rows", t.hot_rows},
                      {"log2_histogram", t.histogram}});
  }
  j["tables"] = tables;
  ordered_json sweep = ordered_json::array();
  for (const auto& s : r.sweep) {
    sweep.push_back({{"lambda", s.lambda},
                     {"hot_rows", s.hot_rows},
                     {"hot_inputs", s.hot_inputs},
                     {"footprint_bytes", s.footprint_bytes}});
  }
  j["lambda_sweep"] = sweep;
  return j;
}

ProfileReport cmd_profile(const RunConfig& config) {
  config.validate();
  const Dataset data = load_dataset(config.dataset);
  const auto [train, test] = split_train_test(data, config.test_fraction);
  ProfileReport report =
      profile_dataset(train, config.trainer.dim, config.trainer.lambda, config.lambda_sweep);
  ensure_dir(config.out);
  write_text(config.out / "profile.json", to_json(report).dump(2) + "\n");
  return report;
}

RunConfig apply_overrides(RunConfig config, const TrainOptions& options) {
  if (options.mode) config.mode = *options.mode;
  if (options.seed) config.trainer.seed = *options.seed;
  if (options.predicate) config.trainer.predicate = parse_predicate(*options.predicate);
  if (options.out) config.out = *options.out;
  if (options.force_no_skip) config.trainer.skipping_enabled = false;
  config.validate();
  return config;
}

RunResult cmd_train(const RunConfig& base, const TrainOptions& options) {
  const RunConfig config = apply_overrides(base, options);
  const Dataset data = load_dataset(config.dataset);
  const auto [train, test] = split_train_test(data, config.test_fraction);
  ensure_dir(config.out);

  RunResult result = config.mode == "baseline" ? run_baseline(config.trainer, train, test)
                                               : run_slipstream(config.trainer, train, test);
  // The state points into the local datasets; drop the dangling references.
  result.state.train = nullptr;
  result.state.test = nullptr;

  write_text(config.out / "config.json", to_json(config).dump(2) + "\n");
  write_metrics_jsonl(config.out / "metrics.jsonl", result.metrics);
  write_metrics_csv(config.out / "metrics.csv", result.metrics);
  write_summary(config.out / "summary.json", result.summary);
  if (config.mode == "slipstream") {
    if (result.state.search) write_search_trace(config.out / "search_trace.csv", *result.state.search);
    write_index_list(config.out / "stale_inputs.txt", result.state.classification->stale_indices);
  }
  return result;
}

ComparisonReport compare_summaries(const json& baseline, const json& slipstream) {
  auto field = [](const json& doc, const char* key, const char* which) -> const json& {
    if (!doc.contains(key)) {
      throw ConfigError(std::string(which) + " summary lacks '" + key + "'");
    }
    return doc.at(key);
  };
  const auto seed_a = field(baseline, "seed", "baseline").get<std::uint64_t>();
  const auto seed_b = field(slipstream, "seed", "slipstream").get<std::uint64_t>();
  const auto fp_a = field(baseline, "dataset_fingerprint", "baseline").get<std::uint64_t>();
  const auto fp_b = field(slipstream, "dataset_fingerprint", "slipstream").get<std::uint64_t>();
  if (seed_a != seed_b) {
    throw ConfigError("provenance mismatch: seeds differ (" + std::to_string(seed_a) + " vs " +
                      std::to_string(seed_b) + ")");
  }
  if (fp_a != fp_b) {
    throw ConfigError("provenance mismatch: the summaries describe different datasets");
  }
  auto side = [&](const json& doc, const char* which) {
    const json& f = field(doc, "final_test", which);
    SideMetrics m;
    m.accuracy = f.at("accuracy").get<double>();
    if (!f.at("auc").is_null()) m.auc = f.at("auc").get<double>();
    m.bce = f.at("bce").get<double>();
    return m;
  };

  ComparisonReport r;
  r.seed = seed_a;
  r.dataset_fingerprint = fp_a;
  r.baseline = side(baseline, "baseline");
  r.slipstream = side(slipstream, "slipstream");
  r.drop_percentage = field(slipstream, "drop_percentage", "slipstream").get<double>();
  r.inputs_skipped = field(slipstream, "inputs_skipped", "slipstream").get<std::uint64_t>();
  if (slipstream.contains("search") && slipstream.at("search").is_object()) {
    const json& s = slipstream.at("search");
    r.sampled_evaluations = s.at("distance_evaluations").get<std::uint64_t>();
    r.full_scan_evaluations = s.at("full_scan_evaluations").get<std::uint64_t>();
  }
  r.accuracy_delta = r.slipstream.accuracy - r.baseline.accuracy;
  if (r.baseline.auc && r.slipstream.auc) r.auc_delta = *r.slipstream.auc - *r.baseline.auc;
  r.bce_delta = r.slipstream.bce - r.baseline.bce;
  return r;
}

ComparisonReport cmd_compare(const std::filesystem::path& baseline_summary,
                             const std::filesystem::path& slipstream_summary,
                             const std::optional<std::filesystem::path>& out) {
  const ComparisonReport report =
      compare_summaries(read_json(baseline_summary), read_json(slipstream_summary));
  if (out) {
    ensure_dir(*out);
    write_text(*out / "comparison.json", to_json(report).dump(2) + "\n");
  }
  return report;
}

ordered_json to_json(const ComparisonReport& r) {
  auto side = [](const SideMetrics& m) {
    return ordered_json{{"accuracy", m.accuracy}, {"auc", optional_number(m.auc)}, {"bce", m.bce}};
  };
  ordered_json j;
  j["seed"] = r.seed;
  j["dataset_fingerprint"] = r.dataset_fingerprint;
  j["baseline"] = side(r.baseline);
  j["slipstream"] = side(r.slipstream);
  j["drop_percentage"] = r.drop_percentage;
  j["inputs_skipped"] = r.inputs_skipped;
  j["distance_evaluations"] = {
      {"sampled", r.sampled_evaluations ? ordered_json(*r.sampled_evaluations) : nullptr},
      {"full_scan", r.full_scan_evaluations ? ordered_json(*r.full_scan_evaluations) : nullptr}};
  j["accuracy_delta"] = r.accuracy_delta;
  j["auc_delta"] = optional_number(r.auc_delta);
  j["bce_delta"] = r.bce_delta;
  return j;
}

}  // namespace slipstream
