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
#include <string_view>
#include <vector>

#include "json.hpp"
#include "slipstream/data.hpp"
#include "slipstream/trainer.hpp"

namespace slipstream {

inline constexpr int kConfigSchemaVersion = 1;

enum class DatasetSource { kSynthetic, kCriteo, kCache };

struct DatasetConfig {
  DatasetSource source = DatasetSource::kSynthetic;
  SyntheticSpec synthetic;       // kSynthetic
  std::filesystem::path path;    // kCriteo, kCache
  DatasetSchema criteo_schema{13, 26, std::vector<std::size_t>(26, 100'000), true};
  std::size_t limit = 0;         // kCriteo: 0 reads every line
};

// One JSON document describing a run. Keys are flat where they name a
// hyperparameter (lambda, T, alpha, s, N); model, search and dataset settings
// are nested objects.
struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  DatasetConfig dataset;
  double test_fraction = 0.1;
  TrainerConfig trainer;
  std::string mode = "slipstream";  // or "baseline"
  std::filesystem::path out = "run";
  std::vector<double> lambda_sweep;  // cmd_profile; empty = decades around lambda

  // Throws ConfigError naming the offending key.
  void validate() const;
};

// Parses and validates. Unknown keys are rejected; a missing "dataset" is an
// error, every other key has a default.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const RunConfig& config);

PredicateMode parse_predicate(std::string_view name);
PairMode parse_pair_mode(std::string_view name);

// Materialises the dataset the config points at.
Dataset load_dataset(const DatasetConfig& config);

}  // namespace slipstream
