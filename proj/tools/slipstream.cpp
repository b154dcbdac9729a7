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

// slipstream: generate datasets, profile access skew, train and compare runs.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "slipstream/commands.hpp"
#include "slipstream/config.hpp"
#include "slipstream/error.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

void print_summary(const slipstream::RunSummary& s) {
  std::printf("mode %s, %llu iterations, final test accuracy %.4f", s.mode.c_str(),
              static_cast<unsigned long long>(s.iterations), s.final_test.accuracy);
  if (s.final_test.auc) std::printf(", auc %.4f", *s.final_test.auc);
  std::printf(", bce %.4f\n", s.final_test.bce);
  if (s.mode == "slipstream") {
    std::printf("hot rows %zu, hot inputs %zu, stale inputs %zu (%.2f%%), skipped %llu\n",
                s.hot_rows, s.hot_inputs, s.stale_inputs, 100.0 * s.drop_percentage,
                static_cast<unsigned long long>(s.inputs_skipped));
    if (s.search) {
      std::printf("threshold %.6g after %zu probes (%s), %llu distance evaluations\n", s.threshold,
                  s.search->iterations, s.search->reached ? "target reached" : "target missed",
                  static_cast<unsigned long long>(s.search->evaluations));
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-input skipping for embedding-heavy recommendation models"};
  app.require_subcommand(1);

  std::string config_path;
  slipstream::TrainOptions train_opts;
  std::string mode;
  std::uint64_t seed = 0;
  std::string predicate;
  std::string out;

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset cache and manifest");
  gen->add_option("--config", config_path, "Run config (JSON)")->required();
  gen->add_option("--out", out, "Output directory");

  auto* prof = app.add_subcommand("profile", "Report access skew and hot-table size");
  prof->add_option("--config", config_path, "Run config (JSON)")->required();
  prof->add_option("--out", out, "Output directory");

  auto* train = app.add_subcommand("train", "Train a baseline or slipstream run");
  train->add_option("--config", config_path, "Run config (JSON)")->required();
  auto* mode_opt = train->add_option("--mode", mode, "baseline or slipstream")
                       ->check(CLI::IsMember({"baseline", "slipstream"}));
  auto* seed_opt = train->add_option("--seed", seed, "Override the training seed");
  train->add_option("--out", out, "Output directory");
  train->add_flag("--force-no-skip", train_opts.force_no_skip,
                  "Run every phase but train on all inputs");
  auto* pred_opt = train->add_option("--predicate", predicate, "row_norm or per_element")
                       ->check(CLI::IsMember({"row_norm", "per_element"}));

  std::string base_summary;
  std::string slip_summary;
  auto* cmp = app.add_subcommand("compare", "Side-by-side report of two run summaries");
  cmp->add_option("baseline", base_summary, "Baseline summary.json")->required();
  cmp->add_option("slipstream", slip_summary, "Slipstream summary.json")->required();
  cmp->add_option("--out", out, "Directory for comparison.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmp->parsed()) {
      std::optional<std::filesystem::path> dir;
      if (!out.empty()) dir = out;
      const auto report = slipstream::cmd_compare(base_summary, slip_summary, dir);
      std::cout << slipstream::to_json(report).dump(2) << '\n';
      return 0;
    }

    slipstream::RunConfig config = slipstream::load_run_config(config_path);
    if (!out.empty()) config.out = out;

    if (gen->parsed()) {
      const auto result = slipstream::cmd_generate(config);
      std::cout << "wrote " << result.dataset_path.string() << " and "
                << result.manifest_path.string() << '\n';
    } else if (prof->parsed()) {
      const auto report = slipstream::cmd_profile(config);
      std::cout << slipstream::to_json(report).dump(2) << '\n';
    } else if (train->parsed()) {
      if (*mode_opt) train_opts.mode = mode;
      if (*seed_opt) train_opts.seed = seed;
      if (*pred_opt) train_opts.predicate = predicate;
      const auto result = slipstream::cmd_train(config, train_opts);
      print_summary(result.summary);
    }
  } catch (const slipstream::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
