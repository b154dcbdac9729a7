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

// Acceptance checks 1-10. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "../fixtures.hpp"
#include "../oracles.hpp"
#include "CLI11.hpp"
#include "json.hpp"
#include "slipstream/commands.hpp"
#include "slipstream/config.hpp"
#include "slipstream/error.hpp"
#include "slipstream/trainer.hpp"

using namespace slipstream;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// The default synthetic workload and the two runs several criteria share.
class DefaultWorkload {
 public:
  const Dataset& train() { load(); return *train_; }
  const Dataset& test() { load(); return *test_; }

  const RunResult& slipstream_run() {
    if (!slip_) slip_ = run_slipstream(TrainerConfig{}, train(), test());
    return *slip_;
  }
  const RunResult& baseline_run() {
    if (!base_) base_ = run_baseline(TrainerConfig{}, train(), test());
    return *base_;
  }

 private:
  void load() {
    if (train_) return;
    auto [tr, te] = split_train_test(gen_synthetic(SyntheticSpec{}), 0.1);
    train_ = std::move(tr);
    test_ = std::move(te);
  }

  std::optional<Dataset> train_;
  std::optional<Dataset> test_;
  std::optional<RunResult> slip_;
  std::optional<RunResult> base_;
};

DefaultWorkload workload;

// 1. Distance evaluations of the sampled search vs a full scan replaying the
// same bisection trace over every hot input.
Outcome sampling_work_ratio() {
  const RunResult& r = workload.slipstream_run();
  const PhaseState& st = r.state;
  if (!st.search) return {false, "no threshold search ran"};
  const TrainerConfig config;
  ClassifierConfig cc;
  cc.alpha = config.alpha;
  cc.pair_mode = config.pair_mode;
  StalenessEvaluator full(*st.snapshots, *st.model.hot_table(), cc);
  for (const auto& row : st.search->trace) {
    for (const std::uint32_t id : st.partition->hot) {
      full.drop_indicator(workload.train().sparse(id), row.T, config.alpha);
    }
  }
  const auto sampled = count_distance_evaluations(*st.search);
  const auto scan = full.evaluations();
  const double ratio = static_cast<double>(scan) / static_cast<double>(sampled);
  return {std::abs(ratio / 1000.0 - 1.0) <= 0.01,
          fmt("s = %.3g, %zu probes, sampled %llu vs full scan %llu evaluations, ratio %.2f",
              config.s, st.search->iterations, static_cast<unsigned long long>(sampled),
              static_cast<unsigned long long>(scan), ratio)};
}

// 2. alpha = 0 classifies every hot input as stale.
Outcome alpha_zero_drop() {
  std::size_t cases = 0;
  bool ok = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    fixture::WorldSpec spec;
    spec.seed = seed;
    spec.zipf = 1.0 + 0.1 * static_cast<double>(seed);
    const fixture::World w = fixture::make_world(spec);
    ClassifierConfig cfg;
    cfg.alpha = 0;
    StalenessEvaluator ev(w.store, w.hot, cfg);
    for (const double T : {0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0, 100.0}) {
      const Partition p = classify_inputs(w.data, w.partition.hot, ev.varying_flags(T), w.hot, cfg);
      ok = ok && p.drop_percentage == 1.0 && p.stale_indices.size() == w.partition.hot.size();
      ++cases;
    }
  }
  return {ok, fmt("%zu dataset/threshold pairs, drop = 100%% in %s", cases, ok ? "all" : "not all")};
}

// 3. Coverage of the interval on the dropped-input count.
Outcome ci_calibration() {
  fixture::WorldSpec spec;
  spec.n_inputs = 100'000;
  spec.table_size = 400;
  spec.lambda = 1e-9;  // every touched row is hot, so every input is hot
  spec.seed = 17;
  const fixture::World w = fixture::make_world(spec);
  if (w.partition.hot.size() != 100'000) {
    return {false, fmt("population has %zu hot inputs, expected 100000", w.partition.hot.size())};
  }
  ClassifierConfig cfg;
  cfg.alpha = 2;
  StalenessEvaluator ev(w.store, w.hot, cfg);
  const double T = 0.01;
  const Partition truth = classify_inputs(w.data, w.partition.hot, ev.varying_flags(T), w.hot, cfg);
  const double full_count = static_cast<double>(truth.stale_indices.size());
  const double t = TCriticalTable{}.at(0.999);
  int covered = 0;
  for (std::uint64_t trial = 0; trial < 200; ++trial) {
    const SampleSet sample = sample_hot_inputs(w.partition.hot, 0.001, derive_seed(99, "trial", trial));
    const DropEstimate est = estimate_drop_fraction(sample, w.data, ev, T, cfg.alpha, t);
    covered += est.ci_low <= full_count && full_count <= est.ci_high;
  }
  return {covered >= 198, fmt("|I_hot| = 100000, full-scan D = %.4f, covered in %d/200 trials",
                              truth.drop_percentage, covered)};
}

// 4. Realized full-scan drop vs the sampled estimate and the target.
Outcome drop_band() {
  const RunResult& r = workload.slipstream_run();
  if (!r.state.search) return {false, "no threshold search ran"};
  const TrainerConfig config;
  const double sampled = r.state.search->estimate.D;
  const double full = r.summary.drop_percentage;
  const double target = config.search.target;
  const bool ok = std::abs(full - sampled) <= 0.10 && std::abs(full - target) <= config.search.tolerance;
  return {ok, fmt("alpha = %zu, T = %.6g, sampled D = %.4f (m = %zu), full-scan D = %.4f, target %.2f +/- %.2f",
                  config.alpha, r.summary.threshold, sampled, r.state.search->estimate.m, full, target,
                  config.search.tolerance)};
}

// 5. Accuracy with skipping vs the baseline on the same seed.
Outcome accuracy_preservation() {
  const RunResult& slip = workload.slipstream_run();
  const RunResult& base = workload.baseline_run();
  const double delta = slip.summary.final_test.accuracy - base.summary.final_test.accuracy;
  const double drop = slip.summary.drop_percentage;
  const bool ok = std::abs(delta) <= 0.005 && drop >= 0.20 && slip.summary.inputs_skipped > 0;
  return {ok, fmt("%zu train inputs, baseline %.4f, slipstream %.4f (delta %+.2f pts), %.1f%% of hot inputs skipped",
                  workload.train().size(), base.summary.final_test.accuracy,
                  slip.summary.final_test.accuracy, 100.0 * delta, 100.0 * drop)};
}

// 6. LayerNorm on vs off, mean final AUC over five seeds.
Outcome layer_norm_ablation() {
  double with_ln = 0.0;
  double without_ln = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrainerConfig c;
    c.seed = seed;
    c.layer_norm_enabled = true;
    with_ln += run_slipstream(c, workload.train(), workload.test()).summary.final_test.auc.value_or(0.0);
    c.layer_norm_enabled = false;
    without_ln += run_slipstream(c, workload.train(), workload.test()).summary.final_test.auc.value_or(0.0);
  }
  with_ln /= 5.0;
  without_ln /= 5.0;
  return {with_ln >= without_ln,
          fmt("mean AUC with LayerNorm %.5f, without %.5f", with_ln, without_ln)};
}

// 7. Backprop vs double-precision central differences on random toy nets.
Outcome gradient_check() {
  Rng rng(2024);
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  for (int net = 0; net < 100; ++net) {
    MlpSpec spec;
    const std::size_t depth = 2 + rng.below(3);
    for (std::size_t l = 0; l < depth; ++l) spec.layer_widths.push_back(1 + rng.below(8));
    spec.activation = rng.bernoulli(0.5) ? Activation::kSigmoidOnLast : Activation::kRelu;
    MlpParams p = init_mlp(spec, rng);
    for (auto& b : p.biases) {
      for (float& v : b) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    }
    std::vector<float> x(spec.input_width());
    for (float& v : x) v = static_cast<float>(rng.uniform(-1, 1));

    const MlpForward fwd = mlp_forward(spec, p, x);
    const MlpGrads g = mlp_backward(fwd.tape, p, std::vector<float>(spec.output_width(), 1.0f));

    oracle::Mlp m = oracle::to_double(spec, p);
    const oracle::Vec xd(x.begin(), x.end());
    std::vector<oracle::Vec> pre0;
    oracle::mlp_forward(m, xd, &pre0);
    auto objective = [&](std::vector<oracle::Vec>* pre) {
      double s = 0.0;
      for (double v : oracle::mlp_forward(m, xd, pre)) s += v;
      return s;
    };
    auto kink = [&](const std::vector<oracle::Vec>& a) {
      for (std::size_t l = 0; l < a.size(); ++l) {
        const bool relu = !(m.sigmoid_last && l + 1 == a.size());
        if (!relu) continue;
        for (std::size_t i = 0; i < a[l].size(); ++i) {
          if ((a[l][i] > 0.0) != (pre0[l][i] > 0.0)) return true;
        }
      }
      return false;
    };
    auto probe = [&](double& slot, double analytic) {
      const double h = 1e-6;
      const double saved = slot;
      std::vector<oracle::Vec> pre_up, pre_down;
      slot = saved + h;
      const double up = objective(&pre_up);
      slot = saved - h;
      const double down = objective(&pre_down);
      slot = saved;
      if (kink(pre_up) || kink(pre_down)) {
        ++skipped;
        return;
      }
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
      ++checked;
    };
    for (std::size_t l = 0; l < m.w.size(); ++l) {
      for (std::size_t r = 0; r < m.w[l].size(); ++r) {
        for (std::size_t c = 0; c < m.w[l][r].size(); ++c) probe(m.w[l][r][c], g.weights[l](r, c));
        probe(m.b[l][r], g.biases[l][r]);
      }
    }
  }
  return {worst < 1e-3 && checked > 0,
          fmt("100 nets, %zu parameters checked (%zu at ReLU kinks skipped), max relative error %.3g",
              checked, skipped, worst)};
}

// 8. Library results against brute-force oracles on small instances.
Outcome oracle_equivalence() {
  std::vector<std::string> failures;
  // hot/cold input partition
  for (const double lambda : {1e-5, 1e-4, 1e-3, 5e-3}) {
    SyntheticSpec spec;
    spec.n_inputs = 10'000;
    spec.schema = DatasetSchema{2, 4, {300, 500, 800, 1000}, true};
    spec.zipf_exponents = {1.1};
    spec.seed = 5;
    const Dataset d = gen_synthetic(spec);
    AccessProfile profile(spec.schema.table_sizes, lambda);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto s = d.sparse(i);
      for (std::size_t j = 0; j < s.size(); ++j) profile.record(j, s[j]);
    }
    const EmbeddingBag bag(spec.schema.table_sizes, 2);
    const HotTable hot = freeze_hot_table(bag, classify_hot(profile));
    const DatasetPartition part = partition_inputs(d, hot);
    const auto [h, c] = oracle::split_inputs(d, oracle::hot_rows(d, lambda));
    if (part.hot != h || part.cold != c) failures.push_back(fmt("input partition at lambda %g", lambda));
  }
  // classifier partition and the s = 1 estimate
  fixture::WorldSpec ws;
  ws.n_inputs = 10'000;
  ws.table_size = 100;
  ws.lambda = 1e-4;
  const fixture::World w = fixture::make_world(ws);
  ClassifierConfig cfg;
  StalenessEvaluator ev(w.store, w.hot, cfg);
  const SampleSet all = sample_hot_inputs(w.partition.hot, 1.0, 1);
  for (const double T : {1e-4, 1e-3, 1e-2, 0.05, 0.2, 1.0}) {
    for (std::size_t alpha = 0; alpha <= 4; ++alpha) {
      cfg.alpha = alpha;
      const Partition p = classify_inputs(w.data, w.partition.hot, ev.varying_flags(T), w.hot, cfg);
      const auto expect = oracle::stale_inputs(w.data, w.partition.hot, w.before, w.after, T, alpha);
      if (p.stale_indices != expect) failures.push_back(fmt("classifier at T %g alpha %zu", T, alpha));
      const double D = estimate_drop_fraction(all, w.data, ev, T, alpha, 3.340).D;
      if (D != static_cast<double>(expect.size()) / static_cast<double>(w.partition.hot.size())) {
        failures.push_back(fmt("s = 1 estimate at T %g alpha %zu", T, alpha));
      }
    }
  }
  // AUC, with ties
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 500 + rng.below(4500);
    std::vector<float> s(n);
    std::vector<int> y(n);
    const double levels = trial % 2 == 0 ? 20.0 : 1e6;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<float>(std::floor(rng.uniform() * levels) / levels);
      y[i] = rng.bernoulli(0.3);
    }
    const auto a = auc(s, y);
    if (!a || *a != oracle::auc_pairs(s, y)) failures.push_back(fmt("AUC trial %d", trial));
  }
  if (!failures.empty()) return {false, "mismatch: " + failures.front()};
  return {true, "input partition (4 lambdas), classifier and s = 1 estimate (30 T/alpha pairs), AUC (10 sets) all exact"};
}

template <typename T>
bool is_subset(const std::vector<T>& small, const std::vector<T>& big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

// 9. Monotone responses to T, alpha and lambda over 20-point sweeps.
Outcome monotonicity() {
  std::vector<std::string> failures;
  fixture::WorldSpec ws;
  ws.n_inputs = 10'000;
  ws.n_sparse = 20;
  ws.table_size = 60;
  ws.lambda = 1e-6;
  const fixture::World w = fixture::make_world(ws);
  ClassifierConfig cfg;
  StalenessEvaluator ev(w.store, w.hot, cfg);

  const SampleSet sample = sample_hot_inputs(w.partition.hot, 0.2, 3);
  double prev_d = -1.0;
  std::vector<std::uint32_t> prev_stale;
  cfg.alpha = 5;
  for (int k = 0; k < 20; ++k) {
    const double T = 1e-4 * std::pow(10.0, 4.0 * k / 19.0);
    const double D = estimate_drop_fraction(sample, w.data, ev, T, cfg.alpha, 3.340).D;
    if (D < prev_d) failures.push_back(fmt("sampled D fell at T %g", T));
    prev_d = D;
    const auto stale =
        classify_inputs(w.data, w.partition.hot, ev.varying_flags(T), w.hot, cfg).stale_indices;
    if (!is_subset(prev_stale, stale)) failures.push_back(fmt("stale set shrank at T %g", T));
    prev_stale = stale;
  }

  const auto flags = ev.varying_flags(0.05);
  std::optional<std::vector<std::uint32_t>> prev_alpha;
  for (std::size_t alpha = 0; alpha < 20; ++alpha) {
    cfg.alpha = alpha;
    const auto stale = classify_inputs(w.data, w.partition.hot, flags, w.hot, cfg).stale_indices;
    if (prev_alpha && !is_subset(stale, *prev_alpha)) failures.push_back(fmt("stale set grew at alpha %zu", alpha));
    prev_alpha = stale;
  }

  AccessProfile profile(w.data.schema().table_sizes, 1e-6);
  for (std::size_t i = 0; i < w.data.size(); ++i) {
    const auto s = w.data.sparse(i);
    for (std::size_t j = 0; j < s.size(); ++j) profile.record(j, s[j]);
  }
  std::optional<HotFlags> prev_flags;
  for (int k = 0; k < 20; ++k) {
    const double lambda = 1e-6 * std::pow(10.0, 4.0 * k / 19.0);
    const HotFlags f = classify_hot(profile, lambda);
    if (prev_flags) {
      for (std::size_t t = 0; t < f.size(); ++t) {
        for (std::size_t r = 0; r < f[t].size(); ++r) {
          if (f[t][r] > (*prev_flags)[t][r]) failures.push_back(fmt("hot set grew at lambda %g", lambda));
        }
      }
    }
    prev_flags = f;
  }
  if (!failures.empty()) return {false, failures.front()};
  return {true, "D in T, stale set in T and alpha, hot set in lambda: 20-point sweeps all monotone"};
}

// 10. Two identical cmd_train runs write identical metrics.jsonl.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "slipstream_acceptance_determinism";
  fs::remove_all(root);
  RunConfig cfg = parse_run_config(nlohmann::json{{"dataset", {{"source", "synthetic"}}}});
  TrainOptions a;
  a.out = root / "a";
  TrainOptions b;
  b.out = root / "b";
  cmd_train(cfg, a);
  cmd_train(cfg, b);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string x = slurp(root / "a" / "metrics.jsonl");
  const std::string y = slurp(root / "b" / "metrics.jsonl");
  fs::remove_all(root);
  return {!x.empty() && x == y, fmt("metrics.jsonl %zu bytes, %s", x.size(), x == y ? "byte-identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  app.add_option("criteria", only, "Criterion numbers to run (default: all)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks{
      {"sampling work ratio", sampling_work_ratio},
      {"alpha = 0 drops every hot input", alpha_zero_drop},
      {"confidence interval calibration", ci_calibration},
      {"drop band", drop_band},
      {"accuracy preservation", accuracy_preservation},
      {"LayerNorm ablation", layer_norm_ablation},
      {"gradient correctness", gradient_check},
      {"oracle equivalence", oracle_equivalence},
      {"monotonicity", monotonicity},
      {"determinism", determinism},
  };

  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, checks[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
