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

#include "slipstream/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "slipstream/error.hpp"

static_assert(std::is_same_v<std::size_t, std::uint64_t>,
              "config readers assume a 64-bit size_t");

namespace slipstream {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Parsed documents store positive integers as unsigned, documents built in
// code as signed; both are fine when non-negative.
bool non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Reads typed fields out of one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError("config '" + name("") + "': expected an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  void get(const std::string& key, double& out) {
    if (!take(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    out = v.get<double>();
  }

  void get(const std::string& key, std::uint64_t& out) {
    if (!take(key)) return;
    const json& v = obj_.at(key);
    if (!non_negative_integer(v)) fail(key, "expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }

  void get(const std::string& key, int& out) {
    if (!take(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    out = v.get<int>();
  }

  void get(const std::string& key, bool& out) {
    if (!take(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    out = v.get<bool>();
  }

  void get(const std::string& key, std::string& out) {
    if (!take(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_string()) fail(key, "expected a string");
    out = v.get<std::string>();
  }

  void get(const std::string& key, std::vector<std::size_t>& out) {
    if (!take(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_array()) fail(key, "expected an array of non-negative integers");
    out.clear();
    for (const auto& e : v) {
      if (!non_negative_integer(e)) fail(key, "expected an array of non-negative integers");
      out.push_back(e.get<std::size_t>());
    }
  }

  // A single number or an array of numbers.
  void get(const std::string& key, std::vector<double>& out) {
    if (!take(key)) return;
    const json& v = obj_.at(key);
    out.clear();
    if (v.is_number()) {
      out.push_back(v.get<double>());
      return;
    }
    if (!v.is_array()) fail(key, "expected a number or an array of numbers");
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "expected a number or an array of numbers");
      out.push_back(e.get<double>());
    }
  }

  // Call once every known key has been read.
  void finish() const {
    for (const auto& item : obj_.items()) {
      if (!seen_.contains(item.key())) {
        throw ConfigError("unknown config key '" + name(item.key()) + "'");
      }
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    throw ConfigError("config '" + name(key) + "': " + why);
  }

  std::string name(const std::string& key) const {
    if (prefix_.empty()) return key;
    return key.empty() ? prefix_ : prefix_ + "." + key;
  }

 private:
  bool take(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }

  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

// table_sizes wins over a uniform table_size.
void read_tables(Fields& f, DatasetSchema& schema) {
  const bool explicit_count = f.has("n_sparse");
  f.get("n_dense", schema.n_dense);
  f.get("n_sparse", schema.n_sparse);
  std::size_t uniform = schema.table_sizes.empty() ? 1 : schema.table_sizes.front();
  f.get("table_size", uniform);
  if (f.has("table_sizes")) {
    f.get("table_sizes", schema.table_sizes);
    if (!explicit_count) schema.n_sparse = schema.table_sizes.size();
  } else {
    schema.table_sizes.assign(schema.n_sparse, uniform);
  }
}

void read_dataset(const json& doc, DatasetConfig& ds) {
  Fields f(doc, "dataset");
  std::string source;
  f.get("source", source);
  if (source == "synthetic") {
    ds.source = DatasetSource::kSynthetic;
    SyntheticSpec& s = ds.synthetic;
    f.get("n_inputs", s.n_inputs);
    read_tables(f, s.schema);
    f.get("zipf_exponent", s.zipf_exponents);
    f.get("teacher_scale", s.teacher_scale);
    f.get("teacher_bias", s.teacher_bias);
    f.get("noise_rate", s.noise_rate);
    f.get("seed", s.seed);
  } else if (source == "criteo") {
    ds.source = DatasetSource::kCriteo;
    std::string path;
    f.get("path", path);
    ds.path = path;
    read_tables(f, ds.criteo_schema);
    f.get("has_label", ds.criteo_schema.has_label);
    f.get("limit", ds.limit);
  } else if (source == "cache") {
    ds.source = DatasetSource::kCache;
    std::string path;
    f.get("path", path);
    ds.path = path;
  } else if (source.empty()) {
    f.fail("source", "required; one of synthetic, criteo, cache");
  } else {
    f.fail("source", "unknown source '" + source + "'; expected synthetic, criteo or cache");
  }
  f.finish();
}

void read_model(const json& doc, TrainerConfig& t) {
  Fields f(doc, "model");
  f.get("dim", t.dim);
  f.get("bottom_hidden", t.bottom_hidden);
  f.get("top_hidden", t.top_hidden);
  f.get("layer_norm", t.layer_norm_enabled);
  f.get("layer_norm_eps", t.layer_norm_eps);
  f.finish();
}

void read_search(const json& doc, SearchConfig& s) {
  Fields f(doc, "search");
  f.get("target", s.target);
  f.get("T_lo", s.T_lo);
  f.get("T_hi", s.T_hi);
  f.get("tolerance", s.tolerance);
  f.get("max_iters", s.max_iters);
  f.get("resolution", s.resolution);
  f.get("confidence", s.confidence);
  f.get("early_stop", s.early_stop);
  f.finish();
}

void read_t_table(const json& doc, TCriticalTable& table) {
  if (!doc.is_object()) throw ConfigError("config 't_critical': expected an object");
  for (const auto& item : doc.items()) {
    double level = 0.0;
    std::istringstream in(item.key());
    if (!(in >> level) || !(level > 0.0 && level < 1.0)) {
      throw ConfigError("config 't_critical': key '" + item.key() +
                        "' is not a confidence level in (0, 1)");
    }
    if (!item.value().is_number() || !(item.value().get<double>() > 0.0)) {
      throw ConfigError("config 't_critical." + item.key() + "': expected a positive number");
    }
    table.set(level, item.value().get<double>());
  }
}

// The schema the trainer will see, when it is known before loading.
DatasetSchema schema_hint(const RunConfig& cfg) {
  switch (cfg.dataset.source) {
    case DatasetSource::kSynthetic: return cfg.dataset.synthetic.schema;
    case DatasetSource::kCriteo: return cfg.dataset.criteo_schema;
    case DatasetSource::kCache: break;
  }
  // Checked again against the real schema once the cache is read.
  const std::size_t k = std::max<std::size_t>(cfg.trainer.alpha, 1);
  return DatasetSchema{1, k, std::vector<std::size_t>(k, 1), true};
}

const char* source_name(DatasetSource s) {
  switch (s) {
    case DatasetSource::kSynthetic: return "synthetic";
    case DatasetSource::kCriteo: return "criteo";
    case DatasetSource::kCache: return "cache";
  }
  return "?";
}

}  // namespace

PredicateMode parse_predicate(std::string_view name) {
  if (name == "row_norm") return PredicateMode::kRowNorm;
  if (name == "per_element") return PredicateMode::kPerElement;
  throw ConfigError("predicate '" + std::string(name) + "': expected row_norm or per_element");
}

PairMode parse_pair_mode(std::string_view name) {
  if (name == "last") return PairMode::kLastPair;
  if (name == "any") return PairMode::kAnyPair;
  throw ConfigError("pair_mode '" + std::string(name) + "': expected last or any");
}

void RunConfig::validate() const {
  if (schema_version != kConfigSchemaVersion) {
    throw ConfigError("config 'schema_version': this build reads version " +
                      std::to_string(kConfigSchemaVersion) + ", got " +
                      std::to_string(schema_version));
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("config 'test_fraction': must lie in (0, 1)");
  }
  if (mode != "baseline" && mode != "slipstream") {
    throw ConfigError("config 'mode': expected baseline or slipstream, got '" + mode + "'");
  }
  for (const double l : lambda_sweep) {
    if (!(l > 0.0 && l < 1.0)) throw ConfigError("config 'lambda_sweep': values must lie in (0, 1)");
  }
  try {
    switch (dataset.source) {
      case DatasetSource::kSynthetic: dataset.synthetic.validate(); break;
      case DatasetSource::kCriteo:
        dataset.criteo_schema.validate();
        if (dataset.path.empty()) throw ConfigError("'path' is required for criteo input");
        break;
      case DatasetSource::kCache:
        if (dataset.path.empty()) throw ConfigError("'path' is required for cache input");
        break;
    }
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config 'dataset': ") + e.what());
  }
  trainer.validate(schema_hint(*this));
}

RunConfig parse_run_config(const json& doc) {
  RunConfig cfg;
  Fields f(doc, "");
  f.get("schema_version", cfg.schema_version);
  if (!f.has("dataset")) f.fail("dataset", "required; give at least {\"source\": ...}");
  read_dataset(f.raw("dataset"), cfg.dataset);
  f.get("test_fraction", cfg.test_fraction);
  f.get("mode", cfg.mode);
  std::string out = cfg.out.string();
  f.get("out", out);
  cfg.out = out;
  f.get("lambda_sweep", cfg.lambda_sweep);

  TrainerConfig& t = cfg.trainer;
  if (f.has("model")) read_model(f.raw("model"), t);
  f.get("lambda", t.lambda);
  f.get("warmup_fraction", t.warmup_fraction);
  f.get("warmup_min_iterations", t.warmup_min_iterations);
  f.get("N", t.snapshots);
  std::string pair = "last";
  f.get("pair_mode", pair);
  t.pair_mode = parse_pair_mode(pair);
  f.get("s", t.s);
  f.get("alpha", t.alpha);
  std::string predicate = "row_norm";
  f.get("predicate", predicate);
  t.predicate = parse_predicate(predicate);
  // null or absent T means "search for it"
  const bool fixed = f.has("T") && !doc.at("T").is_null();
  double T = 0.0;
  f.get("T", T);
  if (fixed) t.fixed_threshold = T;
  f.get("alpha_elems", t.alpha_elems);
  if (f.has("search")) read_search(f.raw("search"), t.search);
  if (f.has("t_critical")) read_t_table(f.raw("t_critical"), t.t_table);
  f.get("skipping", t.skipping_enabled);
  f.get("lr", t.lr);
  f.get("batch_size", t.batch_size);
  f.get("total_iterations", t.total_iterations);
  f.get("eval_interval", t.eval_interval);
  f.get("seed", t.seed);
  f.finish();

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

ordered_json to_json(const RunConfig& cfg) {
  const TrainerConfig& t = cfg.trainer;
  ordered_json j;
  j["schema_version"] = cfg.schema_version;

  ordered_json ds;
  ds["source"] = source_name(cfg.dataset.source);
  auto tables = [&ds](const DatasetSchema& schema) {
    ds["n_dense"] = schema.n_dense;
    ds["n_sparse"] = schema.n_sparse;
    ds["table_sizes"] = schema.table_sizes;
  };
  switch (cfg.dataset.source) {
    case DatasetSource::kSynthetic: {
      const SyntheticSpec& s = cfg.dataset.synthetic;
      ds["n_inputs"] = s.n_inputs;
      tables(s.schema);
      ds["zipf_exponent"] = s.zipf_exponents;
      ds["teacher_scale"] = s.teacher_scale;
      ds["teacher_bias"] = s.teacher_bias;
      ds["noise_rate"] = s.noise_rate;
      ds["seed"] = s.seed;
      break;
    }
    case DatasetSource::kCriteo:
      ds["path"] = cfg.dataset.path.string();
      tables(cfg.dataset.criteo_schema);
      ds["has_label"] = cfg.dataset.criteo_schema.has_label;
      ds["limit"] = cfg.dataset.limit;
      break;
    case DatasetSource::kCache:
      ds["path"] = cfg.dataset.path.string();
      break;
  }
  j["dataset"] = ds;
  j["test_fraction"] = cfg.test_fraction;
  j["mode"] = cfg.mode;
  j["out"] = cfg.out.string();
  j["lambda_sweep"] = cfg.lambda_sweep;
  j["model"] = {{"dim", t.dim},
                {"bottom_hidden", t.bottom_hidden},
                {"top_hidden", t.top_hidden},
                {"layer_norm", t.layer_norm_enabled},
                {"layer_norm_eps", t.layer_norm_eps}};
  j["lambda"] = t.lambda;
  j["warmup_fraction"] = t.warmup_fraction;
  j["warmup_min_iterations"] = t.warmup_min_iterations;
  j["N"] = t.snapshots;
  j["pair_mode"] = t.pair_mode == PairMode::kLastPair ? "last" : "any";
  j["s"] = t.s;
  j["alpha"] = t.alpha;
  j["predicate"] = t.predicate == PredicateMode::kRowNorm ? "row_norm" : "per_element";
  j["T"] = t.fixed_threshold ? ordered_json(*t.fixed_threshold) : ordered_json(nullptr);
  j["alpha_elems"] = t.alpha_elems;
  j["search"] = {{"target", t.search.target},
                 {"T_lo", t.search.T_lo},
                 {"T_hi", t.search.T_hi},
                 {"tolerance", t.search.tolerance},
                 {"max_iters", t.search.max_iters},
                 {"resolution", t.search.resolution},
                 {"confidence", t.search.confidence},
                 {"early_stop", t.search.early_stop}};
  ordered_json tc = ordered_json::object();
  for (const auto& [level, value] : t.t_table.entries()) {
    std::ostringstream key;
    key << level;
    tc[key.str()] = value;
  }
  j["t_critical"] = tc;
  j["skipping"] = t.skipping_enabled;
  j["lr"] = t.lr;
  j["batch_size"] = t.batch_size;
  j["total_iterations"] = t.total_iterations;
  j["eval_interval"] = t.eval_interval;
  j["seed"] = t.seed;
  return j;
}

Dataset load_dataset(const DatasetConfig& config) {
  switch (config.source) {
    case DatasetSource::kSynthetic: return gen_synthetic(config.synthetic);
    case DatasetSource::kCriteo: return load_criteo(config.path, config.criteo_schema, config.limit);
    case DatasetSource::kCache: return read_dataset_cache(config.path);
  }
  throw ConfigError("unknown dataset source");
}

}  // namespace slipstream
