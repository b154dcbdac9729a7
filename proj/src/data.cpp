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

#include "slipstream/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "slipstream/error.hpp"

namespace slipstream {

static_assert(std::endian::native == std::endian::little,
              "the dataset cache assumes a little-endian host");

namespace {

constexpr char kCacheMagic[8] = {'S', 'L', 'P', 'D', 'S', 'E', 'T', '1'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void put(std::string& buf, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("truncated dataset cache " + path.string());
  return value;
}

std::string encode_header(const Dataset& d) {
  std::string buf(kCacheMagic, sizeof(kCacheMagic));
  put<std::uint32_t>(buf, kCacheVersion);
  put<std::uint32_t>(buf, d.schema().has_label ? 1 : 0);
  put<std::uint64_t>(buf, d.size());
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(d.schema().n_dense));
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(d.schema().n_sparse));
  for (const std::size_t m : d.schema().table_sizes) put<std::uint64_t>(buf, m);
  return buf;
}

void encode_record(std::string& buf, const InputView& v) {
  put<std::uint8_t>(buf, static_cast<std::uint8_t>(v.label));
  for (const float x : v.dense) put<float>(buf, x);
  for (const std::uint32_t s : v.sparse) put<std::uint32_t>(buf, s);
}

}  // namespace

void DatasetSchema::validate() const {
  if (table_sizes.size() != n_sparse) {
    throw ConfigError("schema lists " + std::to_string(table_sizes.size()) +
                      " table sizes for " + std::to_string(n_sparse) + " sparse features");
  }
  for (std::size_t j = 0; j < table_sizes.size(); ++j) {
    if (table_sizes[j] == 0) throw ConfigError("table " + std::to_string(j) + " has size 0");
    if (table_sizes[j] > std::numeric_limits<std::uint32_t>::max()) {
      throw ConfigError("table " + std::to_string(j) + " exceeds 2^32 rows");
    }
  }
}

Dataset::Dataset(DatasetSchema schema) : schema_(std::move(schema)) { schema_.validate(); }

void Dataset::reserve(std::size_t n) {
  labels_.reserve(n);
  dense_.reserve(n * schema_.n_dense);
  sparse_.reserve(n * schema_.n_sparse);
}

void Dataset::push_back(const InputRecord& record) {
  if (record.dense.size() != schema_.n_dense || record.sparse.size() != schema_.n_sparse) {
    throw ShapeError("record has " + std::to_string(record.dense.size()) + " dense / " +
                     std::to_string(record.sparse.size()) + " sparse fields, schema wants " +
                     std::to_string(schema_.n_dense) + " / " +
                     std::to_string(schema_.n_sparse));
  }
  for (std::size_t j = 0; j < record.sparse.size(); ++j) {
    if (record.sparse[j] >= schema_.table_sizes[j]) {
      throw RangeError("sparse index " + std::to_string(record.sparse[j]) +
                       " out of range for table " + std::to_string(j));
    }
  }
  labels_.push_back(static_cast<std::uint8_t>(record.label != 0));
  dense_.insert(dense_.end(), record.dense.begin(), record.dense.end());
  sparse_.insert(sparse_.end(), record.sparse.begin(), record.sparse.end());
}

InputView Dataset::view(std::size_t i) const {
  if (i >= size()) throw RangeError("input " + std::to_string(i) + " out of range");
  return InputView{labels_[i],
                   {dense_.data() + i * schema_.n_dense, schema_.n_dense},
                   {sparse_.data() + i * schema_.n_sparse, schema_.n_sparse}};
}

InputRecord Dataset::record(std::size_t i) const {
  const InputView v = view(i);
  return InputRecord{v.label, {v.dense.begin(), v.dense.end()},
                     {v.sparse.begin(), v.sparse.end()}};
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw RangeError("dataset slice out of range");
  Dataset out(schema_);
  out.labels_.assign(labels_.begin() + begin, labels_.begin() + end);
  out.dense_.assign(dense_.begin() + begin * schema_.n_dense,
                    dense_.begin() + end * schema_.n_dense);
  out.sparse_.assign(sparse_.begin() + begin * schema_.n_sparse,
                     sparse_.begin() + end * schema_.n_sparse);
  return out;
}

std::uint64_t Dataset::fingerprint() const {
  std::uint64_t h = fnv1a64(encode_header(*this));
  std::string buf;
  for (std::size_t i = 0; i < size(); ++i) {
    buf.clear();
    encode_record(buf, view(i));
    for (const char c : buf) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::uint32_t hash_category(std::string_view field, std::size_t table_size) {
  return static_cast<std::uint32_t>(fnv1a64(field) % table_size);
}

InputRecord parse_criteo_line(std::string_view line, const DatasetSchema& schema,
                              std::size_t line_number) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  const std::size_t expected = (schema.has_label ? 1 : 0) + schema.n_dense + schema.n_sparse;
  std::vector<std::string_view> fields;
  fields.reserve(expected);
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? line.npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  if (fields.size() != expected) {
    throw ParseError("expected " + std::to_string(expected) + " tab-separated fields, found " +
                     std::to_string(fields.size()),
                     line_number);
  }

  InputRecord rec;
  std::size_t f = 0;
  if (schema.has_label) {
    const auto lab = fields[f++];
    if (lab != "0" && lab != "1") {
      throw ParseError("label must be 0 or 1, got '" + std::string(lab) + "'", line_number);
    }
    rec.label = lab == "1" ? 1 : 0;
  }
  rec.dense.resize(schema.n_dense, 0.0f);
  for (std::size_t j = 0; j < schema.n_dense; ++j) {
    const auto field = fields[f++];
    if (field.empty()) continue;
    long long x = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), x);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      throw ParseError("dense field " + std::to_string(j) + " is not an integer: '" +
                       std::string(field) + "'",
                       line_number);
    }
    rec.dense[j] = static_cast<float>(std::log1p(static_cast<double>(std::max(x, 0LL))));
  }
  rec.sparse.resize(schema.n_sparse, 0);
  for (std::size_t j = 0; j < schema.n_sparse; ++j) {
    const auto field = fields[f++];
    if (field.empty()) continue;
    const bool hex = std::all_of(field.begin(), field.end(),
                                 [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
    if (!hex) {
      throw ParseError("sparse field " + std::to_string(j) + " is not hexadecimal: '" +
                       std::string(field) + "'",
                       line_number);
    }
    rec.sparse[j] = hash_category(field, schema.table_sizes[j]);
  }
  return rec;
}

Dataset load_criteo(const std::filesystem::path& path, const DatasetSchema& schema,
                    std::size_t limit) {
  schema.validate();
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw IoError("cannot open " + path.string());
  struct Closer {
    gzFile f;
    ~Closer() { gzclose(f); }
  } closer{file};

  Dataset ds(schema);
  std::string line;
  std::vector<char> chunk(1 << 16);
  std::size_t line_number = 0;
  while (limit == 0 || ds.size() < limit) {
    line.clear();
    bool got = false;
    while (gzgets(file, chunk.data(), static_cast<int>(chunk.size())) != nullptr) {
      got = true;
      line.append(chunk.data());
      if (!line.empty() && line.back() == '\n') break;
    }
    if (!got) break;
    ++line_number;
    if (line == "\n" || line.empty()) continue;
    ds.push_back(parse_criteo_line(line, schema, line_number));
  }
  int err = 0;
  gzerror(file, &err);
  if (err != Z_OK && err != Z_STREAM_END) throw IoError("read error in " + path.string());
  return ds;
}

void write_dataset_cache(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  std::string buf = encode_header(dataset);
  constexpr std::size_t kFlush = 1 << 20;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    encode_record(buf, dataset.view(i));
    if (buf.size() >= kFlush) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset read_dataset_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset cache " + path.string());
  char magic[sizeof(kCacheMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0) {
    throw IoError(path.string() + " is not a dataset cache");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCacheVersion) {
    throw IoError("unsupported dataset cache version " + std::to_string(version));
  }
  DatasetSchema schema;
  schema.has_label = get<std::uint32_t>(in, path) != 0;
  const auto n = get<std::uint64_t>(in, path);
  schema.n_dense = get<std::uint32_t>(in, path);
  schema.n_sparse = get<std::uint32_t>(in, path);
  for (std::size_t j = 0; j < schema.n_sparse; ++j) {
    schema.table_sizes.push_back(get<std::uint64_t>(in, path));
  }
  Dataset ds(schema);
  ds.labels_.resize(n);
  ds.dense_.resize(n * schema.n_dense);
  ds.sparse_.resize(n * schema.n_sparse);
  const std::size_t width = 1 + 4 * schema.n_dense + 4 * schema.n_sparse;
  std::vector<char> rec(width);
  for (std::size_t i = 0; i < n; ++i) {
    in.read(rec.data(), static_cast<std::streamsize>(width));
    if (!in) throw IoError("truncated dataset cache " + path.string());
    ds.labels_[i] = static_cast<std::uint8_t>(rec[0]);
    std::memcpy(ds.dense_.data() + i * schema.n_dense, rec.data() + 1, 4 * schema.n_dense);
    std::memcpy(ds.sparse_.data() + i * schema.n_sparse, rec.data() + 1 + 4 * schema.n_dense,
                4 * schema.n_sparse);
    for (std::size_t j = 0; j < schema.n_sparse; ++j) {
      if (ds.sparse_[i * schema.n_sparse + j] >= schema.table_sizes[j]) {
        throw IoError("corrupt dataset cache: index out of range in record " + std::to_string(i));
      }
    }
  }
  return ds;
}

ZipfSampler::ZipfSampler(std::size_t m, double exponent) {
  if (m == 0) throw ConfigError("zipf sampler over an empty range");
  if (!(exponent > 0.0)) throw ConfigError("zipf exponent must be > 0");
  cdf_.resize(m);
  double acc = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    acc += std::pow(static_cast<double>(k + 1), -exponent);
    cdf_[k] = acc;
  }
  for (double& c : cdf_) c /= acc;
  cdf_.back() = 1.0;
}

std::size_t ZipfSampler::operator()(Rng& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<std::size_t>(std::min(it - cdf_.begin(),
                                           static_cast<std::ptrdiff_t>(cdf_.size() - 1)));
}

double ZipfSampler::probability(std::size_t rank) const {
  return rank == 0 ? cdf_[0] : cdf_.at(rank) - cdf_[rank - 1];
}

void SyntheticSpec::validate() const {
  schema.validate();
  if (n_inputs == 0) throw ConfigError("synthetic dataset needs n_inputs >= 1");
  if (zipf_exponents.size() != 1 && zipf_exponents.size() != schema.n_sparse) {
    throw ConfigError("zipf_exponent must be a single value or one per sparse feature");
  }
  for (const double e : zipf_exponents) {
    if (!(e > 0.0)) throw ConfigError("zipf_exponent must be > 0");
  }
  if (!(noise_rate >= 0.0 && noise_rate < 0.5)) {
    throw ConfigError("noise_rate must lie in [0, 0.5)");
  }
  if (!(teacher_scale >= 0.0)) throw ConfigError("teacher_scale must be >= 0");
}

void shuffle(std::span<std::uint32_t> values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(values[i - 1], values[j]);
  }
}

Teacher make_teacher(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, "teacher"));
  const double per_term =
      spec.teacher_scale / std::sqrt(static_cast<double>(spec.schema.n_dense + spec.schema.n_sparse));
  Teacher t;
  t.bias = spec.teacher_bias;
  for (std::size_t k = 0; k < spec.schema.n_dense; ++k) {
    t.dense_weights.push_back(per_term * rng.normal());
  }
  for (std::size_t j = 0; j < spec.schema.n_sparse; ++j) {
    const std::size_t m = spec.schema.table_sizes[j];
    std::vector<double> effects(m);
    for (double& e : effects) e = per_term * rng.normal();
    t.row_effects.push_back(std::move(effects));
    std::vector<std::uint32_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0u);
    shuffle(perm, rng);
    t.rank_to_row.push_back(std::move(perm));
  }
  return t;
}

double Teacher::logit(const InputView& input) const {
  double z = bias;
  for (std::size_t k = 0; k < dense_weights.size(); ++k) z += dense_weights[k] * input.dense[k];
  for (std::size_t j = 0; j < row_effects.size(); ++j) z += row_effects[j][input.sparse[j]];
  return z;
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  const Teacher teacher = make_teacher(spec);
  std::vector<ZipfSampler> samplers;
  for (std::size_t j = 0; j < spec.schema.n_sparse; ++j) {
    samplers.emplace_back(spec.schema.table_sizes[j], spec.exponent(j));
  }
  Rng rng(derive_seed(spec.seed, "inputs"));
  Dataset ds(spec.schema);
  ds.reserve(spec.n_inputs);
  InputRecord rec;
  rec.dense.resize(spec.schema.n_dense);
  rec.sparse.resize(spec.schema.n_sparse);
  for (std::size_t i = 0; i < spec.n_inputs; ++i) {
    for (float& x : rec.dense) x = static_cast<float>(rng.normal());
    for (std::size_t j = 0; j < spec.schema.n_sparse; ++j) {
      rec.sparse[j] = teacher.rank_to_row[j][samplers[j](rng)];
    }
    const InputView v{0, rec.dense, rec.sparse};
    const double p = 1.0 / (1.0 + std::exp(-teacher.logit(v)));
    int label = rng.bernoulli(p) ? 1 : 0;
    if (rng.bernoulli(spec.noise_rate)) label = 1 - label;
    rec.label = label;
    ds.push_back(rec);
  }
  return ds;
}

DatasetPartition partition_inputs(const Dataset& dataset, const HotFlags& hot_flags) {
  if (hot_flags.size() != dataset.schema().n_sparse) {
    throw ShapeError("partition_inputs: flags cover " + std::to_string(hot_flags.size()) +
                     " tables, dataset has " + std::to_string(dataset.schema().n_sparse));
  }
  DatasetPartition part;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto sparse = dataset.sparse(i);
    bool all_hot = true;
    for (std::size_t j = 0; j < sparse.size() && all_hot; ++j) {
      all_hot = hot_flags[j][sparse[j]] != 0;
    }
    (all_hot ? part.hot : part.cold).push_back(static_cast<std::uint32_t>(i));
  }
  return part;
}

DatasetPartition partition_inputs(const Dataset& dataset, const HotTable& hot) {
  if (hot.table_count() != dataset.schema().n_sparse) {
    throw ShapeError("partition_inputs: hot table covers a different number of tables");
  }
  DatasetPartition part;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto sparse = dataset.sparse(i);
    bool all_hot = true;
    for (std::size_t j = 0; j < sparse.size() && all_hot; ++j) all_hot = hot.is_hot(j, sparse[j]);
    (all_hot ? part.hot : part.cold).push_back(static_cast<std::uint32_t>(i));
  }
  return part;
}

Minibatcher::Minibatcher(std::size_t n_inputs, std::size_t batch_size, std::uint64_t seed)
    : Minibatcher(
          [n_inputs] {
            std::vector<std::uint32_t> ids(n_inputs);
            std::iota(ids.begin(), ids.end(), 0u);
            return ids;
          }(),
          batch_size, seed) {}

Minibatcher::Minibatcher(std::vector<std::uint32_t> indices, std::size_t batch_size,
                         std::uint64_t seed)
    : indices_(std::move(indices)), batch_size_(batch_size), seed_(seed) {
  if (batch_size_ == 0) throw ConfigError("batch_size must be >= 1");
  if (indices_.empty()) throw DomainError("minibatch stream over no inputs");
}

void Minibatcher::set_drop_mask(std::vector<std::uint8_t> mask) {
  const auto max_id = *std::max_element(indices_.begin(), indices_.end());
  if (mask.size() <= max_id) throw ShapeError("drop mask does not cover every input id");
  mask_ = std::move(mask);
}

void Minibatcher::start_epoch() {
  if (started_) ++epoch_;
  started_ = true;
  order_ = indices_;
  Rng rng(derive_seed(seed_, "epoch", epoch_));
  shuffle(order_, rng);
  cursor_ = 0;
}

void Minibatcher::next(std::vector<std::uint32_t>& batch) {
  batch.clear();
  if (!started_) start_epoch();
  bool fresh_epoch_empty = false;
  while (batch.size() < batch_size_) {
    if (cursor_ == order_.size()) {
      if (!batch.empty()) break;
      if (fresh_epoch_empty) throw DomainError("drop mask removes every input");
      start_epoch();
      fresh_epoch_empty = true;
      continue;
    }
    const std::uint32_t id = order_[cursor_++];
    if (masked(id)) {
      ++skipped_;
      continue;
    }
    batch.push_back(id);
  }
}

std::vector<std::uint32_t> Minibatcher::next() {
  std::vector<std::uint32_t> batch;
  next(batch);
  return batch;
}

std::vector<std::vector<std::uint32_t>> epoch_batches(std::size_t n_inputs,
                                                      std::size_t batch_size,
                                                      std::uint64_t seed, std::uint64_t epoch,
                                                      std::span<const std::uint8_t> mask) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  std::vector<std::uint32_t> order(n_inputs);
  std::iota(order.begin(), order.end(), 0u);
  Rng rng(derive_seed(seed, "epoch", epoch));
  shuffle(order, rng);
  std::vector<std::vector<std::uint32_t>> batches;
  std::vector<std::uint32_t> cur;
  for (const std::uint32_t id : order) {
    if (!mask.empty() && mask[id] != 0) continue;
    cur.push_back(id);
    if (cur.size() == batch_size) batches.push_back(std::exchange(cur, {}));
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  return batches;
}

}  // namespace slipstream
