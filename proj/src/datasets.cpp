// Copyright 2026 The CO3 Authors. All Rights Reserved.
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
// =============================================================================

#include "co3/datasets.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "co3/error.hpp"
#include "co3/rng.hpp"

namespace co3::data {

void Dataset::Validate() const {
  if (dim == 0 || classes < 2) Fail(ErrorCode::kInvalidArgument, "dataset: empty shape");
  for (const Split* s : {&train, &test}) {
    if (s->features.size() != s->rows() * dim) {
      Fail(ErrorCode::kShapeMismatch, "dataset: feature matrix does not match label count");
    }
    for (std::size_t i = 0; i < s->rows(); ++i) {
      if (s->labels[i] < 0 || s->labels[i] >= classes) {
        Fail(ErrorCode::kOutOfRange, "dataset: label out of range at row " + std::to_string(i));
      }
    }
  }
}

Dataset SynthBlobs(const BlobsConfig& config) {
  if (!std::isfinite(config.scale_decades) || config.scale_decades < 0.0 ||
      config.scale_decades > 12.0) {
    Fail(ErrorCode::kInvalidArgument, "synth_blobs: scale_decades must lie in [0, 12]");
  }
  if (config.classes < 2 || config.train + config.test < static_cast<std::size_t>(config.classes) ||
      config.dim == 0) {
    Fail(ErrorCode::kInvalidArgument, "synth_blobs: need n >= K >= 2 and d_in >= 1");
  }
  Rng rng(config.seed);
  const std::size_t k = static_cast<std::size_t>(config.classes);
  std::vector<double> centres(k * config.dim);
  for (double& c : centres) c = config.center_scale * rng.Normal();
  std::vector<double> scales(config.dim, 1.0);
  if (config.scale_decades != 0.0) {
    for (double& s : scales) s = std::pow(10.0, -config.scale_decades * rng.Uniform());
  }

  Dataset ds;
  ds.dim = config.dim;
  ds.classes = config.classes;
  auto fill = [&](Split& s, std::size_t n) {
    s.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.labels[i] = static_cast<int>(i % k);
    rng.Shuffle(s.labels);
    s.features.resize(n * config.dim);
    for (std::size_t i = 0; i < n; ++i) {
      const double* c = centres.data() + static_cast<std::size_t>(s.labels[i]) * config.dim;
      for (std::size_t j = 0; j < config.dim; ++j) {
        s.features[i * config.dim + j] = scales[j] * (c[j] + config.noise * rng.Normal());
      }
    }
  };
  fill(ds.train, config.train);
  fill(ds.test, config.test);
  return ds;
}

Dataset SynthBlobs(std::size_t n, int classes, std::size_t dim, std::uint64_t seed) {
  if (classes < 2 || n < static_cast<std::size_t>(classes)) {
    Fail(ErrorCode::kInvalidArgument, "synth_blobs: need n >= K >= 2");
  }
  BlobsConfig c;
  c.test = n / 6;
  c.train = n - c.test;
  c.classes = classes;
  c.dim = dim;
  c.seed = seed;
  return SynthBlobs(c);
}

std::vector<std::uint8_t> ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Split ParseCifar10Records(std::span<const std::uint8_t> bytes, std::size_t limit,
                          const std::string& origin) {
  if (bytes.size() % kCifarRecordBytes != 0) {
    Fail(ErrorCode::kCorrupt, origin + ": size " + std::to_string(bytes.size()) +
                                  " is not a multiple of the 3073-byte record");
  }
  std::size_t n = bytes.size() / kCifarRecordBytes;
  if (limit > 0) n = std::min(n, limit);
  Split s;
  s.labels.resize(n);
  s.features.resize(n * (kCifarRecordBytes - 1));
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + i * kCifarRecordBytes;
    if (rec[0] > 9) {
      Fail(ErrorCode::kCorrupt, origin + ": label " + std::to_string(rec[0]) + " in record " +
                                    std::to_string(i));
    }
    s.labels[i] = rec[0];
    for (std::size_t j = 1; j < kCifarRecordBytes; ++j) {
      s.features[i * (kCifarRecordBytes - 1) + j - 1] = rec[j] / 255.0;
    }
  }
  return s;
}

namespace {

void Append(Split& into, Split&& from) {
  into.labels.insert(into.labels.end(), from.labels.begin(), from.labels.end());
  into.features.insert(into.features.end(), from.features.begin(), from.features.end());
}

}  // namespace

bool HasCifar10Binary(const std::filesystem::path& dir) {
  std::error_code ec;
  return std::filesystem::exists(dir / "data_batch_1.bin", ec) &&
         std::filesystem::exists(dir / "test_batch.bin", ec);
}

Dataset LoadCifar10Binary(const std::filesystem::path& dir, std::size_t train_limit,
                          std::size_t test_limit) {
  const std::size_t limit = train_limit;
  Dataset ds;
  ds.dim = kCifarRecordBytes - 1;
  ds.classes = 10;
  bool any = false;
  for (int b = 1; b <= 5; ++b) {
    const auto path = dir / ("data_batch_" + std::to_string(b) + ".bin");
    if (!std::filesystem::exists(path)) continue;
    any = true;
    const std::size_t remaining = limit == 0 ? 0 : limit - ds.train.rows();
    if (limit > 0 && remaining == 0) break;
    Append(ds.train, ParseCifar10Records(ReadFile(path), remaining, path.string()));
  }
  if (!any) Fail(ErrorCode::kIo, "no CIFAR-10 training batches in " + dir.string());
  const auto test_path = dir / "test_batch.bin";
  ds.test = ParseCifar10Records(ReadFile(test_path), test_limit, test_path.string());
  return ds;
}

IdxTensor ParseIdx(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < 4) Fail(ErrorCode::kCorrupt, origin + ": missing IDX magic");
  if (bytes[0] != 0 || bytes[1] != 0) Fail(ErrorCode::kCorrupt, origin + ": bad IDX magic");
  if (bytes[2] != 0x08) {
    Fail(ErrorCode::kCorrupt, origin + ": only unsigned-byte IDX payloads are supported");
  }
  const std::size_t ndims = bytes[3];
  if (ndims == 0 || bytes.size() < 4 + 4 * ndims) {
    Fail(ErrorCode::kCorrupt, origin + ": truncated IDX dimension header");
  }
  IdxTensor t;
  std::size_t total = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    const std::uint8_t* p = bytes.data() + 4 + 4 * d;
    const std::size_t dim = (std::size_t{p[0]} << 24) | (std::size_t{p[1]} << 16) |
                            (std::size_t{p[2]} << 8) | std::size_t{p[3]};
    t.dims.push_back(dim);
    total *= dim;
  }
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() != header + total) {
    Fail(ErrorCode::kCorrupt, origin + ": payload holds " + std::to_string(bytes.size() - header) +
                                  " bytes, dimensions require " + std::to_string(total));
  }
  t.values.assign(bytes.begin() + header, bytes.end());
  return t;
}

IdxTensor LoadIdx(const std::filesystem::path& path) {
  return ParseIdx(ReadFile(path), path.string());
}

namespace {

Split IdxSplit(const IdxTensor& images, const IdxTensor& labels, std::size_t dim,
               std::size_t limit, int& classes) {
  const std::size_t n_all = images.dims[0];
  if (labels.dims.size() != 1 || labels.dims[0] != n_all) {
    Fail(ErrorCode::kCorrupt, "idx: label count does not match image count");
  }
  const std::size_t n = limit > 0 ? std::min(n_all, limit) : n_all;
  Split s;
  s.features.resize(n * dim);
  s.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.labels[i] = static_cast<int>(labels.values[i]);
    classes = std::max(classes, s.labels[i] + 1);
    for (std::size_t j = 0; j < dim; ++j) s.features[i * dim + j] = images.values[i * dim + j] / 255.0;
  }
  return s;
}

}  // namespace

Dataset LoadIdxDataset(const std::filesystem::path& dir, std::size_t train_limit,
                       std::size_t test_limit) {
  const auto train_x = LoadIdx(dir / "train-images-idx3-ubyte");
  const auto train_y = LoadIdx(dir / "train-labels-idx1-ubyte");
  const auto test_x = LoadIdx(dir / "t10k-images-idx3-ubyte");
  const auto test_y = LoadIdx(dir / "t10k-labels-idx1-ubyte");
  Dataset ds;
  ds.dim = 1;
  for (std::size_t d = 1; d < train_x.dims.size(); ++d) ds.dim *= train_x.dims[d];
  std::size_t test_dim = 1;
  for (std::size_t d = 1; d < test_x.dims.size(); ++d) test_dim *= test_x.dims[d];
  if (test_dim != ds.dim) Fail(ErrorCode::kCorrupt, "idx: train/test feature dimensions differ");
  ds.train = IdxSplit(train_x, train_y, ds.dim, train_limit, ds.classes);
  ds.test = IdxSplit(test_x, test_y, ds.dim, test_limit, ds.classes);
  ds.classes = std::max(ds.classes, 2);
  ds.Validate();
  return ds;
}

namespace {

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseNumber(const std::string& cell, const std::string& origin, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v)) {
    Fail(ErrorCode::kCorrupt, origin + ":" + std::to_string(line) + ": non-numeric value '" +
                                  cell + "'");
  }
  return v;
}

}  // namespace

Dataset ParseCsv(const std::string& text, const std::string& origin, double test_fraction) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "csv: test fraction must lie in [0, 1)");
  }
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      header = SplitCsvLine(line);
      break;
    }
  }
  if (header.empty()) Fail(ErrorCode::kCorrupt, origin + ": empty file");
  const auto label_it = std::find(header.begin(), header.end(), "label");
  if (label_it == header.end()) Fail(ErrorCode::kCorrupt, origin + ": no 'label' column");
  const auto label_col = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t dim = header.size() - 1;
  if (dim == 0) Fail(ErrorCode::kCorrupt, origin + ": no feature columns");

  std::vector<double> features;
  std::vector<int> labels;
  int classes = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = SplitCsvLine(line);
    if (cells.size() != header.size()) {
      Fail(ErrorCode::kCorrupt, origin + ":" + std::to_string(line_no) + ": expected " +
                                    std::to_string(header.size()) + " columns, got " +
                                    std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double v = ParseNumber(cells[c], origin, line_no);
      if (c == label_col) {
        if (v < 0 || v != std::floor(v) || v > 65535) {
          Fail(ErrorCode::kCorrupt, origin + ":" + std::to_string(line_no) + ": invalid label");
        }
        labels.push_back(static_cast<int>(v));
        classes = std::max(classes, labels.back() + 1);
      } else {
        features.push_back(v);
      }
    }
  }
  if (labels.empty()) Fail(ErrorCode::kCorrupt, origin + ": no data rows");

  const std::size_t n = labels.size();
  for (std::size_t j = 0; j < dim; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += features[i * dim + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = features[i * dim + j] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      double& v = features[i * dim + j];
      v = sd > 0.0 ? (v - mean) / sd : 0.0;
    }
  }

  Dataset ds;
  ds.dim = dim;
  ds.classes = std::max(classes, 2);
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n)));
  const std::size_t n_train = n - n_test;
  ds.train.labels.assign(labels.begin(), labels.begin() + n_train);
  ds.train.features.assign(features.begin(), features.begin() + n_train * dim);
  ds.test.labels.assign(labels.begin() + n_train, labels.end());
  ds.test.features.assign(features.begin() + n_train * dim, features.end());
  return ds;
}

Dataset LoadCsv(const std::filesystem::path& path, double test_fraction) {
  const auto bytes = ReadFile(path);
  return ParseCsv(std::string(bytes.begin(), bytes.end()), path.string(), test_fraction);
}

std::vector<std::vector<std::size_t>> ShardIndices(std::size_t n, std::size_t users,
                                                   std::uint64_t seed) {
  if (users == 0) Fail(ErrorCode::kInvalidArgument, "shard: need at least one user");
  if (n < users) Fail(ErrorCode::kInvalidArgument, "shard: fewer samples than users");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.Shuffle(order);
  std::vector<std::vector<std::size_t>> shards(users);
  const std::size_t base = n / users;
  const std::size_t extra = n % users;
  std::size_t pos = 0;
  for (std::size_t u = 0; u < users; ++u) {
    const std::size_t len = base + (u < extra ? 1 : 0);
    shards[u].assign(order.begin() + pos, order.begin() + pos + len);
    pos += len;
  }
  return shards;
}

}  // namespace co3::data
