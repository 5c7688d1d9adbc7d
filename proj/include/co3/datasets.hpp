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

#ifndef CO3_DATASETS_HPP_
#define CO3_DATASETS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace co3::data {

// Row-major feature matrix with integer labels.
struct Split {
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t rows() const { return labels.size(); }
};

struct Dataset {
  std::size_t dim = 0;
  int classes = 0;
  Split train;
  Split test;

  std::span<const double> Row(const Split& s, std::size_t i) const {
    return {s.features.data() + i * dim, dim};
  }
  // Labels within [0, classes), feature count equals rows * dim.
  void Validate() const;
};

struct BlobsConfig {
  std::size_t train = 5000;
  std::size_t test = 1000;
  int classes = 10;
  std::size_t dim = 32;
  double center_scale = 1.0;  // stdev of the cluster centres
  double noise = 1.0;         // stdev within a cluster
  // Feature j is multiplied by 10^(-scale_decades * u_j), u_j ~ U[0, 1),
  // giving unnormalized features whose scales span `scale_decades` decades.
  double scale_decades = 3.0;
  std::uint64_t seed = 1;
};

// K Gaussian clusters; centres and samples drawn from `seed`.
Dataset SynthBlobs(const BlobsConfig& config);
Dataset SynthBlobs(std::size_t n, int classes, std::size_t dim, std::uint64_t seed);

inline constexpr std::size_t kCifarRecordBytes = 3073;

// Records of 1 label byte + 3072 pixel bytes, pixels scaled to [0, 1].
Split ParseCifar10Records(std::span<const std::uint8_t> bytes, std::size_t limit,
                          const std::string& origin);
// Reads data_batch_{1..5}.bin and test_batch.bin from `dir`, keeping at most
// `train_limit` / `test_limit` records (0 = no limit).
Dataset LoadCifar10Binary(const std::filesystem::path& dir, std::size_t train_limit,
                          std::size_t test_limit);
// True when `dir` holds at least one training batch and the test batch.
bool HasCifar10Binary(const std::filesystem::path& dir);

struct IdxTensor {
  std::vector<std::size_t> dims;
  std::vector<double> values;
};

// IDX with unsigned-byte payload (type 0x08); big-endian dimensions.
IdxTensor ParseIdx(std::span<const std::uint8_t> bytes, const std::string& origin);
IdxTensor LoadIdx(const std::filesystem::path& path);
// train-images-idx3-ubyte / train-labels-idx1-ubyte / t10k-* from `dir`;
// pixel values scaled to [0, 1].
Dataset LoadIdxDataset(const std::filesystem::path& dir, std::size_t train_limit,
                       std::size_t test_limit);

// Header row with a `label` column; remaining columns are features,
// standardized per column. The last `test_fraction` of rows form the test
// split.
Dataset ParseCsv(const std::string& text, const std::string& origin, double test_fraction = 0.2);
Dataset LoadCsv(const std::filesystem::path& path, double test_fraction = 0.2);

// Random partition of [0, n) into `users` shards whose sizes differ by at
// most one.
std::vector<std::vector<std::size_t>> ShardIndices(std::size_t n, std::size_t users,
                                                   std::uint64_t seed);

std::vector<std::uint8_t> ReadFile(const std::filesystem::path& path);

}  // namespace co3::data

#endif  // CO3_DATASETS_HPP_
