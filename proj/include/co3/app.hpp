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

#ifndef CO3_APP_HPP_
#define CO3_APP_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "co3/datasets.hpp"
#include "co3/distmodel.hpp"
#include "co3/fpq.hpp"
#include "co3/trainer.hpp"

// Run configuration, artifact files and the file codec behind the CLI.
namespace co3::app {

enum class DatasetKind { kAuto, kBlobs, kCifar10, kIdx, kCsv };

std::string_view DatasetKindName(DatasetKind kind);

struct RunConfig {
  train::TrainConfig train;
  // One run per entry; train.gamma is overwritten by each.
  std::vector<double> gammas = {0.9};
  // kAuto: CIFAR-10 when data_path holds the binary batches, else blobs.
  DatasetKind dataset = DatasetKind::kAuto;
  std::string data_path;
  std::size_t train_limit = 5000;
  std::size_t test_limit = 1000;
  double csv_test_fraction = 0.2;
  data::BlobsConfig blobs;
  std::string out = "co3_out";
  // Write the per-epoch fit samples under samples/ for fit-dist.
  bool keep_samples = true;

  void Validate() const;
};

// Keys use underscores; dashes are accepted and mapped to underscores.
// Unknown keys and malformed values raise kConfig.
void SetOption(RunConfig& config, std::string_view key, std::string_view value);
// JSON object whose keys are the SetOption keys; values may be JSON numbers,
// booleans, strings or (for list keys) arrays.
void ApplyJson(RunConfig& config, std::string_view json_text, const std::string& origin);
void LoadConfigFile(RunConfig& config, const std::filesystem::path& path);
std::string ToJson(const RunConfig& config);
std::vector<std::string> OptionKeys();

data::Dataset LoadDataset(const RunConfig& config);

struct RunResult {
  double gamma = 0.0;
  std::filesystem::path dir;
  train::RunMetrics metrics;
  double wall_seconds = 0.0;
  double bits_per_parameter_iteration = 0.0;
};

// Runs every gamma of the config. A single gamma writes its artifacts to
// `out`; several write out/gamma_<g>/ per run plus a combined
// out/metrics.csv and out/summary.json.
std::vector<RunResult> RunTraining(const RunConfig& config);

// Artifact writers (schemas documented in the README).
void WriteMetricsCsv(const std::filesystem::path& path, const std::vector<RunResult>& runs);
void WriteFitsCsv(const std::filesystem::path& path, const train::RunMetrics& m);
void WriteNormsCsv(const std::filesystem::path& path, const train::RunMetrics& m);
void WriteBiasesCsv(const std::filesystem::path& path, const train::RunMetrics& m);
void WriteSummaryJson(const std::filesystem::path& path, const RunConfig& config,
                      const std::vector<RunResult>& runs);
std::filesystem::path SamplePath(const std::filesystem::path& run_dir, int epoch, int layer);

struct BiasSweepRow {
  double beta = 0.0;
  double bias_grid = 0.0;
  double bias_polynomial = 0.0;
  double objective = 0.0;
};

// beta from lo to hi inclusive in `step` increments; rows computed at scale
// sigma. Requires 0 < lo <= hi <= 5 and step > 0.
std::vector<BiasSweepRow> BiasSweep(double lo, double hi, double step, double sigma,
                                    const fpq::FpFormat& format,
                                    const fpq::BiasSearchConfig& search = {});
void WriteBiasSweepCsv(const std::filesystem::path& path, const std::vector<BiasSweepRow>& rows);

struct FitDistRow {
  int epoch = 0;
  int layer_group = 0;
  double w2_normal = 0.0;
  double w2_laplace = 0.0;
  double w2_gennorm = 0.0;
  double gennorm_beta = 0.0;
};

struct FitDistSummary {
  std::vector<FitDistRow> rows;
  double gennorm_best_fraction = 0.0;  // rows with GenNorm <= min(others) + 1e-6
  double median_normal = 0.0;
  double median_laplace = 0.0;
  double median_gennorm = 0.0;
};

// Samples of each layer group are pooled per epoch (at most `subsample`).
FitDistSummary FitDistRows(const std::vector<std::vector<std::vector<double>>>& samples_by_epoch,
                           const std::vector<int>& epochs, std::size_t subsample = 200000);
// Reads samples/ of a completed run directory.
FitDistSummary FitDist(const std::filesystem::path& run_dir, std::size_t subsample = 200000);
void WriteFitDistCsv(const std::filesystem::path& path, const FitDistRow* rows, std::size_t n);

struct CodecOptions {
  fpq::FpFormat format = fpq::FpFormat::Fp4();
  std::optional<double> bias;                // otherwise optimized per block
  std::optional<dist::GenNormParams> model;  // otherwise fitted per block
  std::uint64_t block_size = 0;              // 0 = one block
};

struct CodecReport {
  std::uint64_t values = 0;
  std::uint64_t blocks = 0;
  std::uint64_t payload_bits = 0;
  std::uint64_t header_bits = 0;
  std::uint64_t file_bytes = 0;
  double BitsPerWeight() const {
    return values == 0 ? 0.0 : static_cast<double>(payload_bits) / static_cast<double>(values);
  }
};

// In-memory codec over f32 values; the file variants read and write raw
// little-endian f32 arrays.
std::vector<std::uint8_t> EncodeValues(const std::vector<float>& values, const CodecOptions& options,
                                       CodecReport* report);
std::vector<float> DecodeValues(std::span<const std::uint8_t> bytes, CodecReport* report);
CodecReport EncodeFile(const std::filesystem::path& in, const std::filesystem::path& out,
                       const CodecOptions& options);
CodecReport DecodeFile(const std::filesystem::path& in, const std::filesystem::path& out);

std::vector<float> ReadF32File(const std::filesystem::path& path);
void WriteF32File(const std::filesystem::path& path, std::span<const float> values);

// Human-readable digest of out/summary.json.
std::string Report(const std::filesystem::path& run_dir);

}  // namespace co3::app

#endif  // CO3_APP_HPP_
