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

#ifndef CO3_TRAINER_HPP_
#define CO3_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "co3/datasets.hpp"
#include "co3/distmodel.hpp"
#include "co3/entropy.hpp"
#include "co3/feedback.hpp"
#include "co3/fpq.hpp"
#include "co3/model.hpp"

namespace co3::train {

enum class CodecMode {
  kCo3,            // fp conversion + Huffman coding + error feedback
  kFullPrecision,  // raw gradients; 32 bits per entry booked on the uplink
  kIdentity,       // quantizer replaced by the identity, no coding
};

std::string_view CodecModeName(CodecMode mode);

struct TrainConfig {
  double eta = 0.01;
  double gamma = 0.9;
  int epochs = 30;
  int users = 1;
  std::size_t batch_size = 64;
  fpq::FpFormat format = fpq::FpFormat::Fp4();
  std::uint64_t seed = 1;
  CodecMode mode = CodecMode::kCo3;
  std::vector<std::size_t> hidden = {128, 64};

  // Refit/bias/codebook cadence. Default is once per epoch.
  bool refit_every_iteration = false;
  std::size_t fit_subsample = 200000;
  fpq::BiasSearchConfig bias_search;
  // W2 of all three families at every refit (fits.csv rows).
  bool record_fits = true;
  // Cumulative bits in the epoch metrics include block headers.
  bool include_headers = true;

  // Every user trains on the full training split instead of a shard.
  bool replicate_shards = false;
  // Every user uses `seed` for its own stream instead of seed ^ user.
  bool shared_user_seed = false;
  int threads = 1;

  // eta > 0, gamma in [0, 1], users >= 1, batch >= 1, epochs >= 0.
  void Validate() const;
};

// Seed derivation shared by the trainer and reference implementations.
std::uint64_t ModelSeed(std::uint64_t seed);
std::uint64_t ShardSeed(std::uint64_t seed);
inline std::uint64_t UserSeed(std::uint64_t seed, int user) {
  return seed ^ static_cast<std::uint64_t>(user);
}

// GenNorm MLE; falls back to a Normal fit, then to a point model at the mean,
// when the sample is too small or constant.
dist::GenNormParams FitCodingModel(std::span<const double> sample, bool* fallback = nullptr);

// Three layer groups over the network depth; group 0 is the input side.
int LayerGroup(std::size_t layer, std::size_t layer_count);
std::string_view LayerGroupName(int group);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;     // full training split after the epoch
  double test_accuracy = 0.0;
  std::uint64_t cum_bits = 0;  // per include_headers
  std::uint64_t cum_payload_bits = 0;
  std::uint64_t cum_header_bits = 0;
};

struct FitRow {
  int epoch = 0;
  int layer = 0;
  dist::FitReport report;
};

struct BiasRow {
  int epoch = 0;
  int layer = 0;
  dist::GenNormParams model;
  double bias = 0.0;
  double bias_polynomial = 0.0;
  bool fallback = false;  // GenNorm fit failed; Normal/point model used
};

struct NormRow {
  int epoch = 0;
  int layer_group = 0;
  double l1_gradient = 0.0;  // per-layer mean over the group, epoch mean
  double l1_memory = 0.0;
};

struct RunMetrics {
  std::vector<EpochMetrics> epochs;  // epoch 0 is the initial model
  std::vector<double> iteration_loss;  // mean minibatch loss over users
  std::vector<FitRow> fits;
  std::vector<BiasRow> biases;
  std::vector<NormRow> norms;
  std::size_t parameter_count = 0;
  std::uint64_t iterations = 0;
  std::uint64_t blocks = 0;
  std::uint64_t stream_bytes = 0;  // serialized bytes of every emitted block
  std::uint64_t pad_bits = 0;
  std::uint64_t symbol_bits = 0;   // sum of per-symbol code lengths
  std::uint64_t ledger_total = 0;  // headers included
  std::uint64_t ledger_payload = 0;
  std::uint64_t saturated = 0;

  double FinalAccuracy() const { return epochs.empty() ? 0.0 : epochs.back().test_accuracy; }
};

struct FeedbackStep {
  std::uint64_t iteration = 0;
  int user = 0;
  int layer = 0;
  std::span<const double> gradient;
  std::span<const double> g_hat;
  std::span<const double> memory;  // after the update
  double gamma = 0.0;
  std::size_t saturated = 0;
};

struct TrainHooks {
  std::function<void(const FeedbackStep&)> on_feedback;
  // Sample the layer model was fitted on (pre-quantization term).
  std::function<void(int epoch, int layer, std::span<const double>)> on_fit_sample;
  std::function<void(const entropy::Block&, std::span<const std::uint8_t>)> on_block;
};

// One synchronous round: every user computes its gradient, quantizes
// g + gamma*m, encodes, updates its memory; the server decodes all blocks
// and applies w <- w - (eta/U) * sum of decoded gradients in user order.
// Drives Train(); exposed for step-level tests.
class ParameterServer {
 public:
  ParameterServer(const TrainConfig& config, const data::Dataset& dataset, TrainHooks hooks = {});
  ~ParameterServer();
  ParameterServer(const ParameterServer&) = delete;
  ParameterServer& operator=(const ParameterServer&) = delete;

  const Mlp& model() const { return model_; }
  Mlp& model() { return model_; }
  const entropy::PayloadLedger& ledger() const { return ledger_; }
  const RunMetrics& metrics() const { return metrics_; }
  RunMetrics TakeMetrics() { return std::move(metrics_); }
  const feedback::FeedbackState& memory(int user, int layer) const;

  // Reshuffles every user's shard; returns the number of rounds in the epoch.
  std::size_t BeginEpoch(int epoch);
  // Runs one round; returns the mean minibatch loss over users.
  double RunRound(std::uint64_t t, std::size_t round_in_epoch, bool refit);
  void EndEpoch(int epoch);

 private:
  struct User;
  struct LayerCodec;

  void Refit(int epoch);
  void ProcessUser(User& user, std::uint64_t t);

  TrainConfig config_;
  const data::Dataset& dataset_;
  TrainHooks hooks_;
  Mlp model_;
  std::vector<User> users_;
  std::vector<LayerCodec> codecs_;
  entropy::PayloadLedger ledger_;
  RunMetrics metrics_;
  std::size_t rounds_in_epoch_ = 0;
  std::vector<NormRow> norm_acc_;
  std::size_t norm_count_ = 0;
  int current_epoch_ = 0;
};

// Runs config.epochs epochs of synchronous rounds. Fully deterministic for a
// given config and dataset. Non-finite training loss raises kDiverged.
RunMetrics Train(const TrainConfig& config, const data::Dataset& dataset, TrainHooks hooks = {});

}  // namespace co3::train

#endif  // CO3_TRAINER_HPP_
