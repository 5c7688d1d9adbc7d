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

#include "co3/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>

#include "co3/error.hpp"
#include "co3/rng.hpp"

namespace co3::train {

std::string_view CodecModeName(CodecMode mode) {
  switch (mode) {
    case CodecMode::kCo3: return "co3";
    case CodecMode::kFullPrecision: return "fp32";
    case CodecMode::kIdentity: return "identity";
  }
  return "unknown";
}

void TrainConfig::Validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) Fail(ErrorCode::kConfig, "eta must be > 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) Fail(ErrorCode::kConfig, "gamma must lie in [0, 1]");
  if (epochs < 0) Fail(ErrorCode::kConfig, "epochs must be >= 0");
  if (users < 1 || users > 65535) Fail(ErrorCode::kConfig, "users must lie in [1, 65535]");
  if (batch_size < 1) Fail(ErrorCode::kConfig, "batch size must be >= 1");
  if (threads < 1) Fail(ErrorCode::kConfig, "threads must be >= 1");
  if (fit_subsample < dist::kMinGenNormSamples) {
    Fail(ErrorCode::kConfig, "fit subsample must be >= 100");
  }
  for (auto h : hidden) {
    if (h == 0) Fail(ErrorCode::kConfig, "hidden widths must be positive");
  }
  try {
    format.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kConfig, e.what());
  }
}

namespace {

std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

template <typename Fn>
void ParallelFor(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(threads));
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<std::size_t> Widths(const TrainConfig& config, const data::Dataset& ds) {
  std::vector<std::size_t> w{ds.dim};
  w.insert(w.end(), config.hidden.begin(), config.hidden.end());
  w.push_back(static_cast<std::size_t>(ds.classes));
  return w;
}

}  // namespace

dist::GenNormParams FitCodingModel(std::span<const double> sample, bool* fallback) {
  if (fallback != nullptr) *fallback = false;
  try {
    return dist::FitGenNorm(sample);
  } catch (const Error&) {
  }
  if (fallback != nullptr) *fallback = true;
  try {
    return dist::FitNormal(sample);
  } catch (const Error&) {
    double mean = 0.0;
    for (double v : sample) mean += v;
    mean = sample.empty() ? 0.0 : mean / static_cast<double>(sample.size());
    return {2.0, mean, 1e-300};
  }
}

std::uint64_t ModelSeed(std::uint64_t seed) { return SplitMix(seed); }
std::uint64_t ShardSeed(std::uint64_t seed) { return SplitMix(seed ^ 0x5348415244ull); }

int LayerGroup(std::size_t layer, std::size_t layer_count) {
  return static_cast<int>(3 * layer / layer_count);
}

std::string_view LayerGroupName(int group) {
  switch (group) {
    case 0: return "lower";
    case 1: return "middle";
    case 2: return "upper";
  }
  return "unknown";
}

struct ParameterServer::User {
  int id = 0;
  Rng rng{0};
  std::vector<std::size_t> order;
  std::vector<std::size_t> batch;
  LayerTensors grads;
  LayerTensors corrected;
  LayerTensors g_hat;     // what the user subtracts from its memory
  LayerTensors received;  // what the server decoded
  std::vector<feedback::FeedbackState> memory;
  std::vector<std::size_t> saturated;
  std::vector<entropy::Block> blocks;
  std::vector<std::vector<std::uint8_t>> bytes;
  double loss = 0.0;
  std::uint64_t stream_bytes = 0;
  std::uint64_t pad_bits = 0;
  std::uint64_t symbol_bits = 0;
  std::uint64_t saturated_total = 0;
};

struct ParameterServer::LayerCodec {
  fpq::FpFormat format;
  std::optional<fpq::LevelTable> table;
  std::optional<entropy::HuffmanCodebook> codebook;
};

ParameterServer::ParameterServer(const TrainConfig& config, const data::Dataset& dataset,
                                 TrainHooks hooks)
    : config_(config),
      dataset_(dataset),
      hooks_(std::move(hooks)),
      model_((config.Validate(), dataset.Validate(), Widths(config, dataset)),
             ModelSeed(config.seed)) {
  const std::size_t n = dataset.train.rows();
  const auto shards = config.replicate_shards
                          ? std::vector<std::vector<std::size_t>>{}
                          : data::ShardIndices(n, static_cast<std::size_t>(config.users),
                                               ShardSeed(config.seed));
  users_.resize(static_cast<std::size_t>(config.users));
  for (int u = 0; u < config.users; ++u) {
    User& user = users_[static_cast<std::size_t>(u)];
    user.id = u;
    user.rng = Rng(config.shared_user_seed ? config.seed : UserSeed(config.seed, u));
    if (config.replicate_shards) {
      user.order.resize(n);
      std::iota(user.order.begin(), user.order.end(), std::size_t{0});
    } else {
      user.order = shards[static_cast<std::size_t>(u)];
    }
    user.grads = model_.ZerosLike();
    user.corrected = model_.ZerosLike();
    user.g_hat = model_.ZerosLike();
    user.received = model_.ZerosLike();
    for (std::size_t l = 0; l < model_.layer_count(); ++l) {
      user.memory.emplace_back(model_.layer(l).size(), config.gamma);
    }
    user.saturated.assign(model_.layer_count(), 0);
    user.blocks.resize(model_.layer_count());
    user.bytes.resize(model_.layer_count());
  }
  codecs_.resize(model_.layer_count());
  for (auto& c : codecs_) c.format = config.format;
  metrics_.parameter_count = model_.ParameterCount();
}

ParameterServer::~ParameterServer() = default;

const feedback::FeedbackState& ParameterServer::memory(int user, int layer) const {
  return users_.at(static_cast<std::size_t>(user)).memory.at(static_cast<std::size_t>(layer));
}

std::size_t ParameterServer::BeginEpoch(int epoch) {
  current_epoch_ = epoch;
  std::size_t smallest = users_.front().order.size();
  for (auto& user : users_) {
    user.rng.Shuffle(user.order);
    smallest = std::min(smallest, user.order.size());
  }
  rounds_in_epoch_ = std::max<std::size_t>(1, (smallest + config_.batch_size - 1) / config_.batch_size);
  norm_acc_.assign(3, {});
  norm_count_ = 0;
  return rounds_in_epoch_;
}

void ParameterServer::Refit(int epoch) {
  const bool first_of_epoch =
      metrics_.biases.empty() || metrics_.biases.back().epoch != epoch;
  for (std::size_t l = 0; l < codecs_.size(); ++l) {
    std::vector<double> pool;
    for (const auto& user : users_) {
      pool.insert(pool.end(), user.corrected[l].begin(), user.corrected[l].end());
    }
    if (pool.size() > config_.fit_subsample) {
      Rng rng(SplitMix(config_.seed ^ (static_cast<std::uint64_t>(epoch) << 20) ^ l));
      for (std::size_t i = 0; i < config_.fit_subsample; ++i) {
        std::swap(pool[i], pool[i + rng.Below(pool.size() - i)]);
      }
      pool.resize(config_.fit_subsample);
    }

    BiasRow row;
    row.epoch = epoch;
    row.layer = static_cast<int>(l);
    row.model = FitCodingModel(pool, &row.fallback);
    const auto found = fpq::OptimizeBias(row.model, config_.format, config_.bias_search);
    // The wire header carries the bias as f32.
    row.bias = static_cast<double>(static_cast<float>(found.bias));
    row.bias_polynomial = fpq::BiasPolynomial(row.model.beta, row.model.Sigma());

    auto& codec = codecs_[l];
    codec.format = config_.format;
    codec.format.bias = row.bias;
    codec.table.emplace(codec.format);
    codec.codebook.emplace(entropy::BuildCodebook(dist::CellProbabilities(row.model, codec.format)));
    metrics_.biases.push_back(row);

    if (first_of_epoch) {
      if (config_.record_fits) {
        for (auto family : {dist::Family::kNormal, dist::Family::kLaplace, dist::Family::kGenNorm}) {
          try {
            metrics_.fits.push_back({epoch, static_cast<int>(l), dist::FitFamily(pool, family)});
          } catch (const Error&) {
            // Degenerate samples have no fit row.
          }
        }
      }
      if (hooks_.on_fit_sample) hooks_.on_fit_sample(epoch, static_cast<int>(l), pool);
    }
  }
}

void ParameterServer::ProcessUser(User& user, std::uint64_t t) {
  for (std::size_t l = 0; l < model_.layer_count(); ++l) {
    auto& g = user.grads[l];
    auto& g_hat = user.g_hat[l];
    user.saturated[l] = 0;
    switch (config_.mode) {
      case CodecMode::kFullPrecision: {
        g_hat = g;
        user.received[l] = g;
        ledger_.Record(entropy::LedgerRecord{static_cast<std::uint16_t>(user.id), static_cast<std::uint32_t>(t),
                        static_cast<std::uint16_t>(l), 32ull * g.size(), 0});
        break;
      }
      case CodecMode::kIdentity: {
        g_hat = user.corrected[l];
        user.received[l] = g_hat;
        ledger_.Record(entropy::LedgerRecord{static_cast<std::uint16_t>(user.id), static_cast<std::uint32_t>(t),
                        static_cast<std::uint16_t>(l), 64ull * g.size(), 0});
        break;
      }
      case CodecMode::kCo3: {
        const auto& codec = codecs_[l];
        fpq::QuantizeStats stats;
        const auto q = fpq::Quantize(user.corrected[l], *codec.table, {}, &stats);
        user.saturated[l] = stats.saturated;
        user.saturated_total += stats.saturated;
        fpq::Dequantize(*codec.table, q.symbols, g_hat);
        auto block = entropy::Encode(q, *codec.codebook,
                                     {static_cast<std::uint16_t>(user.id),
                                      static_cast<std::uint32_t>(t), static_cast<std::uint16_t>(l)});
        auto bytes = block.Serialize();
        ledger_.Record(block);
        user.stream_bytes += bytes.size();
        user.pad_bits += block.pad_bits;
        for (auto s : q.symbols) user.symbol_bits += codec.codebook->length(s);

        // Server side: parse the stream and rebuild the gradient from the
        // header alone.
        std::size_t consumed = 0;
        const auto parsed = entropy::ParseBlock(bytes, &consumed);
        if (consumed != bytes.size()) Fail(ErrorCode::kCorrupt, "server: trailing bytes in block");
        const auto decoded = entropy::DecodeBlock(parsed);
        fpq::Dequantize(fpq::LevelTable(decoded.format), decoded.symbols, user.received[l]);
        user.blocks[l] = std::move(block);
        user.bytes[l] = std::move(bytes);
        break;
      }
    }
    if (config_.mode != CodecMode::kFullPrecision) user.memory[l].Update(g, g_hat);
  }
}

double ParameterServer::RunRound(std::uint64_t t, std::size_t round_in_epoch, bool refit) {
  const std::size_t b = config_.batch_size;
  ParallelFor(users_.size(), config_.threads, [&](std::size_t i) {
    User& user = users_[i];
    const std::size_t start = std::min(round_in_epoch * b, user.order.size());
    const std::size_t stop =
        round_in_epoch + 1 == rounds_in_epoch_ ? user.order.size() : std::min(start + b, user.order.size());
    user.batch.assign(user.order.begin() + static_cast<std::ptrdiff_t>(start),
                      user.order.begin() + static_cast<std::ptrdiff_t>(stop));
    user.loss = model_.LossAndGradient(dataset_, dataset_.train, user.batch, user.grads);
    if (config_.mode != CodecMode::kFullPrecision) {
      for (std::size_t l = 0; l < model_.layer_count(); ++l) {
        user.memory[l].CorrectedInput(user.grads[l], user.corrected[l]);
      }
    }
  });

  if (config_.mode == CodecMode::kCo3 && (refit || !codecs_.front().codebook)) Refit(current_epoch_);

  ParallelFor(users_.size(), config_.threads, [&](std::size_t i) { ProcessUser(users_[i], t); });

  for (const auto& user : users_) {
    for (std::size_t l = 0; l < model_.layer_count(); ++l) {
      if (hooks_.on_feedback) {
        hooks_.on_feedback({t, user.id, static_cast<int>(l), user.grads[l], user.g_hat[l],
                            user.memory[l].memory(), config_.gamma, user.saturated[l]});
      }
      if (hooks_.on_block && config_.mode == CodecMode::kCo3) {
        hooks_.on_block(user.blocks[l], user.bytes[l]);
      }
    }
  }

  // Aggregate in ascending user order, then take the descent step.
  const double step = config_.eta / static_cast<double>(config_.users);
  for (std::size_t l = 0; l < model_.layer_count(); ++l) {
    std::vector<double> sum = users_.front().received[l];
    for (std::size_t u = 1; u < users_.size(); ++u) {
      const auto& r = users_[u].received[l];
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += r[i];
    }
    auto& w = model_.layer(l).params;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = w[i] - step * sum[i];
  }

  // Norm series of user 0, averaged per layer group.
  const auto& lead = users_.front();
  const std::size_t layers = model_.layer_count();
  std::vector<int> group_size(3, 0);
  std::vector<feedback::L1Norms> group(3);
  for (std::size_t l = 0; l < layers; ++l) {
    const int gi = LayerGroup(l, layers);
    const auto n = feedback::Norms(lead.grads[l], lead.memory[l].memory());
    group[gi].gradient += n.gradient;
    group[gi].memory += n.memory;
    ++group_size[gi];
  }
  for (int gi = 0; gi < 3; ++gi) {
    if (group_size[gi] == 0) continue;
    norm_acc_[gi].l1_gradient += group[gi].gradient / group_size[gi];
    norm_acc_[gi].l1_memory += group[gi].memory / group_size[gi];
  }
  ++norm_count_;

  double loss = 0.0;
  for (const auto& user : users_) loss += user.loss;
  loss /= static_cast<double>(users_.size());
  if (!std::isfinite(loss)) {
    Fail(ErrorCode::kDiverged, "training diverged at iteration " + std::to_string(t));
  }
  metrics_.iteration_loss.push_back(loss);
  ++metrics_.iterations;
  return loss;
}

void ParameterServer::EndEpoch(int epoch) {
  EpochMetrics m;
  m.epoch = epoch;
  m.train_loss = model_.Loss(dataset_, dataset_.train);
  if (!std::isfinite(m.train_loss)) {
    Fail(ErrorCode::kDiverged, "training loss is not finite after epoch " + std::to_string(epoch));
  }
  m.test_accuracy = model_.Accuracy(dataset_, dataset_.test);
  m.cum_payload_bits = ledger_.PayloadTotal();
  m.cum_header_bits = ledger_.HeaderTotal();
  m.cum_bits = ledger_.Total(config_.include_headers);
  metrics_.epochs.push_back(m);

  if (norm_count_ > 0) {
    const std::size_t layers = model_.layer_count();
    for (int gi = 0; gi < 3; ++gi) {
      bool present = false;
      for (std::size_t l = 0; l < layers; ++l) present = present || LayerGroup(l, layers) == gi;
      if (!present) continue;
      metrics_.norms.push_back({epoch, gi, norm_acc_[gi].l1_gradient / norm_count_,
                                norm_acc_[gi].l1_memory / norm_count_});
    }
  }

  metrics_.blocks = ledger_.size();
  metrics_.ledger_total = ledger_.Total(true);
  metrics_.ledger_payload = ledger_.PayloadTotal();
  metrics_.stream_bytes = 0;
  metrics_.pad_bits = 0;
  metrics_.symbol_bits = 0;
  metrics_.saturated = 0;
  for (const auto& user : users_) {
    metrics_.stream_bytes += user.stream_bytes;
    metrics_.pad_bits += user.pad_bits;
    metrics_.symbol_bits += user.symbol_bits;
    metrics_.saturated += user.saturated_total;
  }
}

RunMetrics Train(const TrainConfig& config, const data::Dataset& dataset, TrainHooks hooks) {
  ParameterServer ps(config, dataset, std::move(hooks));
  ps.EndEpoch(0);
  std::uint64_t t = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::size_t rounds = ps.BeginEpoch(epoch);
    for (std::size_t r = 0; r < rounds; ++r) {
      ps.RunRound(t, r, r == 0 || config.refit_every_iteration);
      ++t;
    }
    ps.EndEpoch(epoch);
  }
  return ps.TakeMetrics();
}

}  // namespace co3::train
