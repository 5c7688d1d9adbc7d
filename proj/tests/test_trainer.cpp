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

#include <cmath>
#include <map>
#include <vector>

#include "co3/datasets.hpp"
#include "co3/error.hpp"
#include "co3/model.hpp"
#include "co3/rng.hpp"
#include "co3/trainer.hpp"
#include "doctest.h"

using co3::train::CodecMode;
using co3::train::Mlp;
using co3::train::TrainConfig;

namespace {

co3::data::Dataset SmallBlobs(std::uint64_t seed = 1) {
  co3::data::BlobsConfig b;
  b.train = 600;
  b.test = 200;
  b.classes = 4;
  b.dim = 8;
  b.seed = seed;
  return co3::data::SynthBlobs(b);
}

TrainConfig SmallConfig() {
  TrainConfig c;
  c.epochs = 2;
  c.hidden = {16, 12};
  c.batch_size = 32;
  return c;
}

// Plain minibatch SGD with the same seeding as the simulator but none of its
// machinery: shuffle, slice, gradient, w -= eta * g.
std::vector<double> PlainSgd(const TrainConfig& c, const co3::data::Dataset& ds) {
  std::vector<std::size_t> widths{ds.dim};
  widths.insert(widths.end(), c.hidden.begin(), c.hidden.end());
  widths.push_back(static_cast<std::size_t>(ds.classes));
  Mlp model(widths, co3::train::ModelSeed(c.seed));
  auto order = co3::data::ShardIndices(ds.train.rows(), 1, co3::train::ShardSeed(c.seed))[0];
  co3::Rng rng(co3::train::UserSeed(c.seed, 0));
  std::vector<double> losses;
  auto grads = model.ZerosLike();
  for (int epoch = 1; epoch <= c.epochs; ++epoch) {
    rng.Shuffle(order);
    const std::size_t rounds = (order.size() + c.batch_size - 1) / c.batch_size;
    for (std::size_t r = 0; r < rounds; ++r) {
      const std::size_t start = r * c.batch_size;
      const std::size_t stop = r + 1 == rounds ? order.size() : start + c.batch_size;
      std::vector<std::size_t> batch(order.begin() + start, order.begin() + stop);
      losses.push_back(model.LossAndGradient(ds, ds.train, batch, grads));
      for (std::size_t l = 0; l < model.layer_count(); ++l) {
        auto& w = model.layer(l).params;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = w[i] - c.eta * grads[l][i];
      }
    }
  }
  return losses;
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
  const auto ds = SmallBlobs();
  Mlp model({ds.dim, 10, 7, static_cast<std::size_t>(ds.classes)}, 5);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < 40; ++i) rows.push_back(i);
  co3::train::LayerTensors grads;
  model.LossAndGradient(ds, ds.train, rows, grads);
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    double diff = 0.0, norm = 0.0;
    auto& w = model.layer(l).params;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double keep = w[i];
      const double h = 1e-6 * std::max(1.0, std::abs(keep));
      w[i] = keep + h;
      const double up = model.Loss(ds, ds.train, rows);
      w[i] = keep - h;
      const double down = model.Loss(ds, ds.train, rows);
      w[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      diff += (fd - grads[l][i]) * (fd - grads[l][i]);
      norm += fd * fd;
    }
    CHECK(std::sqrt(diff / norm) < 1e-4);
  }
}

TEST_CASE("uncompressed run reproduces plain SGD bitwise") {
  const auto ds = SmallBlobs();
  auto c = SmallConfig();
  c.mode = CodecMode::kIdentity;
  c.epochs = 3;
  const auto m = co3::train::Train(c, ds);
  const auto ref = PlainSgd(c, ds);
  REQUIRE(m.iteration_loss.size() == ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(m.iteration_loss[i] == ref[i]);

  c.mode = CodecMode::kFullPrecision;
  const auto fp = co3::train::Train(c, ds);
  CHECK(fp.iteration_loss == m.iteration_loss);
}

TEST_CASE("training is deterministic and threads do not change the result") {
  const auto ds = SmallBlobs();
  auto c = SmallConfig();
  c.users = 3;
  const auto a = co3::train::Train(c, ds);
  c.threads = 3;
  const auto b = co3::train::Train(c, ds);
  CHECK(a.iteration_loss == b.iteration_loss);
  CHECK(a.ledger_total == b.ledger_total);
  CHECK(a.FinalAccuracy() == b.FinalAccuracy());
}

TEST_CASE("co3 training reduces the loss and books bits") {
  const auto ds = SmallBlobs();
  auto c = SmallConfig();
  c.epochs = 5;
  const auto m = co3::train::Train(c, ds);
  REQUIRE(m.epochs.size() == 6);
  CHECK(m.epochs.back().train_loss < m.epochs.front().train_loss);
  CHECK(m.epochs.front().cum_bits == 0);
  for (std::size_t e = 1; e < m.epochs.size(); ++e) CHECK(m.epochs[e].cum_bits > m.epochs[e - 1].cum_bits);
  CHECK(m.ledger_total == 8 * m.stream_bytes - m.pad_bits);
  CHECK(m.ledger_payload == m.symbol_bits);
}

TEST_CASE("memory replays bitwise from the feedback hook") {
  const auto ds = SmallBlobs();
  auto c = SmallConfig();
  c.users = 2;
  std::map<std::pair<int, int>, std::vector<double>> replay;
  std::size_t mismatches = 0, steps = 0;
  co3::train::TrainHooks hooks;
  hooks.on_feedback = [&](const co3::train::FeedbackStep& s) {
    auto& m = replay[{s.user, s.layer}];
    if (m.empty()) m.assign(s.gradient.size(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double decayed = s.gamma * m[i];
      const double carried = decayed + s.gradient[i];
      m[i] = carried - s.g_hat[i];
      if (m[i] != s.memory[i]) ++mismatches;
    }
    ++steps;
  };
  co3::train::Train(c, ds, hooks);
  CHECK(steps > 0);
  CHECK(mismatches == 0);
}

TEST_CASE("identity codec leaves the memory at zero") {
  const auto ds = SmallBlobs();
  auto c = SmallConfig();
  c.mode = CodecMode::kIdentity;
  std::size_t nonzero = 0;
  co3::train::TrainHooks hooks;
  hooks.on_feedback = [&](const co3::train::FeedbackStep& s) {
    for (double m : s.memory) nonzero += m != 0.0;
  };
  co3::train::Train(c, ds, hooks);
  CHECK(nonzero == 0);
}

TEST_CASE("server update is the descent step on the mean decoded gradient") {
  const auto ds = SmallBlobs();
  auto c = SmallConfig();
  c.users = 2;
  std::vector<std::vector<double>> g_hat(2);
  co3::train::TrainHooks hooks;
  hooks.on_feedback = [&](const co3::train::FeedbackStep& s) {
    if (s.layer == 0) g_hat[static_cast<std::size_t>(s.user)].assign(s.g_hat.begin(), s.g_hat.end());
  };
  co3::train::ParameterServer traced(c, ds, hooks);
  const auto before = traced.model().layer(0).params;
  traced.BeginEpoch(1);
  traced.RunRound(0, 0, true);
  const auto& after = traced.model().layer(0).params;
  for (std::size_t i = 0; i < after.size(); ++i) {
    const double sum = g_hat[0][i] + g_hat[1][i];
    CHECK(after[i] == before[i] - (c.eta / 2.0) * sum);
  }
}

TEST_CASE("first iteration with gamma 0.9 quantizes the raw gradient") {
  const auto ds = SmallBlobs();
  auto c = SmallConfig();
  std::size_t checked = 0;
  co3::train::TrainHooks hooks;
  bool first = true;
  hooks.on_feedback = [&](const co3::train::FeedbackStep& s) {
    if (!first || s.iteration != 0) return;
    for (std::size_t i = 0; i < s.memory.size(); ++i) {
      CHECK(s.memory[i] == s.gradient[i] - s.g_hat[i]);
      ++checked;
    }
  };
  co3::train::ParameterServer ps(c, ds, hooks);
  ps.BeginEpoch(1);
  ps.RunRound(0, 0, true);
  first = false;
  CHECK(checked == ps.model().ParameterCount());
}

TEST_CASE("config validation") {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    try {
      c.Validate();
    } catch (const co3::Error& e) {
      return e.code() == co3::ErrorCode::kConfig;
    }
    return false;
  };
  CHECK(bad([](TrainConfig& c) { c.gamma = 1.5; }));
  CHECK(bad([](TrainConfig& c) { c.gamma = -0.1; }));
  CHECK(bad([](TrainConfig& c) { c.eta = 0.0; }));
  CHECK(bad([](TrainConfig& c) { c.users = 0; }));
  CHECK(bad([](TrainConfig& c) { c.batch_size = 0; }));
  CHECK(bad([](TrainConfig& c) { c.format.exp_bits = 0; }));
  CHECK(bad([](TrainConfig& c) { c.hidden = {0}; }));
}

TEST_CASE("default config matches the training recipe") {
  TrainConfig c;
  CHECK(c.eta == 0.01);
  CHECK(c.batch_size == 64);
  CHECK(c.format == co3::fpq::FpFormat::Fp4());
  CHECK(c.hidden == std::vector<std::size_t>{128, 64});
}

TEST_CASE("layer groups split depth into thirds") {
  CHECK(co3::train::LayerGroup(0, 3) == 0);
  CHECK(co3::train::LayerGroup(1, 3) == 1);
  CHECK(co3::train::LayerGroup(2, 3) == 2);
  CHECK(co3::train::LayerGroup(0, 6) == 0);
  CHECK(co3::train::LayerGroup(5, 6) == 2);
  CHECK(co3::train::LayerGroup(0, 1) == 0);
}

TEST_CASE("divergence is reported") {
  const auto ds = SmallBlobs();
  auto c = SmallConfig();
  c.eta = 1e300;
  c.mode = CodecMode::kFullPrecision;
  try {
    co3::train::Train(c, ds);
    FAIL("expected divergence");
  } catch (const co3::Error& e) {
    CHECK((e.code() == co3::ErrorCode::kDiverged || e.code() == co3::ErrorCode::kNonFinite));
  }
}

TEST_CASE("fits, biases and norms are recorded per epoch") {
  const auto ds = SmallBlobs();
  auto c = SmallConfig();
  c.epochs = 3;
  const auto m = co3::train::Train(c, ds);
  CHECK(m.biases.size() == 3 * 3);
  // The 52-value output layer is below the GenNorm sample minimum.
  CHECK(m.fits.size() == 3 * (3 + 3 + 2));
  CHECK(m.norms.size() == 3 * 3);
  for (const auto& b : m.biases) {
    CHECK(std::isfinite(b.bias));
    CHECK(static_cast<double>(static_cast<float>(b.bias)) == b.bias);
  }
}
