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

#include "co3/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "co3/error.hpp"
#include "co3/rng.hpp"

namespace co3::train {

Mlp::Mlp(std::vector<std::size_t> widths, std::uint64_t seed) {
  if (widths.size() < 2) Fail(ErrorCode::kInvalidArgument, "mlp: need input and output widths");
  for (auto w : widths) {
    if (w == 0) Fail(ErrorCode::kInvalidArgument, "mlp: zero layer width");
  }
  if (widths.back() < 2) Fail(ErrorCode::kInvalidArgument, "mlp: need at least two classes");
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    layer.in = widths[l];
    layer.out = widths[l + 1];
    layer.params.assign(layer.in * layer.out + layer.out, 0.0);
    const double limit = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (std::size_t i = 0; i < layer.in * layer.out; ++i) layer.params[i] = rng.Uniform(-limit, limit);
    layers_.push_back(std::move(layer));
  }
}

std::size_t Mlp::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.size();
  return n;
}

LayerTensors Mlp::ZerosLike() const {
  LayerTensors t;
  for (const auto& l : layers_) t.emplace_back(l.size(), 0.0);
  return t;
}

void Mlp::Forward(const data::Dataset& ds, const data::Split& split,
                  std::span<const std::size_t> rows, std::vector<std::vector<double>>& acts) const {
  if (ds.dim != input_dim()) Fail(ErrorCode::kShapeMismatch, "mlp: dataset dimension differs from input width");
  const std::size_t batch = rows.size();
  acts.resize(layers_.size() + 1);
  acts[0].resize(batch * ds.dim);
  for (std::size_t i = 0; i < batch; ++i) {
    const auto row = ds.Row(split, rows[i]);
    std::copy(row.begin(), row.end(), acts[0].begin() + i * ds.dim);
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const auto& x = acts[l];
    auto& z = acts[l + 1];
    z.assign(batch * layer.out, 0.0);
    const double* w = layer.weights();
    const double* b = layer.biases();
    const bool hidden = l + 1 < layers_.size();
    for (std::size_t i = 0; i < batch; ++i) {
      const double* xi = x.data() + i * layer.in;
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double* wo = w + o * layer.in;
        double acc = 0.0;
        for (std::size_t k = 0; k < layer.in; ++k) acc += wo[k] * xi[k];
        acc += b[o];
        if (!std::isfinite(acc)) {
          Fail(ErrorCode::kNonFinite, "mlp: non-finite activation in layer " + std::to_string(l));
        }
        z[i * layer.out + o] = hidden ? std::max(acc, 0.0) : acc;
      }
    }
    if (!hidden) {
      for (std::size_t i = 0; i < batch; ++i) {
        double* zi = z.data() + i * layer.out;
        const double top = *std::max_element(zi, zi + layer.out);
        double sum = 0.0;
        for (std::size_t o = 0; o < layer.out; ++o) {
          zi[o] = std::exp(zi[o] - top);
          sum += zi[o];
        }
        for (std::size_t o = 0; o < layer.out; ++o) zi[o] /= sum;
      }
    }
  }
}

std::vector<double> Mlp::Predict(const data::Dataset& ds, const data::Split& split,
                                 std::span<const std::size_t> rows) const {
  std::vector<std::vector<double>> acts;
  Forward(ds, split, rows, acts);
  return std::move(acts.back());
}

namespace {

// -log p with the probability clamped away from zero.
double NegLog(double p) { return -std::log(std::max(p, 1e-300)); }

void CheckLabels(const data::Split& split, std::span<const std::size_t> rows, std::size_t classes) {
  for (auto r : rows) {
    if (r >= split.rows()) Fail(ErrorCode::kOutOfRange, "mlp: row index out of range");
    const int y = split.labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      Fail(ErrorCode::kOutOfRange, "mlp: label " + std::to_string(y) + " out of range");
    }
  }
}

}  // namespace

double Mlp::LossAndGradient(const data::Dataset& ds, const data::Split& split,
                            std::span<const std::size_t> rows, LayerTensors& grads) const {
  if (rows.empty()) Fail(ErrorCode::kInvalidArgument, "mlp: empty batch");
  CheckLabels(split, rows, classes());
  std::vector<std::vector<double>> acts;
  Forward(ds, split, rows, acts);
  const std::size_t batch = rows.size();
  const double inv_batch = 1.0 / static_cast<double>(batch);

  std::vector<double> delta = acts.back();
  double loss = 0.0;
  const std::size_t k = classes();
  for (std::size_t i = 0; i < batch; ++i) {
    const auto y = static_cast<std::size_t>(split.labels[rows[i]]);
    loss += NegLog(delta[i * k + y]);
    delta[i * k + y] -= 1.0;
    for (std::size_t o = 0; o < k; ++o) delta[i * k + o] *= inv_batch;
  }
  loss *= inv_batch;

  grads.resize(layers_.size());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    const auto& x = acts[l];
    auto& g = grads[l];
    g.assign(layer.size(), 0.0);
    double* gw = g.data();
    double* gb = g.data() + layer.in * layer.out;
    for (std::size_t i = 0; i < batch; ++i) {
      const double* di = delta.data() + i * layer.out;
      const double* xi = x.data() + i * layer.in;
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double d = di[o];
        if (d == 0.0) continue;
        double* row = gw + o * layer.in;
        for (std::size_t c = 0; c < layer.in; ++c) row[c] += d * xi[c];
        gb[o] += d;
      }
    }
    if (l == 0) break;
    std::vector<double> prev(batch * layer.in, 0.0);
    const double* w = layer.weights();
    for (std::size_t i = 0; i < batch; ++i) {
      const double* di = delta.data() + i * layer.out;
      double* pi = prev.data() + i * layer.in;
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double d = di[o];
        if (d == 0.0) continue;
        const double* wo = w + o * layer.in;
        for (std::size_t c = 0; c < layer.in; ++c) pi[c] += d * wo[c];
      }
      const double* xi = x.data() + i * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) {
        if (xi[c] <= 0.0) pi[c] = 0.0;
      }
    }
    delta = std::move(prev);
  }
  return loss;
}

double Mlp::Loss(const data::Dataset& ds, const data::Split& split,
                 std::span<const std::size_t> rows) const {
  if (rows.empty()) return 0.0;
  CheckLabels(split, rows, classes());
  const auto probs = Predict(ds, split, rows);
  double loss = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    loss += NegLog(probs[i * classes() + static_cast<std::size_t>(split.labels[rows[i]])]);
  }
  return loss / static_cast<double>(rows.size());
}

namespace {

std::vector<std::size_t> AllRows(const data::Split& split) {
  std::vector<std::size_t> rows(split.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace

double Mlp::Loss(const data::Dataset& ds, const data::Split& split) const {
  constexpr std::size_t kChunk = 512;
  const auto rows = AllRows(split);
  if (rows.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const auto chunk = std::span(rows).subspan(start, std::min(kChunk, rows.size() - start));
    total += Loss(ds, split, chunk) * static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(rows.size());
}

double Mlp::Accuracy(const data::Dataset& ds, const data::Split& split) const {
  if (split.rows() == 0) return 0.0;
  constexpr std::size_t kChunk = 512;
  std::size_t correct = 0;
  const auto rows = AllRows(split);
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const auto chunk = std::span(rows).subspan(start, std::min(kChunk, rows.size() - start));
    const auto probs = Predict(ds, split, chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const double* p = probs.data() + i * classes();
      const auto arg = static_cast<int>(std::max_element(p, p + classes()) - p);
      if (arg == split.labels[chunk[i]]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

}  // namespace co3::train
