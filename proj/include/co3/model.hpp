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

#ifndef CO3_MODEL_HPP_
#define CO3_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "co3/datasets.hpp"

namespace co3::train {

// Dense layer parameters stored as one flat tensor: weights (out x in,
// row-major) followed by the out biases.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> params;

  std::size_t size() const { return params.size(); }
  const double* weights() const { return params.data(); }
  const double* biases() const { return params.data() + in * out; }
};

using LayerTensors = std::vector<std::vector<double>>;

// ReLU MLP with a softmax output and mean categorical cross-entropy loss.
class Mlp {
 public:
  // widths = {d_in, hidden..., classes}. Weights uniform in
  // +-1/sqrt(fan_in), biases zero.
  Mlp(std::vector<std::size_t> widths, std::uint64_t seed);

  std::size_t layer_count() const { return layers_.size(); }
  const DenseLayer& layer(std::size_t i) const { return layers_[i]; }
  DenseLayer& layer(std::size_t i) { return layers_[i]; }
  std::size_t ParameterCount() const;
  std::size_t classes() const { return layers_.back().out; }
  std::size_t input_dim() const { return layers_.front().in; }

  // Zero-filled tensors shaped like the layer parameters.
  LayerTensors ZerosLike() const;

  // Softmax outputs, rows x classes.
  std::vector<double> Predict(const data::Dataset& ds, const data::Split& split,
                              std::span<const std::size_t> rows) const;

  // Mean cross-entropy over `rows` and its exact gradient, written into
  // `grads` (resized as needed). A non-finite activation raises kNonFinite
  // naming the layer.
  double LossAndGradient(const data::Dataset& ds, const data::Split& split,
                         std::span<const std::size_t> rows, LayerTensors& grads) const;

  double Loss(const data::Dataset& ds, const data::Split& split,
              std::span<const std::size_t> rows) const;
  double Loss(const data::Dataset& ds, const data::Split& split) const;
  double Accuracy(const data::Dataset& ds, const data::Split& split) const;

 private:
  // Activations per layer boundary; acts[0] is the input batch.
  void Forward(const data::Dataset& ds, const data::Split& split,
               std::span<const std::size_t> rows, std::vector<std::vector<double>>& acts) const;

  std::vector<DenseLayer> layers_;
};

}  // namespace co3::train

#endif  // CO3_MODEL_HPP_
