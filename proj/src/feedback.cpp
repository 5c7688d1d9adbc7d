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

#include "co3/feedback.hpp"

#include <cmath>
#include <string>

#include "co3/error.hpp"

namespace co3::feedback {

FeedbackState::FeedbackState(std::size_t size, double gamma) : gamma_(gamma), memory_(size, 0.0) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "feedback: gamma must lie in [0, 1]");
  }
}

void FeedbackState::CheckShape(std::size_t n) const {
  if (n != memory_.size()) {
    Fail(ErrorCode::kShapeMismatch, "feedback: tensor has " + std::to_string(n) +
                                        " entries, memory has " + std::to_string(memory_.size()));
  }
}

std::vector<double> FeedbackState::CorrectedInput(std::span<const double> g) const {
  std::vector<double> out(g.size());
  CorrectedInput(g, out);
  return out;
}

void FeedbackState::CorrectedInput(std::span<const double> g, std::span<double> out) const {
  CheckShape(g.size());
  CheckShape(out.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] + gamma_ * memory_[i];
}

void FeedbackState::Update(std::span<const double> g, std::span<const double> g_hat) {
  CheckShape(g.size());
  CheckShape(g_hat.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double decayed = gamma_ * memory_[i];
    const double carried = decayed + g[i];
    memory_[i] = carried - g_hat[i];
  }
}

void FeedbackState::Reset() { std::fill(memory_.begin(), memory_.end(), 0.0); }

L1Norms Norms(std::span<const double> g, std::span<const double> m) {
  L1Norms n;
  for (double v : g) n.gradient += std::abs(v);
  for (double v : m) n.memory += std::abs(v);
  return n;
}

}  // namespace co3::feedback
