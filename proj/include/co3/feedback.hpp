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

#ifndef CO3_FEEDBACK_HPP_
#define CO3_FEEDBACK_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace co3::feedback {

// Error-feedback memory of one (user, layer): m <- gamma * m + g - g_hat.
class FeedbackState {
 public:
  FeedbackState(std::size_t size, double gamma);

  double gamma() const { return gamma_; }
  std::span<const double> memory() const { return memory_; }
  std::size_t size() const { return memory_.size(); }

  // g + gamma * m, the quantizer input. Does not touch the memory.
  std::vector<double> CorrectedInput(std::span<const double> g) const;
  void CorrectedInput(std::span<const double> g, std::span<double> out) const;

  // Evaluated as (gamma * m + g) - g_hat for every entry.
  void Update(std::span<const double> g, std::span<const double> g_hat);

  void Reset();

 private:
  void CheckShape(std::size_t n) const;

  double gamma_;
  std::vector<double> memory_;
};

struct L1Norms {
  double gradient = 0.0;
  double memory = 0.0;
};

L1Norms Norms(std::span<const double> g, std::span<const double> m);
inline L1Norms Norms(const FeedbackState& state, std::span<const double> g) {
  return Norms(g, state.memory());
}

}  // namespace co3::feedback

#endif  // CO3_FEEDBACK_HPP_
