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

#ifndef CO3_SPECFUN_HPP_
#define CO3_SPECFUN_HPP_

namespace co3::specfun {

// Regularized lower incomplete gamma P(s, x) = γ(s, x) / Γ(s), s > 0, x >= 0.
double GammaP(double s, double x);

// Regularized upper incomplete gamma Q(s, x) = 1 - P(s, x), computed without
// cancellation when P is close to one.
double GammaQ(double s, double x);

}  // namespace co3::specfun

#endif  // CO3_SPECFUN_HPP_
