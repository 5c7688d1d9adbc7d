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

#include "co3/specfun.hpp"

#include <cmath>
#include <limits>

#include "co3/error.hpp"

namespace co3::specfun {
namespace {

constexpr int kMaxIter = 10000;
constexpr double kEps = 1e-16;

// Power series for P(s, x); converges fast for x < s + 1.
double SeriesP(double s, double x) {
  double term = 1.0 / s;
  double sum = term;
  for (int n = 1; n < kMaxIter; ++n) {
    term *= x / (s + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + s * std::log(x) - std::lgamma(s));
}

// Modified Lentz continued fraction for Q(s, x); used for x >= s + 1.
double ContinuedFractionQ(double s, double x) {
  constexpr double kTiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - s;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + s * std::log(x) - std::lgamma(s)) * h;
}

void Check(double s, double x) {
  if (!(s > 0.0) || !(x >= 0.0) || std::isnan(x)) {
    Fail(ErrorCode::kInvalidArgument, "incomplete gamma: require s > 0, x >= 0");
  }
}

}  // namespace

double GammaP(double s, double x) {
  Check(s, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < s + 1.0) return SeriesP(s, x);
  return 1.0 - ContinuedFractionQ(s, x);
}

double GammaQ(double s, double x) {
  Check(s, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < s + 1.0) return 1.0 - SeriesP(s, x);
  return ContinuedFractionQ(s, x);
}

}  // namespace co3::specfun
