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

#include "co3/gennorm.hpp"

#include <cmath>
#include <limits>

#include "co3/error.hpp"
#include "co3/specfun.hpp"

namespace co3::dist {

double GenNormParams::Sigma() const {
  return alpha * std::exp(0.5 * (std::lgamma(3.0 / beta) - std::lgamma(1.0 / beta)));
}

bool GenNormParams::Valid() const {
  return std::isfinite(beta) && std::isfinite(mu) && std::isfinite(alpha) &&
         beta > 0.0 && alpha > 0.0;
}

void GenNormParams::Validate() const {
  if (!Valid()) {
    Fail(ErrorCode::kDegenerate, "GenNorm parameters must have finite beta > 0 and alpha > 0");
  }
}

GenNormParams GenNormParams::FromSigma(double beta, double mu, double sigma) {
  GenNormParams p{beta, mu, 1.0};
  p.alpha = sigma / p.Sigma();
  return p;
}

GenNormParams GenNormParams::Normal(double mean, double stdev) {
  return {2.0, mean, stdev * std::sqrt(2.0)};
}

GenNormParams GenNormParams::Laplace(double location, double scale) {
  return {1.0, location, scale};
}

double Pdf(const GenNormParams& p, double x) {
  const double z = std::abs(x - p.mu) / p.alpha;
  return p.beta / (2.0 * p.alpha * std::tgamma(1.0 / p.beta)) * std::exp(-std::pow(z, p.beta));
}

namespace {

// Mass of one tail beyond distance d >= 0 from mu.
double TailMass(const GenNormParams& p, double d) {
  if (d <= 0.0) return 0.5;
  const double z = std::pow(d / p.alpha, p.beta);
  return 0.5 * specfun::GammaQ(1.0 / p.beta, z);
}

}  // namespace

double Cdf(const GenNormParams& p, double x) {
  if (x == -std::numeric_limits<double>::infinity()) return 0.0;
  if (x == std::numeric_limits<double>::infinity()) return 1.0;
  const double d = x - p.mu;
  return d < 0.0 ? TailMass(p, -d) : 1.0 - TailMass(p, d);
}

double Sf(const GenNormParams& p, double x) {
  if (x == -std::numeric_limits<double>::infinity()) return 1.0;
  if (x == std::numeric_limits<double>::infinity()) return 0.0;
  const double d = x - p.mu;
  return d > 0.0 ? TailMass(p, d) : 1.0 - TailMass(p, -d);
}

double Quantile(const GenNormParams& p, double q) {
  p.Validate();
  if (!(q > 0.0 && q < 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "quantile level must lie in (0, 1)");
  }
  if (q == 0.5) return p.mu;
  // Solve TailMass(d) = tail for the distance d from mu.
  const double tail = q < 0.5 ? q : 1.0 - q;
  const double scale = p.Sigma();
  double lo = 0.0;
  double hi = scale;
  while (TailMass(p, hi) > tail) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) Fail(ErrorCode::kDegenerate, "quantile bracket overflow");
  }
  // Bisection, accelerated by Newton steps that stay inside the bracket.
  double d = 0.5 * (lo + hi);
  const double floor_tol = scale * 1e-14;
  for (int iter = 0; iter < 400; ++iter) {
    const double f = TailMass(p, d) - tail;
    if (f > 0.0) {
      lo = d;
    } else if (f < 0.0) {
      hi = d;
    } else {
      break;
    }
    if (hi - lo <= 1e-10 * hi || hi - lo <= floor_tol) break;
    const double slope = -Pdf(p, p.mu + d);
    double next = slope != 0.0 ? d - f / slope : lo;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    d = next;
  }
  return q < 0.5 ? p.mu - d : p.mu + d;
}

double UpperPartialMoment(const GenNormParams& p, int k, double lo, double hi) {
  if (k < 0 || k > 2 || lo < p.mu || hi < lo) {
    Fail(ErrorCode::kInvalidArgument, "partial moment: need k in [0,2] and mu <= lo <= hi");
  }
  if (hi == lo) return 0.0;
  const double s = (k + 1.0) / p.beta;
  const double zlo = std::pow((lo - p.mu) / p.alpha, p.beta);
  const double zhi = std::isinf(hi) ? std::numeric_limits<double>::infinity()
                                    : std::pow((hi - p.mu) / p.alpha, p.beta);
  const double factor =
      0.5 * std::exp(k * std::log(p.alpha) + std::lgamma(s) - std::lgamma(1.0 / p.beta));
  double diff;
  if (zlo > s) {
    diff = specfun::GammaQ(s, zlo) - specfun::GammaQ(s, zhi);
  } else {
    diff = specfun::GammaP(s, zhi) - specfun::GammaP(s, zlo);
  }
  return factor * diff;
}

}  // namespace co3::dist
