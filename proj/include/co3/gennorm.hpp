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

#ifndef CO3_GENNORM_HPP_
#define CO3_GENNORM_HPP_

namespace co3::dist {

// Generalized normal density beta / (2 alpha Gamma(1/beta)) *
// exp(-(|x - mu| / alpha)^beta). beta = 2 is a Normal with variance
// alpha^2 / 2, beta = 1 a Laplace with diversity alpha.
struct GenNormParams {
  double beta = 2.0;
  double mu = 0.0;
  double alpha = 1.0;

  // Standard deviation alpha * sqrt(Gamma(3/beta) / Gamma(1/beta)).
  double Sigma() const;
  bool Valid() const;
  // Throws kDegenerate for non-positive or non-finite alpha/beta.
  void Validate() const;

  static GenNormParams FromSigma(double beta, double mu, double sigma);
  static GenNormParams Normal(double mean, double stdev);
  static GenNormParams Laplace(double location, double scale);
};

double Pdf(const GenNormParams& p, double x);
double Cdf(const GenNormParams& p, double x);
// Upper tail 1 - Cdf without cancellation.
double Sf(const GenNormParams& p, double x);
// Inverse CDF by bisection on a bracketing interval, to 1e-10 relative
// tolerance in x. q must lie in (0, 1).
double Quantile(const GenNormParams& p, double q);

// Integral of (x - mu)^k * pdf(x) over [lo, hi] for mu <= lo <= hi (hi may be
// +inf); k in {0, 1, 2}. Closed form through the incomplete gamma function.
double UpperPartialMoment(const GenNormParams& p, int k, double lo, double hi);

}  // namespace co3::dist

#endif  // CO3_GENNORM_HPP_
