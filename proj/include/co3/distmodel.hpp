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

#ifndef CO3_DISTMODEL_HPP_
#define CO3_DISTMODEL_HPP_

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "co3/fpq.hpp"
#include "co3/gennorm.hpp"

namespace co3::dist {

enum class Family { kNormal, kLaplace, kGenNorm };

std::string_view FamilyName(Family family);

// Every family is carried as GenNorm parameters: Normal has beta = 2 and
// alpha = sqrt(2) * stdev, Laplace has beta = 1 and alpha = scale.
struct FitReport {
  Family family = Family::kGenNorm;
  GenNormParams params;
  double w2 = 0.0;

  // Scale in the family's own convention (stdev, diversity, or alpha).
  double NativeScale() const;
};

inline constexpr std::size_t kMinGenNormSamples = 100;

// mu = sample mean; beta maximizes the profile likelihood over [0.1, 5] with
// alpha(beta) = (beta / n * sum |x - mu|^beta)^(1 / beta).
GenNormParams FitGenNorm(std::span<const double> samples);
// Mean and population standard deviation.
GenNormParams FitNormal(std::span<const double> samples);
// Median and mean absolute deviation from the median.
GenNormParams FitLaplace(std::span<const double> samples);

// Profile log-likelihood of beta at location mu, alpha profiled out.
double ProfileLogLikelihood(std::span<const double> samples, double mu, double beta);

// One-dimensional W2 by quantile coupling on K = min(n, 4096) interior
// quantile levels (k - 0.5) / K.
double W2Distance(std::span<const double> samples, const GenNormParams& model);

// Fits a family and attaches its W2 distance to the sample.
FitReport FitFamily(std::span<const double> samples, Family family);

inline constexpr double kProbabilityFloor = 1e-12;

// Mass of each level's nearest-neighbour cell under `dist`; the outer cells
// absorb the saturating tails. Each entry is raised by kProbabilityFloor and
// the vector renormalized.
std::vector<double> CellProbabilities(const GenNormParams& dist, const fpq::FpFormat& format);

}  // namespace co3::dist

#endif  // CO3_DISTMODEL_HPP_
