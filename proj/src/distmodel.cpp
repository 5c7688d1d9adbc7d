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

#include "co3/distmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "co3/error.hpp"

namespace co3::dist {

std::string_view FamilyName(Family family) {
  switch (family) {
    case Family::kNormal: return "normal";
    case Family::kLaplace: return "laplace";
    case Family::kGenNorm: return "gennorm";
  }
  return "unknown";
}

double FitReport::NativeScale() const {
  return family == Family::kNormal ? params.alpha / std::sqrt(2.0) : params.alpha;
}

namespace {

double Mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

void CheckSamples(std::span<const double> x, std::size_t min_count) {
  if (x.size() < min_count) {
    Fail(ErrorCode::kInsufficientData, "fit: need at least " + std::to_string(min_count) +
                                           " samples, got " + std::to_string(x.size()));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      Fail(ErrorCode::kNonFinite, "fit: non-finite sample at index " + std::to_string(i));
    }
  }
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) Fail(ErrorCode::kDegenerate, "fit: constant sample");
}

// log of (1/n) sum |x - mu|^beta, computed relative to the largest deviation.
struct DeviationPowers {
  std::vector<double> log_ratio;  // log(|x - mu| / max)
  double log_max = 0.0;

  DeviationPowers(std::span<const double> x, double mu) : log_ratio(x.size()) {
    double max_dev = 0.0;
    for (double v : x) max_dev = std::max(max_dev, std::abs(v - mu));
    log_max = std::log(max_dev);
    for (std::size_t i = 0; i < x.size(); ++i) {
      log_ratio[i] = std::log(std::abs(x[i] - mu) / max_dev);
    }
  }

  double LogMeanPower(double beta) const {
    double s = 0.0;
    for (double r : log_ratio) s += std::exp(beta * r);
    return beta * log_max + std::log(s / static_cast<double>(log_ratio.size()));
  }
};

double ProfileLL(const DeviationPowers& dev, double beta, double n) {
  const double log_alpha = (std::log(beta) + dev.LogMeanPower(beta)) / beta;
  return n * (std::log(beta) - std::log(2.0) - log_alpha - std::lgamma(1.0 / beta)) - n / beta;
}

double AlphaFor(const DeviationPowers& dev, double beta) {
  return std::exp((std::log(beta) + dev.LogMeanPower(beta)) / beta);
}

}  // namespace

double ProfileLogLikelihood(std::span<const double> samples, double mu, double beta) {
  const DeviationPowers dev(samples, mu);
  return ProfileLL(dev, beta, static_cast<double>(samples.size()));
}

GenNormParams FitGenNorm(std::span<const double> samples) {
  CheckSamples(samples, kMinGenNormSamples);
  const double mu = Mean(samples);
  const DeviationPowers dev(samples, mu);
  const double n = static_cast<double>(samples.size());

  constexpr double kLo = 0.1;
  constexpr double kHi = 5.0;
  constexpr int kGrid = 50;
  const double step = (kHi - kLo) / kGrid;
  int best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= kGrid; ++k) {
    const double ll = ProfileLL(dev, kLo + k * step, n);
    if (ll > best_ll) {
      best_ll = ll;
      best = k;
    }
  }
  double a = kLo + std::max(0, best - 1) * step;
  double b = kLo + std::min(kGrid, best + 1) * step;
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = ProfileLL(dev, c, n);
  double fd = ProfileLL(dev, d, n);
  while (b - a > 1e-7) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = ProfileLL(dev, c, n);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = ProfileLL(dev, d, n);
    }
  }
  double beta = 0.5 * (a + b);
  if (ProfileLL(dev, beta, n) < best_ll) beta = kLo + best * step;
  return {beta, mu, AlphaFor(dev, beta)};
}

GenNormParams FitNormal(std::span<const double> samples) {
  CheckSamples(samples, 2);
  const double mean = Mean(samples);
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  return GenNormParams::Normal(mean, std::sqrt(ss / static_cast<double>(samples.size())));
}

GenNormParams FitLaplace(std::span<const double> samples) {
  CheckSamples(samples, 2);
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median =
      n % 2 == 1 ? sorted[n / 2] : 0.5 * sorted[n / 2 - 1] + 0.5 * sorted[n / 2];
  double dev = 0.0;
  for (double v : sorted) dev += std::abs(v - median);
  dev /= static_cast<double>(n);
  if (!(dev > 0.0)) Fail(ErrorCode::kDegenerate, "fit: zero absolute deviation");
  return GenNormParams::Laplace(median, dev);
}

double W2Distance(std::span<const double> samples, const GenNormParams& model) {
  model.Validate();
  if (samples.empty()) Fail(ErrorCode::kInsufficientData, "w2: empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const std::size_t k_count = std::min<std::size_t>(n, 4096);
  double acc = 0.0;
  for (std::size_t k = 1; k <= k_count; ++k) {
    const double q = (static_cast<double>(k) - 0.5) / static_cast<double>(k_count);
    const auto idx = std::min(n - 1, static_cast<std::size_t>(q * static_cast<double>(n)));
    const double diff = sorted[idx] - Quantile(model, q);
    acc += diff * diff;
  }
  return std::sqrt(acc / static_cast<double>(k_count));
}

FitReport FitFamily(std::span<const double> samples, Family family) {
  FitReport r;
  r.family = family;
  switch (family) {
    case Family::kNormal: r.params = FitNormal(samples); break;
    case Family::kLaplace: r.params = FitLaplace(samples); break;
    case Family::kGenNorm: r.params = FitGenNorm(samples); break;
  }
  r.w2 = W2Distance(samples, r.params);
  return r;
}

std::vector<double> CellProbabilities(const GenNormParams& dist, const fpq::FpFormat& format) {
  dist.Validate();
  const fpq::LevelTable table(format);
  const auto mids = table.midpoints();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> probs(table.size());
  double total = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double lo = j == 0 ? -kInf : mids[j - 1];
    const double hi = j == mids.size() ? kInf : mids[j];
    double mass;
    if (hi <= dist.mu) {
      mass = Cdf(dist, hi) - Cdf(dist, lo);
    } else if (lo >= dist.mu) {
      mass = Sf(dist, lo) - Sf(dist, hi);
    } else {
      mass = 1.0 - Cdf(dist, lo) - Sf(dist, hi);
    }
    probs[j] = std::max(0.0, mass) + kProbabilityFloor;
    total += probs[j];
  }
  for (double& p : probs) p /= total;
  return probs;
}

}  // namespace co3::dist
