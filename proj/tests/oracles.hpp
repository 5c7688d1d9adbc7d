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

// Independent reference computations shared by the unit tests and the
// acceptance runner. None of these call into the code they check.

#ifndef CO3_TESTS_ORACLES_HPP_
#define CO3_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace co3::oracle {

// Every value representable by a (1, m, e) format: all bit patterns, with
// the two zeros merged.
inline std::vector<double> Levels(int mant_bits, int exp_bits, double bias) {
  std::vector<double> out;
  const int fracs = 1 << mant_bits;
  const int exps = 1 << exp_bits;
  for (int sign = 0; sign < 2; ++sign) {
    for (int e = 0; e < exps; ++e) {
      for (int f = 0; f < fracs; ++f) {
        double mag;
        if (e == 0) {
          mag = (static_cast<double>(f) / fracs) * std::pow(2.0, bias);
        } else {
          mag = (1.0 + static_cast<double>(f) / fracs) * std::pow(2.0, e - 1 + bias);
        }
        out.push_back(sign == 0 ? mag : -mag);
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Nearest level by linear scan; an exact tie keeps the lower level.
inline double NearestLevel(const std::vector<double>& levels, double x) {
  double best = levels.front();
  for (double l : levels) {
    if (std::abs(l - x) < std::abs(best - x)) best = l;
  }
  return best;
}

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
struct GaussLegendre {
  std::vector<double> x, w;
  explicit GaussLegendre(int n) : x(n), w(n) {
    for (int i = 0; i < n; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        const double dz = p1 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      x[i] = z;
      w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }
  double Integrate(const std::function<double(double)>& f, double a, double b) const {
    const double h = 0.5 * (b - a), c = 0.5 * (a + b);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(c + h * x[i]);
    return s * h;
  }
};

inline double GenNormPdf(double beta, double mu, double alpha, double x) {
  return beta / (2.0 * alpha * std::tgamma(1.0 / beta)) * std::exp(-std::pow(std::abs(x - mu) / alpha, beta));
}

inline double GenNormAlpha(double beta, double sigma) {
  return sigma * std::sqrt(std::exp(std::lgamma(1.0 / beta) - std::lgamma(3.0 / beta)));
}

// Integral of f over [a, b] split at the given breakpoints, with sub-panels
// refined geometrically away from mu so that peaked and long-tailed
// densities are resolved.
inline double PiecewiseIntegral(const std::function<double(double)>& f, std::vector<double> cuts,
                                const GaussLegendre& gl, int panels = 8) {
  std::sort(cuts.begin(), cuts.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    if (!(b > a)) continue;
    for (int p = 0; p < panels; ++p) {
      s += gl.Integrate(f, a + (b - a) * p / panels, a + (b - a) * (p + 1) / panels);
    }
  }
  return s;
}

// Breakpoints at mu, at mu +- alpha * 2^k for k in [-40, 40] and at the
// extra points, clipped to where pdf falls below 1e-300.
inline std::vector<double> DensityCuts(double beta, double mu, double alpha,
                                       const std::vector<double>& extra) {
  const double reach = alpha * std::pow(700.0, 1.0 / beta);
  std::vector<double> cuts{mu - reach, mu, mu + reach};
  for (int k = -40; k <= 40; ++k) {
    const double d = alpha * std::ldexp(1.0, k);
    if (d < reach) {
      cuts.push_back(mu - d);
      cuts.push_back(mu + d);
    }
  }
  for (double e : extra) {
    if (std::abs(e - mu) < reach) cuts.push_back(e);
  }
  return cuts;
}

// E[(Q(X) - X)^2] for X ~ GenNorm, Q = nearest level of the format with
// exponent bias `bias`, by piecewise Gauss-Legendre quadrature in x.
inline double QuantizationMse(double beta, double mu, double alpha, int mant_bits, int exp_bits,
                              double bias, const GaussLegendre& gl) {
  const auto levels = Levels(mant_bits, exp_bits, bias);
  std::vector<double> mids;
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) mids.push_back(0.5 * (levels[i] + levels[i + 1]));
  std::vector<double> extra = mids;
  extra.insert(extra.end(), levels.begin(), levels.end());
  const auto cuts = DensityCuts(beta, mu, alpha, extra);
  double total = 0.0;
  std::vector<double> sorted = cuts;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    const double a = sorted[i], b = sorted[i + 1];
    if (!(b > a)) continue;
    // Whole panel lies in one cell: pick the level at the centre.
    const double c = 0.5 * (a + b);
    std::size_t j = 0;
    while (j < mids.size() && c > mids[j]) ++j;
    const double level = levels[j];
    total += PiecewiseIntegral(
        [&](double x) {
          const double d = x - level;
          return d * d * GenNormPdf(beta, mu, alpha, x);
        },
        {a, b}, gl, 2);
  }
  return total;
}

// Optimal prefix-code expected length by exhaustive search over all length
// vectors with Kraft sum exactly 1 (a complete code is always optimal).
inline double BruteForceOptimalLength(const std::vector<double>& p) {
  const std::size_t n = p.size();
  if (n == 1) return p[0];  // a single symbol still costs one bit
  const int max_len = static_cast<int>(n) - 1;
  std::vector<int> len(n, 1);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::uint64_t kraft = 0;  // in units of 2^-max_len
    for (int l : len) kraft += std::uint64_t{1} << (max_len - l);
    if (kraft == (std::uint64_t{1} << max_len)) {
      double e = 0.0;
      for (std::size_t i = 0; i < n; ++i) e += p[i] * len[i];
      best = std::min(best, e);
    }
    std::size_t i = 0;
    while (i < n && len[i] == max_len) len[i++] = 1;
    if (i == n) break;
    ++len[i];
  }
  return best;
}

inline double Entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

}  // namespace co3::oracle

#endif  // CO3_TESTS_ORACLES_HPP_
