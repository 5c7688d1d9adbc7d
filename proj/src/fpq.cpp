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

#include "co3/fpq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "co3/error.hpp"

namespace co3::fpq {

std::size_t FpFormat::LevelCount() const {
  return (std::size_t{1} << TotalBits()) - 1;
}

void FpFormat::Validate() const {
  if (sign_bits != 1) Fail(ErrorCode::kInvalidArgument, "fp format: sign_bits must be 1");
  if (mant_bits < 0) Fail(ErrorCode::kInvalidArgument, "fp format: mant_bits must be >= 0");
  if (exp_bits < 1) Fail(ErrorCode::kInvalidArgument, "fp format: exp_bits must be >= 1");
  if (mant_bits + exp_bits > 15) {
    Fail(ErrorCode::kInvalidArgument, "fp format: mant_bits + exp_bits must be <= 15");
  }
  if (!std::isfinite(bias) || std::abs(bias) > 256.0) {
    Fail(ErrorCode::kInvalidArgument, "fp format: bias must be finite with |bias| <= 256");
  }
}

namespace {

struct Magnitude {
  double value;
  bool even_code;
};

// Positive representable magnitudes in ascending order (zero excluded).
std::vector<Magnitude> PositiveMagnitudes(const FpFormat& format) {
  format.Validate();
  const double whole = std::floor(format.bias);
  const double frac_scale = std::exp2(format.bias - whole);
  const int shift = static_cast<int>(whole);
  const int fractions = 1 << format.mant_bits;
  const int exponents = 1 << format.exp_bits;
  std::vector<Magnitude> out;
  out.reserve(static_cast<std::size_t>(fractions) * exponents - 1);
  for (int e = 0; e < exponents; ++e) {
    for (int f = 0; f < fractions; ++f) {
      if (e == 0 && f == 0) continue;
      const double significand =
          (e == 0 ? 0.0 : 1.0) + std::ldexp(static_cast<double>(f), -format.mant_bits);
      const int exponent = (e == 0 ? 0 : e - 1) + shift;
      const unsigned code = (static_cast<unsigned>(e) << format.mant_bits) | static_cast<unsigned>(f);
      out.push_back({std::ldexp(significand * frac_scale, exponent), (code & 1u) == 0});
    }
  }
  return out;
}

}  // namespace

std::vector<double> EnumerateLevels(const FpFormat& format) {
  const LevelTable table(format);
  return {table.values().begin(), table.values().end()};
}

LevelTable::LevelTable(const FpFormat& format) : format_(format) {
  const auto mags = PositiveMagnitudes(format);
  levels_.reserve(2 * mags.size() + 1);
  even_code_.reserve(2 * mags.size() + 1);
  for (auto it = mags.rbegin(); it != mags.rend(); ++it) {
    levels_.push_back(-it->value);
    even_code_.push_back(it->even_code);
  }
  levels_.push_back(0.0);
  even_code_.push_back(true);
  for (const auto& m : mags) {
    levels_.push_back(m.value);
    even_code_.push_back(m.even_code);
  }
  midpoints_.resize(levels_.size() - 1);
  for (std::size_t i = 0; i + 1 < levels_.size(); ++i) {
    midpoints_[i] = 0.5 * levels_[i] + 0.5 * levels_[i + 1];
  }
}

std::uint16_t LevelTable::Nearest(double x) const {
  const auto it = std::lower_bound(midpoints_.begin(), midpoints_.end(), x);
  const auto i = static_cast<std::size_t>(it - midpoints_.begin());
  if (i == midpoints_.size()) return static_cast<std::uint16_t>(levels_.size() - 1);
  if (*it == x) return static_cast<std::uint16_t>(even_code_[i] ? i : i + 1);
  return static_cast<std::uint16_t>(i);
}

QuantizedTensor Quantize(std::span<const double> x, const LevelTable& table,
                         std::vector<std::size_t> shape, QuantizeStats* stats) {
  QuantizedTensor q;
  q.format = table.format();
  q.shape = shape.empty() ? std::vector<std::size_t>{x.size()} : std::move(shape);
  q.symbols.resize(x.size());
  const double top = table.max_magnitude();
  std::size_t saturated = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      Fail(ErrorCode::kNonFinite, "quantize: non-finite entry at index " + std::to_string(i));
    }
    if (std::abs(x[i]) > top) ++saturated;
    q.symbols[i] = table.Nearest(x[i]);
  }
  if (stats != nullptr) stats->saturated = saturated;
  return q;
}

QuantizedTensor Quantize(std::span<const double> x, const FpFormat& format,
                         std::vector<std::size_t> shape, QuantizeStats* stats) {
  return Quantize(x, LevelTable(format), std::move(shape), stats);
}

void Dequantize(const LevelTable& table, std::span<const std::uint16_t> symbols,
                std::span<double> out) {
  if (symbols.size() != out.size()) {
    Fail(ErrorCode::kShapeMismatch, "dequantize: output size differs from symbol count");
  }
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i] >= table.size()) {
      Fail(ErrorCode::kOutOfRange, "dequantize: symbol out of range at index " + std::to_string(i));
    }
    out[i] = table.value(symbols[i]);
  }
}

std::vector<double> Dequantize(const QuantizedTensor& q) {
  std::vector<double> out(q.symbols.size());
  Dequantize(LevelTable(q.format), q.symbols, out);
  return out;
}

namespace {

// Integral of (x - level)^2 * pdf over [lo, hi] with both ends on the same
// side of mu, by partial moments about mu.
double CellMomentClosedForm(const dist::GenNormParams& p, double lo, double hi, double level) {
  double a = lo - p.mu;
  double b = hi - p.mu;
  double d = level - p.mu;
  if (b <= 0.0) {
    // Reflect about mu.
    const double na = -b;
    b = -a;
    a = na;
    d = -d;
  }
  const double m0 = dist::UpperPartialMoment(p, 0, p.mu + a, p.mu + b);
  const double m1 = dist::UpperPartialMoment(p, 1, p.mu + a, p.mu + b);
  const double m2 = dist::UpperPartialMoment(p, 2, p.mu + a, p.mu + b);
  return m2 - 2.0 * d * m1 + d * d * m0;
}

// Closed-form contribution of (edge, +inf) on the right or (-inf, edge) on
// the left, split at every decision boundary it contains. Level j occupies
// the cell between midpoints j-1 and j.
double TailContribution(const dist::GenNormParams& p, const LevelTable& table, double edge,
                        bool right) {
  const auto mids = table.midpoints();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double total = 0.0;
  if (right) {
    auto j = static_cast<std::size_t>(std::upper_bound(mids.begin(), mids.end(), edge) - mids.begin());
    double lo = edge;
    for (; j <= mids.size(); ++j) {
      const double hi = j == mids.size() ? kInf : mids[j];
      total += CellMomentClosedForm(p, lo, hi, table.value(static_cast<std::uint16_t>(j)));
      lo = hi;
    }
  } else {
    auto j = static_cast<std::size_t>(std::lower_bound(mids.begin(), mids.end(), edge) - mids.begin());
    double hi = edge;
    while (true) {
      const double lo = j == 0 ? -kInf : mids[j - 1];
      total += CellMomentClosedForm(p, lo, hi, table.value(static_cast<std::uint16_t>(j)));
      if (j == 0) break;
      hi = lo;
      --j;
    }
  }
  return total;
}

}  // namespace

double ExpectedSquaredError(const dist::GenNormParams& dist, const FpFormat& format,
                            const BiasSearchConfig& search) {
  dist.Validate();
  if (search.quadrature_nodes < 2 || !(search.span_sigmas > 0.0)) {
    Fail(ErrorCode::kInvalidArgument, "bias search: quadrature settings must be positive");
  }
  const LevelTable table(format);
  const double sigma = dist.Sigma();
  const double left = dist.mu - search.span_sigmas * sigma;
  const double right = dist.mu + search.span_sigmas * sigma;

  std::vector<double> breaks{left};
  for (double m : table.midpoints()) {
    if (m > left && m < right) breaks.push_back(m);
  }
  breaks.push_back(dist.mu);
  breaks.push_back(right);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  const double norm = dist.beta / (2.0 * dist.alpha * std::tgamma(1.0 / dist.beta));
  auto density = [&](double x) {
    return norm * std::exp(-std::pow(std::abs(x - dist.mu) / dist.alpha, dist.beta));
  };

  const double width = right - left;
  double interior = 0.0;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s];
    const double b = breaks[s + 1];
    const double level = table.value(table.Nearest(0.5 * (a + b)));
    int n = static_cast<int>(std::lround(search.quadrature_nodes * (b - a) / width));
    n = std::max(2, n + (n & 1));
    const double h = (b - a) / n;
    auto f = [&](double x) { return (x - level) * (x - level) * density(x); };
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i) acc += (i & 1 ? 4.0 : 2.0) * f(a + i * h);
    interior += acc * h / 3.0;
  }
  return interior + TailContribution(dist, table, right, true) +
         TailContribution(dist, table, left, false);
}

BiasResult OptimizeBias(const dist::GenNormParams& dist, const FpFormat& format,
                        const BiasSearchConfig& search) {
  format.Validate();
  if (!(search.half_range > 0.0) || !(search.grid_step > 0.0) || !(search.tolerance > 0.0)) {
    Fail(ErrorCode::kInvalidArgument, "bias search: range, step and tolerance must be positive");
  }
  if (!dist.Valid() || dist.alpha < search.alpha_floor) {
    return {0.0, 0.0, true};
  }
  FpFormat probe = format;
  auto objective = [&](double b) {
    probe.bias = b;
    return ExpectedSquaredError(dist, probe, search);
  };

  // Centre the grid where the largest normal exponent meets sigma.
  const int top_exponent = (1 << format.exp_bits) - 2;
  const double centre = static_cast<double>(std::ilogb(dist.Sigma()) - top_exponent + 1);
  const int half = static_cast<int>(std::ceil(search.half_range / search.grid_step));
  int best_k = -half;
  double best_value = std::numeric_limits<double>::infinity();
  for (int k = -half; k <= half; ++k) {
    const double v = objective(centre + k * search.grid_step);
    if (v < best_value) {
      best_value = v;
      best_k = k;
    }
  }
  double best_bias = centre + best_k * search.grid_step;

  // Golden section on the two grid cells around the grid argmin.
  constexpr double kInvPhi = 0.6180339887498949;
  double a = centre + (best_k - 1) * search.grid_step;
  double b = centre + (best_k + 1) * search.grid_step;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  while (b - a > search.tolerance) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = objective(d);
    }
  }
  const double refined = 0.5 * (a + b);
  const double refined_value = objective(refined);
  if (refined_value <= best_value) {
    best_bias = refined;
    best_value = refined_value;
  }
  return {best_bias, best_value, false};
}

double BiasPolynomial(double beta, double sigma) {
  if (!(beta > 0.0) || !(sigma > 0.0)) {
    Fail(ErrorCode::kInvalidArgument, "bias polynomial: beta and sigma must be positive");
  }
  const double b = beta;
  return (0.46 - 2.85 * b + 5.37 * b * b - 2.85 * b * b * b + 0.52 * b * b * b * b) / sigma;
}

}  // namespace co3::fpq
