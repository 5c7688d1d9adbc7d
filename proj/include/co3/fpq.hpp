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

#ifndef CO3_FPQ_HPP_
#define CO3_FPQ_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "co3/gennorm.hpp"

namespace co3::fpq {

// Low-bit floating-point grid: 1 sign bit, mant_bits fraction bits and
// exp_bits exponent bits, with a real-valued exponent bias. With exponent
// field E and fraction field f:
//   E >= 1: +-(1 + f / 2^mant) * 2^(E - 1 + bias)
//   E == 0: +-(f / 2^mant) * 2^bias            (graded underflow)
// +0 and -0 share one level, so there are 2^(1 + mant + exp) - 1 levels.
struct FpFormat {
  int sign_bits = 1;
  int mant_bits = 2;
  int exp_bits = 1;
  double bias = 0.0;

  int TotalBits() const { return sign_bits + mant_bits + exp_bits; }
  std::size_t LevelCount() const;
  // sign_bits == 1, mant_bits >= 0, exp_bits >= 1, mant + exp <= 15, finite bias.
  void Validate() const;

  static FpFormat Fp4(double bias = 0.0) { return {1, 2, 1, bias}; }

  bool operator==(const FpFormat&) const = default;
};

// Ascending list of every representable value.
std::vector<double> EnumerateLevels(const FpFormat& format);

// Precomputed levels and decision boundaries for one format.
class LevelTable {
 public:
  explicit LevelTable(const FpFormat& format);

  const FpFormat& format() const { return format_; }
  std::span<const double> values() const { return levels_; }
  std::size_t size() const { return levels_.size(); }
  std::uint16_t zero_symbol() const { return static_cast<std::uint16_t>(levels_.size() / 2); }
  double max_magnitude() const { return levels_.back(); }
  double value(std::uint16_t symbol) const { return levels_[symbol]; }

  // Midpoints between adjacent levels; midpoints()[i] separates level i and i+1.
  std::span<const double> midpoints() const { return midpoints_; }

  // Nearest level for a finite input. Exact midpoints go to the level whose
  // bit pattern (E << mant | f) is even, which for mant >= 1 is the level with
  // even fraction field. Inputs beyond the extreme levels saturate.
  std::uint16_t Nearest(double x) const;

 private:
  FpFormat format_;
  std::vector<double> levels_;
  std::vector<double> midpoints_;
  std::vector<bool> even_code_;
};

struct QuantizedTensor {
  std::vector<std::uint16_t> symbols;
  FpFormat format;
  std::vector<std::size_t> shape;
};

struct QuantizeStats {
  std::size_t saturated = 0;  // entries with |x| above the largest level
};

// Rejects non-finite entries with kNonFinite naming the index.
QuantizedTensor Quantize(std::span<const double> x, const LevelTable& table,
                         std::vector<std::size_t> shape = {}, QuantizeStats* stats = nullptr);
QuantizedTensor Quantize(std::span<const double> x, const FpFormat& format,
                         std::vector<std::size_t> shape = {}, QuantizeStats* stats = nullptr);

std::vector<double> Dequantize(const QuantizedTensor& q);
void Dequantize(const LevelTable& table, std::span<const std::uint16_t> symbols,
                std::span<double> out);

struct BiasSearchConfig {
  double half_range = 6.0;     // grid spans log2(sigma) +- half_range
  double grid_step = 0.05;
  double tolerance = 1e-7;     // golden-section bracket width
  int quadrature_nodes = 4096;
  double span_sigmas = 8.0;    // quadrature covers mu +- span_sigmas * sigma
  double alpha_floor = 1e-30;
};

struct BiasResult {
  double bias = 0.0;
  double objective = 0.0;  // expected squared error at `bias`
  bool degenerate = false;
};

// E[(Q(G) - G)^2] for G ~ dist with the grid `format` (bias included).
// Composite Simpson inside mu +- span_sigmas*sigma, split at every decision
// boundary; the mass outside the span is added in closed form.
double ExpectedSquaredError(const dist::GenNormParams& dist, const FpFormat& format,
                            const BiasSearchConfig& search = {});

// Bias minimizing ExpectedSquaredError: grid argmin, then golden section on the
// neighbouring cells. A distribution with alpha below the floor yields
// {bias = 0, degenerate = true}.
BiasResult OptimizeBias(const dist::GenNormParams& dist, const FpFormat& format,
                        const BiasSearchConfig& search = {});

// (0.46 - 2.85 b + 5.37 b^2 - 2.85 b^3 + 0.52 b^4) / sigma.
double BiasPolynomial(double beta, double sigma);

}  // namespace co3::fpq

#endif  // CO3_FPQ_HPP_
