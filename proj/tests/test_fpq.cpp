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

#include <cmath>
#include <vector>

#include "co3/error.hpp"
#include "co3/fpq.hpp"
#include "co3/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using co3::ErrorCode;
using co3::fpq::FpFormat;
using co3::fpq::LevelTable;

namespace {

ErrorCode CodeOf(auto&& fn) {
  try {
    fn();
  } catch (const co3::Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

}  // namespace

TEST_CASE("fp4 levels at zero bias") {
  const auto levels = co3::fpq::EnumerateLevels(FpFormat::Fp4());
  const std::vector<double> expected = {-1.75, -1.5, -1.25, -1.0, -0.75, -0.5, -0.25, 0.0,
                                        0.25,  0.5,  0.75,  1.0,  1.25,  1.5,  1.75};
  CHECK(levels == expected);
}

TEST_CASE("level enumeration matches bit-pattern oracle") {
  for (int m = 0; m <= 4; ++m) {
    for (int e = 1; e <= 4; ++e) {
      for (double b : {-3.0, -0.5, 0.0, 0.3, 2.0}) {
        const FpFormat f{1, m, e, b};
        const auto got = co3::fpq::EnumerateLevels(f);
        const auto want = co3::oracle::Levels(m, e, b);
        REQUIRE(got.size() == want.size());
        CHECK(got.size() == f.LevelCount());
        CHECK(got.size() == (std::size_t{1} << (1 + m + e)) - 1);
        for (std::size_t i = 0; i < got.size(); ++i) {
          CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-15));
        }
      }
    }
  }
}

TEST_CASE("fp4 with exponent field of two bits has 31 levels") {
  CHECK(FpFormat{1, 2, 2, 0.0}.LevelCount() == 31);
}

TEST_CASE("quantize examples") {
  const LevelTable t(FpFormat::Fp4());
  std::vector<double> x = {0.3, 0.125, 0.375, 5.0, -5.0, -0.1, 0.0, -0.0};
  const auto q = co3::fpq::Quantize(x, t);
  const auto y = co3::fpq::Dequantize(q);
  CHECK(y[0] == 0.25);
  // Midpoint ties go to the even bit pattern: 0 (code 0) over 0.25 (code 1),
  // and 0.5 (code 2) over 0.25 (code 1).
  CHECK(y[1] == 0.0);
  CHECK(y[2] == 0.5);
  CHECK(y[3] == 1.75);
  CHECK(y[4] == -1.75);
  CHECK(y[5] == 0.0);
  CHECK(q.symbols[6] == t.zero_symbol());
  CHECK(q.symbols[7] == t.zero_symbol());
}

TEST_CASE("quantize reports saturation and rejects non-finite input") {
  const LevelTable t(FpFormat::Fp4());
  std::vector<double> x = {2.0, -3.0, 1.0};
  co3::fpq::QuantizeStats stats;
  co3::fpq::Quantize(x, t, {}, &stats);
  CHECK(stats.saturated == 2);
  std::vector<double> bad = {0.0, NAN};
  CHECK(CodeOf([&] { co3::fpq::Quantize(bad, t); }) == ErrorCode::kNonFinite);
  std::vector<double> inf = {INFINITY};
  CHECK(CodeOf([&] { co3::fpq::Quantize(inf, t); }) == ErrorCode::kNonFinite);
}

TEST_CASE("invalid formats are rejected") {
  CHECK(CodeOf([] { FpFormat{0, 2, 1, 0.0}.Validate(); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { FpFormat{1, -1, 1, 0.0}.Validate(); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { FpFormat{1, 2, 0, 0.0}.Validate(); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { FpFormat{1, 10, 6, 0.0}.Validate(); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { FpFormat{1, 2, 1, NAN}.Validate(); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("property: quantization returns the nearest level") {
  co3::Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = static_cast<int>(rng.Below(4));
    const int e = 1 + static_cast<int>(rng.Below(3));
    const double b = rng.Uniform(-4.0, 4.0);
    const FpFormat f{1, m, e, b};
    const LevelTable t(f);
    const auto levels = co3::oracle::Levels(m, e, b);
    std::vector<double> x(64);
    for (double& v : x) v = rng.Normal() * std::ldexp(1.0, static_cast<int>(b) + 1);
    const auto y = co3::fpq::Dequantize(co3::fpq::Quantize(x, t));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double best = co3::oracle::NearestLevel(levels, x[i]);
      CHECK(std::abs(y[i] - x[i]) <= std::abs(best - x[i]) * (1 + 1e-12) + 1e-300);
    }
  }
}

TEST_CASE("property: idempotent and monotone") {
  co3::Rng rng(11);
  const LevelTable t(FpFormat{1, 3, 2, -1.25});
  std::vector<double> x(2000);
  for (double& v : x) v = rng.Normal() * 3.0;
  std::sort(x.begin(), x.end());
  const auto y = co3::fpq::Dequantize(co3::fpq::Quantize(x, t));
  const auto z = co3::fpq::Dequantize(co3::fpq::Quantize(y, t));
  CHECK(y == z);
  for (std::size_t i = 1; i < y.size(); ++i) CHECK(y[i - 1] <= y[i]);
}

TEST_CASE("property: bias shift equals scaling by a power of two") {
  co3::Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    // Biases on a 1/1024 grid stay exact in f32 after a shift by k.
    const double b = std::ldexp(std::round(std::ldexp(rng.Uniform(-3.0, 3.0), 10)), -10);
    const int k = static_cast<int>(rng.Below(7)) - 3;
    const LevelTable t0(FpFormat{1, 2, 2, b});
    const LevelTable t1(FpFormat{1, 2, 2, b + k});
    std::vector<double> x(100);
    for (double& v : x) v = rng.Normal() * 4.0;
    std::vector<double> xs(x);
    for (double& v : xs) v = std::ldexp(v, k);
    const auto y0 = co3::fpq::Dequantize(co3::fpq::Quantize(x, t0));
    const auto y1 = co3::fpq::Dequantize(co3::fpq::Quantize(xs, t1));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y1[i] == std::ldexp(y0[i], k));
  }
}

TEST_CASE("expected squared error matches the quadrature oracle") {
  const co3::oracle::GaussLegendre gl(16);
  for (double beta : {0.5, 1.0, 1.6, 2.0, 3.0}) {
    for (double bias : {-2.0, -0.7, 0.0, 0.4}) {
      const auto p = co3::dist::GenNormParams::FromSigma(beta, 0.0, 1.0);
      const double got = co3::fpq::ExpectedSquaredError(p, FpFormat::Fp4(bias));
      const double want = co3::oracle::QuantizationMse(beta, 0.0, p.alpha, 2, 1, bias, gl);
      CHECK(got == doctest::Approx(want).epsilon(1e-7));
    }
  }
}

TEST_CASE("expected squared error matches Monte Carlo within three standard errors") {
  const auto p = co3::dist::GenNormParams::Normal(0.0, 1.0);
  const FpFormat f = FpFormat::Fp4(-0.5);
  const LevelTable t(f);
  co3::Rng rng(2024);
  const std::size_t n = 1000000;
  std::vector<double> x(n);
  for (double& v : x) v = rng.Normal();
  const auto y = co3::fpq::Dequantize(co3::fpq::Quantize(x, t));
  double mean = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (y[i] - x[i]) * (y[i] - x[i]);
    mean += d;
    sq += d * d;
  }
  mean /= n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(co3::fpq::ExpectedSquaredError(p, f) - mean) <= 3.0 * se);
}

TEST_CASE("optimize bias beats its neighbours and shifts with log2 sigma") {
  for (double beta : {0.5, 1.0, 2.0}) {
    const auto p1 = co3::dist::GenNormParams::FromSigma(beta, 0.0, 1.0);
    const auto r1 = co3::fpq::OptimizeBias(p1, FpFormat::Fp4());
    CHECK_FALSE(r1.degenerate);
    for (double d : {-0.01, 0.01}) {
      CHECK(co3::fpq::ExpectedSquaredError(p1, FpFormat::Fp4(r1.bias + d)) >= r1.objective);
    }
    const auto p4 = co3::dist::GenNormParams::FromSigma(beta, 0.0, 4.0);
    const auto r4 = co3::fpq::OptimizeBias(p4, FpFormat::Fp4());
    CHECK(r4.bias == doctest::Approx(r1.bias + 2.0).epsilon(1e-5));
  }
}

TEST_CASE("near-zero scale is flagged degenerate") {
  const co3::dist::GenNormParams p{2.0, 0.0, 1e-300};
  const auto r = co3::fpq::OptimizeBias(p, FpFormat::Fp4());
  CHECK(r.degenerate);
  CHECK(std::isfinite(r.bias));
}

TEST_CASE("bias polynomial scales as one over sigma") {
  for (double beta : {0.3, 0.8, 1.6}) {
    CHECK(co3::fpq::BiasPolynomial(beta, 2.0) ==
          doctest::Approx(0.5 * co3::fpq::BiasPolynomial(beta, 1.0)));
  }
}

TEST_CASE("bias polynomial reference values") {
  CHECK(co3::fpq::BiasPolynomial(1.0, 1.0) == doctest::Approx(0.65).epsilon(1e-12));
  CHECK(co3::fpq::BiasPolynomial(1.0, 2.0) == doctest::Approx(0.325).epsilon(1e-12));
}
