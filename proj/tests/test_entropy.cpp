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
#include <cstring>
#include <vector>

#include "co3/distmodel.hpp"
#include "co3/entropy.hpp"
#include "co3/error.hpp"
#include "co3/fpq.hpp"
#include "co3/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using co3::ErrorCode;
using co3::entropy::Block;
using co3::entropy::HuffmanCodebook;

namespace {

ErrorCode CodeOf(auto&& fn) {
  try {
    fn();
  } catch (const co3::Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

std::vector<double> RandomDistribution(co3::Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  double s = 0.0;
  for (double& v : p) {
    v = -std::log(1.0 - rng.Uniform()) * std::pow(rng.Uniform(), 3.0);
    s += v;
  }
  for (double& v : p) v /= s;
  return p;
}

co3::fpq::QuantizedTensor Symbols(std::vector<std::uint16_t> s, co3::fpq::FpFormat f) {
  co3::fpq::QuantizedTensor q;
  q.symbols = std::move(s);
  q.format = f;
  return q;
}

bool PrefixFree(const HuffmanCodebook& cb) {
  for (std::size_t a = 0; a < cb.level_count(); ++a) {
    for (std::size_t b = 0; b < cb.level_count(); ++b) {
      if (a == b || cb.length(a) > cb.length(b)) continue;
      if ((cb.codeword(b) >> (cb.length(b) - cb.length(a))) == cb.codeword(a)) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("huffman on a dyadic distribution") {
  const std::vector<double> p = {0.5, 0.25, 0.25};
  const auto cb = co3::entropy::BuildCodebook(p);
  CHECK(cb.lengths() == std::vector<std::uint8_t>{1, 2, 2});
  CHECK(co3::entropy::ExpectedLength(cb, p) == doctest::Approx(1.5));
  CHECK(cb.codeword(0) == 0b0);
  CHECK(cb.codeword(1) == 0b10);
  CHECK(cb.codeword(2) == 0b11);
}

TEST_CASE("uniform 16-symbol distribution yields 4-bit codes") {
  const std::vector<double> p(16, 1.0 / 16);
  const auto cb = co3::entropy::BuildCodebook(p);
  for (auto l : cb.lengths()) CHECK(l == 4);
}

TEST_CASE("huffman matches exhaustive search on small alphabets") {
  co3::Rng rng(1);
  for (std::size_t n = 2; n <= 5; ++n) {
    for (int trial = 0; trial < 300; ++trial) {
      const auto p = RandomDistribution(rng, n);
      const auto cb = co3::entropy::BuildCodebook(p);
      CHECK(co3::entropy::ExpectedLength(cb, p) ==
            doctest::Approx(co3::oracle::BruteForceOptimalLength(p)).epsilon(1e-12));
    }
  }
}

TEST_CASE("property: entropy bounds, Kraft equality and prefix freedom") {
  co3::Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = RandomDistribution(rng, 2 + rng.Below(40));
    const auto cb = co3::entropy::BuildCodebook(p);
    const double h = co3::oracle::Entropy(p);
    const double e = co3::entropy::ExpectedLength(cb, p);
    CHECK(h <= e + 1e-12);
    CHECK(e < h + 1.0);
    CHECK(co3::entropy::KraftEqualsOne(cb.lengths()));
    CHECK(PrefixFree(cb));
    CHECK(co3::entropy::EntropyBits(p) == doctest::Approx(h).epsilon(1e-12));
  }
}

TEST_CASE("codebook construction errors") {
  CHECK(CodeOf([] { co3::entropy::BuildCodebook(std::vector<double>{1.0}); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { co3::entropy::BuildCodebook(std::vector<double>{0.5, 0.6}); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { co3::entropy::BuildCodebook(std::vector<double>{1.5, -0.5}); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { HuffmanCodebook::FromLengths({1, 2}); }) == ErrorCode::kCorrupt);
  CHECK(CodeOf([] { HuffmanCodebook::FromLengths({1, 1, 1}); }) == ErrorCode::kCorrupt);
  CHECK(CodeOf([] { HuffmanCodebook::FromLengths({0, 1}); }) == ErrorCode::kCorrupt);
}

TEST_CASE("canonical codes are a function of the lengths") {
  const auto cb = HuffmanCodebook::FromLengths({3, 1, 3, 2});
  CHECK(cb.codeword(1) == 0b0);
  CHECK(cb.codeword(3) == 0b10);
  CHECK(cb.codeword(0) == 0b110);
  CHECK(cb.codeword(2) == 0b111);
  CHECK(cb.Match(0b10, 2) == 3);
  CHECK(cb.Match(0b11, 2) == -1);
}

TEST_CASE("encode example and wire layout") {
  const auto f = co3::fpq::FpFormat::Fp4();
  std::vector<double> p(15, 0.0);
  p[7] = 0.5;
  p[8] = 0.25;
  p[6] = 0.25;
  for (double& v : p) v = (v + 1e-12) / (1.0 + 15e-12);
  const auto cb = co3::entropy::BuildCodebook(p);
  const auto block = co3::entropy::Encode(Symbols({7, 7, 8, 6}, f), cb, {3, 77, 2});
  CHECK(block.symbol_count == 4);
  const std::uint64_t bits = 2 * cb.length(7) + cb.length(8) + cb.length(6);
  CHECK(block.PayloadBits() == bits);
  CHECK(block.payload.size() == (bits + 7) / 8);
  const auto bytes = block.Serialize();
  CHECK(bytes.size() == Block::kFixedHeaderBytes + 15 + block.payload.size());
  CHECK(std::memcmp(bytes.data(), "CO3\x01", 4) == 0);
  CHECK(bytes[4] == 3);
  CHECK(bytes[6] == 77);
  CHECK(bytes[10] == 2);
  CHECK(bytes[12] == 4);
  const auto back = co3::entropy::Decode(block, cb, 4);
  CHECK(back == std::vector<std::uint16_t>{7, 7, 8, 6});
}

TEST_CASE("property: encode then decode is lossless") {
  co3::Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const co3::fpq::FpFormat f{1, static_cast<int>(rng.Below(4)), 1 + static_cast<int>(rng.Below(3)),
                               static_cast<double>(static_cast<float>(rng.Uniform(-8, 8)))};
    const auto model = co3::dist::GenNormParams::FromSigma(rng.Uniform(0.3, 3.0), 0.0,
                                                           std::exp2(f.bias + rng.Uniform(-2, 2)));
    const auto cb = co3::entropy::BuildCodebook(co3::dist::CellProbabilities(model, f));
    std::vector<double> x(rng.Below(3000));
    for (double& v : x) v = model.Sigma() * (rng.Uniform() < 0.5 ? rng.Normal() : rng.Laplace());
    const auto q = co3::fpq::Quantize(x, f);
    const auto block = co3::entropy::Encode(q, cb, {1, 2, 3});
    std::size_t consumed = 0;
    const auto bytes = block.Serialize();
    const auto parsed = co3::entropy::ParseBlock(bytes, &consumed);
    CHECK(consumed == bytes.size());
    const auto decoded = co3::entropy::DecodeBlock(parsed);
    CHECK(decoded.symbols == q.symbols);
    CHECK(decoded.format == f);
  }
}

TEST_CASE("decoder errors") {
  const auto f = co3::fpq::FpFormat::Fp4();
  const auto cb = co3::entropy::BuildCodebook(co3::dist::CellProbabilities(co3::dist::GenNormParams::Normal(0, 0.5), f));
  std::vector<std::uint16_t> s(100);
  co3::Rng rng(4);
  for (auto& v : s) v = static_cast<std::uint16_t>(rng.Below(15));
  const auto block = co3::entropy::Encode(Symbols(s, f), cb);
  auto bytes = block.Serialize();

  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK(CodeOf([&] { co3::entropy::ParseBlock(bytes, nullptr); }) == ErrorCode::kCorrupt);
  }
  SUBCASE("truncated payload") {
    Block b = block;
    b.payload.resize(b.payload.size() / 2);
    b.pad_bits = 0;
    CHECK(CodeOf([&] { co3::entropy::Decode(b, cb, s.size()); }) == ErrorCode::kTruncated);
    bytes.resize(bytes.size() - 3);
    CHECK(CodeOf([&] { co3::entropy::ParseBlock(bytes, nullptr); }) == ErrorCode::kTruncated);
  }
  SUBCASE("trailing garbage") {
    Block b = block;
    b.payload.push_back(0xFF);
    CHECK(CodeOf([&] { co3::entropy::Decode(b, cb, s.size()); }) == ErrorCode::kCorrupt);
  }
  SUBCASE("symbol outside the level table") {
    CHECK(CodeOf([&] { co3::entropy::Encode(Symbols({1, 15}, f), cb); }) == ErrorCode::kOutOfRange);
  }
  SUBCASE("bias not representable in the header") {
    CHECK(CodeOf([&] { co3::entropy::Encode(Symbols({1}, co3::fpq::FpFormat::Fp4(0.1)), cb); }) ==
          ErrorCode::kInvalidArgument);
  }
  SUBCASE("truncated header") {
    bytes.resize(10);
    CHECK(CodeOf([&] { co3::entropy::ParseBlock(bytes, nullptr); }) == ErrorCode::kTruncated);
  }
}

TEST_CASE("empty tensor encodes to an empty payload") {
  const auto f = co3::fpq::FpFormat::Fp4();
  const auto cb = co3::entropy::BuildCodebook(std::vector<double>(15, 1.0 / 15));
  const auto block = co3::entropy::Encode(Symbols({}, f), cb);
  CHECK(block.PayloadBits() == 0);
  CHECK(co3::entropy::DecodeBlock(block).symbols.empty());
}

TEST_CASE("ledger totals") {
  co3::entropy::PayloadLedger ledger;
  ledger.Record(co3::entropy::LedgerRecord{0, 0, 0, 100, 240});
  ledger.Record(co3::entropy::LedgerRecord{1, 0, 0, 50, 240});
  CHECK(ledger.PayloadTotal() == 150);
  CHECK(ledger.HeaderTotal() == 480);
  CHECK(ledger.Total(true) == 630);
  CHECK(ledger.Total(false) == 150);
  CHECK(ledger.size() == 2);
}
