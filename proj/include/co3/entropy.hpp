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

#ifndef CO3_ENTROPY_HPP_
#define CO3_ENTROPY_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <vector>

#include "co3/fpq.hpp"

namespace co3::entropy {

inline constexpr int kMaxCodeLength = 64;

// Canonical prefix code over levels 0..L-1. Codewords follow from the
// lengths alone: levels are ordered by (length, level index) and numbered
// consecutively, shifting left whenever the length grows.
class HuffmanCodebook {
 public:
  // Throws kCorrupt unless every length is in [1, 64] and the Kraft sum is
  // exactly one.
  static HuffmanCodebook FromLengths(std::vector<std::uint8_t> lengths);

  std::size_t level_count() const { return lengths_.size(); }
  const std::vector<std::uint8_t>& lengths() const { return lengths_; }
  std::uint8_t length(std::size_t level) const { return lengths_[level]; }
  std::uint64_t codeword(std::size_t level) const { return codes_[level]; }

  // Matches the next codeword against `code` of `length` bits. Returns the
  // level, or -1 if no codeword of that length has this value.
  int Match(std::uint64_t code, int length) const;

  bool operator==(const HuffmanCodebook& o) const { return lengths_ == o.lengths_; }

 private:
  std::vector<std::uint8_t> lengths_;
  std::vector<std::uint64_t> codes_;
  std::vector<std::uint16_t> by_code_;  // levels in canonical order
  std::array<std::uint64_t, kMaxCodeLength + 1> first_code_{};
  std::array<std::uint32_t, kMaxCodeLength + 1> count_{};
  std::array<std::uint32_t, kMaxCodeLength + 1> offset_{};
};

// Huffman code for `probs`. Merges always take the two lowest
// (probability, creation order) nodes, leaves first in level order.
HuffmanCodebook BuildCodebook(std::span<const double> probs);

double ExpectedLength(const HuffmanCodebook& codebook, std::span<const double> probs);
double EntropyBits(std::span<const double> probs);
// Exact integer test of sum 2^-len == 1.
bool KraftEqualsOne(std::span<const std::uint8_t> lengths);

struct BlockId {
  std::uint16_t user = 0;
  std::uint32_t iteration = 0;
  std::uint16_t layer = 0;
};

// Wire block, all integers little-endian, payload MSB-first:
//   "CO3" 0x01 | user u16 | iteration u32 | layer u16 | symbol_count u64 |
//   sign u8 | mant u8 | exp u8 | bias f32 | level_count u16 |
//   code lengths u8[level_count] | pad_bit_count u8 | payload
struct Block {
  BlockId id;
  std::uint64_t symbol_count = 0;
  fpq::FpFormat format;
  std::vector<std::uint8_t> code_lengths;
  std::uint8_t pad_bits = 0;
  std::vector<std::uint8_t> payload;

  std::uint64_t PayloadBits() const { return payload.size() * 8 - pad_bits; }
  std::size_t HeaderBytes() const { return kFixedHeaderBytes + code_lengths.size(); }
  std::uint64_t HeaderBits() const { return HeaderBytes() * 8; }
  std::vector<std::uint8_t> Serialize() const;
  void AppendTo(std::vector<std::uint8_t>& out) const;

  static constexpr std::size_t kFixedHeaderBytes = 4 + 2 + 4 + 2 + 8 + 3 + 4 + 2 + 1;
};

// Throws kOutOfRange naming the first symbol index >= level_count, and
// kInvalidArgument if the format's bias is not exactly representable as f32.
Block Encode(const fpq::QuantizedTensor& q, const HuffmanCodebook& codebook, BlockId id = {});

// Decodes exactly `symbol_count` symbols. kTruncated if the payload runs out,
// kCorrupt if anything other than `pad_bits` zero bits remains.
std::vector<std::uint16_t> Decode(const Block& block, const HuffmanCodebook& codebook,
                                  std::uint64_t symbol_count);

// Decodes with the codebook and format carried in the header.
fpq::QuantizedTensor DecodeBlock(const Block& block);

// Parses one block from the front of `bytes`; the payload extent is found by
// walking the codewords. Sets *consumed to the block's byte length.
Block ParseBlock(std::span<const std::uint8_t> bytes, std::size_t* consumed);

struct LedgerRecord {
  std::uint16_t user = 0;
  std::uint32_t iteration = 0;
  std::uint16_t layer = 0;
  std::uint64_t payload_bits = 0;
  std::uint64_t header_bits = 0;
};

// Uplink bit accounting. Record() is safe to call from concurrent users;
// totals are order-independent sums.
class PayloadLedger {
 public:
  void Record(const LedgerRecord& r);
  void Record(const Block& block);

  std::uint64_t PayloadTotal() const;
  std::uint64_t HeaderTotal() const;
  std::uint64_t Total(bool include_headers = true) const;
  std::size_t size() const;
  std::vector<LedgerRecord> Records() const;

 private:
  mutable std::mutex mu_;
  std::vector<LedgerRecord> records_;
  std::uint64_t payload_ = 0;
  std::uint64_t header_ = 0;
};

}  // namespace co3::entropy

#endif  // CO3_ENTROPY_HPP_
