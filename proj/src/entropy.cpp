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

#include "co3/entropy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <queue>
#include <string>
#include <tuple>

#include "co3/error.hpp"

namespace co3::entropy {

bool KraftEqualsOne(std::span<const std::uint8_t> lengths) {
  unsigned __int128 sum = 0;
  for (auto len : lengths) {
    if (len < 1 || len > kMaxCodeLength) return false;
    sum += static_cast<unsigned __int128>(1) << (kMaxCodeLength - len);
  }
  return sum == static_cast<unsigned __int128>(1) << kMaxCodeLength;
}

HuffmanCodebook HuffmanCodebook::FromLengths(std::vector<std::uint8_t> lengths) {
  if (lengths.size() < 2) Fail(ErrorCode::kCorrupt, "codebook: need at least two levels");
  if (lengths.size() > 65535) Fail(ErrorCode::kCorrupt, "codebook: too many levels");
  if (!KraftEqualsOne(lengths)) {
    Fail(ErrorCode::kCorrupt, "codebook: code lengths do not form a complete prefix code");
  }
  HuffmanCodebook cb;
  cb.lengths_ = std::move(lengths);
  const std::size_t n = cb.lengths_.size();
  cb.by_code_.resize(n);
  std::iota(cb.by_code_.begin(), cb.by_code_.end(), std::uint16_t{0});
  std::stable_sort(cb.by_code_.begin(), cb.by_code_.end(),
                   [&](std::uint16_t a, std::uint16_t b) { return cb.lengths_[a] < cb.lengths_[b]; });
  for (auto len : cb.lengths_) ++cb.count_[len];
  unsigned __int128 code = 0;
  std::uint32_t offset = 0;
  for (int len = 1; len <= kMaxCodeLength; ++len) {
    code = (code + cb.count_[len - 1]) << 1;
    cb.first_code_[len] = static_cast<std::uint64_t>(code);
    cb.offset_[len] = offset;
    offset += cb.count_[len];
  }
  cb.codes_.resize(n);
  for (int len = 1; len <= kMaxCodeLength; ++len) {
    for (std::uint32_t i = 0; i < cb.count_[len]; ++i) {
      cb.codes_[cb.by_code_[cb.offset_[len] + i]] = cb.first_code_[len] + i;
    }
  }
  return cb;
}

int HuffmanCodebook::Match(std::uint64_t code, int length) const {
  const auto count = count_[length];
  if (count == 0 || code < first_code_[length]) return -1;
  const std::uint64_t rank = code - first_code_[length];
  if (rank >= count) return -1;
  return by_code_[offset_[length] + rank];
}

HuffmanCodebook BuildCodebook(std::span<const double> probs) {
  if (probs.size() < 2) Fail(ErrorCode::kInvalidArgument, "build_codebook: need at least two levels");
  if (probs.size() > 65535) Fail(ErrorCode::kInvalidArgument, "build_codebook: too many levels");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!std::isfinite(probs[i]) || probs[i] < 0.0) {
      Fail(ErrorCode::kInvalidArgument,
           "build_codebook: invalid probability at level " + std::to_string(i));
    }
    total += probs[i];
  }
  if (std::abs(total - 1.0) > 1e-6) {
    Fail(ErrorCode::kInvalidArgument, "build_codebook: probabilities must sum to 1");
  }

  const std::size_t n = probs.size();
  std::vector<std::size_t> parent(2 * n - 1, 0);
  using Node = std::pair<double, std::size_t>;  // (probability, creation order)
  std::priority_queue<Node, std::vector<Node>, std::greater<>> heap;
  for (std::size_t i = 0; i < n; ++i) heap.emplace(probs[i], i);
  std::size_t next = n;
  while (heap.size() > 1) {
    const auto a = heap.top();
    heap.pop();
    const auto b = heap.top();
    heap.pop();
    parent[a.second] = next;
    parent[b.second] = next;
    heap.emplace(a.first + b.first, next);
    ++next;
  }
  // Creation order puts every parent after its children, so depths resolve
  // from the root downwards.
  const std::size_t root = next - 1;
  std::vector<int> depth(2 * n - 1, 0);
  for (std::size_t id = root; id-- > 0;) depth[id] = depth[parent[id]] + 1;
  std::vector<std::uint8_t> lengths(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (depth[i] > kMaxCodeLength) {
      Fail(ErrorCode::kInvalidArgument, "build_codebook: code length exceeds 64 bits");
    }
    lengths[i] = static_cast<std::uint8_t>(depth[i]);
  }
  return HuffmanCodebook::FromLengths(std::move(lengths));
}

double ExpectedLength(const HuffmanCodebook& codebook, std::span<const double> probs) {
  if (probs.size() != codebook.level_count()) {
    Fail(ErrorCode::kShapeMismatch, "expected_length: probability vector size differs from codebook");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) acc += probs[i] * codebook.length(i);
  return acc;
}

double EntropyBits(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

namespace {

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void Put(std::uint64_t code, int len) {
    for (int i = len - 1; i >= 0; --i) {
      acc_ = static_cast<std::uint8_t>((acc_ << 1) | ((code >> i) & 1u));
      if (++used_ == 8) {
        out_.push_back(acc_);
        acc_ = 0;
        used_ = 0;
      }
    }
  }

  // Zero-pads the final byte; returns the number of pad bits.
  std::uint8_t Finish() {
    if (used_ == 0) return 0;
    const auto pad = static_cast<std::uint8_t>(8 - used_);
    out_.push_back(static_cast<std::uint8_t>(acc_ << pad));
    acc_ = 0;
    used_ = 0;
    return pad;
  }

 private:
  std::vector<std::uint8_t>& out_;
  std::uint8_t acc_ = 0;
  int used_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool Next(unsigned& bit) {
    if (pos_ >= bytes_.size() * 8) return false;
    bit = (bytes_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1u;
    ++pos_;
    return true;
  }

  std::uint64_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t pos_ = 0;
};

// Walks `symbol_count` codewords; returns bits consumed. `out` may be null.
std::uint64_t WalkCodewords(std::span<const std::uint8_t> payload, const HuffmanCodebook& cb,
                            std::uint64_t symbol_count, std::uint16_t* out) {
  BitReader reader(payload);
  for (std::uint64_t s = 0; s < symbol_count; ++s) {
    std::uint64_t code = 0;
    int len = 0;
    int level = -1;
    while (level < 0) {
      unsigned bit;
      if (!reader.Next(bit)) {
        Fail(ErrorCode::kTruncated, "decode: bitstream exhausted after " + std::to_string(s) +
                                        " of " + std::to_string(symbol_count) + " symbols");
      }
      code = (code << 1) | bit;
      if (++len > kMaxCodeLength) Fail(ErrorCode::kCorrupt, "decode: invalid codeword");
      level = cb.Match(code, len);
    }
    if (out != nullptr) out[s] = static_cast<std::uint16_t>(level);
  }
  return reader.position();
}

void CheckTrailer(std::span<const std::uint8_t> payload, std::uint64_t used_bits,
                  std::uint8_t pad_bits) {
  const std::uint64_t total_bits = payload.size() * 8;
  if (total_bits - used_bits != pad_bits) {
    Fail(ErrorCode::kCorrupt, "decode: " + std::to_string(total_bits - used_bits) +
                                  " trailing bits where " + std::to_string(pad_bits) +
                                  " pad bits were declared");
  }
  if (pad_bits > 0) {
    const std::uint8_t mask = static_cast<std::uint8_t>((1u << pad_bits) - 1);
    if ((payload.back() & mask) != 0) Fail(ErrorCode::kCorrupt, "decode: non-zero pad bits");
  }
}

template <typename T>
void PutLe(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
  }
}

template <typename T>
T GetLe(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) Fail(ErrorCode::kTruncated, "block: header truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  pos += sizeof(T);
  return static_cast<T>(v);
}

}  // namespace

void Block::AppendTo(std::vector<std::uint8_t>& out) const {
  out.insert(out.end(), {'C', 'O', '3', 0x01});
  PutLe<std::uint16_t>(out, id.user);
  PutLe<std::uint32_t>(out, id.iteration);
  PutLe<std::uint16_t>(out, id.layer);
  PutLe<std::uint64_t>(out, symbol_count);
  out.push_back(static_cast<std::uint8_t>(format.sign_bits));
  out.push_back(static_cast<std::uint8_t>(format.mant_bits));
  out.push_back(static_cast<std::uint8_t>(format.exp_bits));
  PutLe<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(format.bias)));
  PutLe<std::uint16_t>(out, static_cast<std::uint16_t>(code_lengths.size()));
  out.insert(out.end(), code_lengths.begin(), code_lengths.end());
  out.push_back(pad_bits);
  out.insert(out.end(), payload.begin(), payload.end());
}

std::vector<std::uint8_t> Block::Serialize() const {
  std::vector<std::uint8_t> out;
  out.reserve(HeaderBytes() + payload.size());
  AppendTo(out);
  return out;
}

Block Encode(const fpq::QuantizedTensor& q, const HuffmanCodebook& codebook, BlockId id) {
  if (static_cast<double>(static_cast<float>(q.format.bias)) != q.format.bias) {
    Fail(ErrorCode::kInvalidArgument, "encode: bias is not exactly representable as f32");
  }
  if (q.format.LevelCount() != codebook.level_count()) {
    Fail(ErrorCode::kShapeMismatch, "encode: codebook level count differs from format");
  }
  Block block;
  block.id = id;
  block.symbol_count = q.symbols.size();
  block.format = q.format;
  block.code_lengths = codebook.lengths();
  BitWriter writer(block.payload);
  for (std::size_t i = 0; i < q.symbols.size(); ++i) {
    const auto s = q.symbols[i];
    if (s >= codebook.level_count()) {
      Fail(ErrorCode::kOutOfRange, "encode: symbol out of range at index " + std::to_string(i));
    }
    writer.Put(codebook.codeword(s), codebook.length(s));
  }
  block.pad_bits = writer.Finish();
  return block;
}

std::vector<std::uint16_t> Decode(const Block& block, const HuffmanCodebook& codebook,
                                  std::uint64_t symbol_count) {
  std::vector<std::uint16_t> out(symbol_count);
  const auto used = WalkCodewords(block.payload, codebook, symbol_count, out.data());
  CheckTrailer(block.payload, used, block.pad_bits);
  return out;
}

fpq::QuantizedTensor DecodeBlock(const Block& block) {
  const auto codebook = HuffmanCodebook::FromLengths(block.code_lengths);
  fpq::QuantizedTensor q;
  q.format = block.format;
  q.shape = {static_cast<std::size_t>(block.symbol_count)};
  q.symbols = Decode(block, codebook, block.symbol_count);
  return q;
}

Block ParseBlock(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  std::size_t pos = 0;
  if (bytes.size() < 4) Fail(ErrorCode::kTruncated, "block: header truncated");
  if (bytes[0] != 'C' || bytes[1] != 'O' || bytes[2] != '3') {
    Fail(ErrorCode::kCorrupt, "block: bad magic");
  }
  if (bytes[3] != 0x01) {
    Fail(ErrorCode::kCorrupt, "block: unsupported version " + std::to_string(bytes[3]));
  }
  pos = 4;
  Block block;
  block.id.user = GetLe<std::uint16_t>(bytes, pos);
  block.id.iteration = GetLe<std::uint32_t>(bytes, pos);
  block.id.layer = GetLe<std::uint16_t>(bytes, pos);
  block.symbol_count = GetLe<std::uint64_t>(bytes, pos);
  block.format.sign_bits = GetLe<std::uint8_t>(bytes, pos);
  block.format.mant_bits = GetLe<std::uint8_t>(bytes, pos);
  block.format.exp_bits = GetLe<std::uint8_t>(bytes, pos);
  block.format.bias = std::bit_cast<float>(GetLe<std::uint32_t>(bytes, pos));
  try {
    block.format.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kCorrupt, std::string("block: ") + e.what());
  }
  const auto level_count = GetLe<std::uint16_t>(bytes, pos);
  if (level_count != block.format.LevelCount()) {
    Fail(ErrorCode::kCorrupt, "block: level count does not match fp descriptor");
  }
  if (pos + level_count + 1 > bytes.size()) Fail(ErrorCode::kTruncated, "block: header truncated");
  block.code_lengths.assign(bytes.begin() + pos, bytes.begin() + pos + level_count);
  pos += level_count;
  block.pad_bits = bytes[pos++];
  if (block.pad_bits > 7) Fail(ErrorCode::kCorrupt, "block: pad bit count above 7");
  const auto codebook = HuffmanCodebook::FromLengths(block.code_lengths);
  const auto rest = bytes.subspan(pos);
  const auto used = WalkCodewords(rest, codebook, block.symbol_count, nullptr);
  const auto payload_bytes = static_cast<std::size_t>((used + 7) / 8);
  block.payload.assign(rest.begin(), rest.begin() + payload_bytes);
  CheckTrailer(block.payload, used, block.pad_bits);
  if (consumed != nullptr) *consumed = pos + payload_bytes;
  return block;
}

void PayloadLedger::Record(const LedgerRecord& r) {
  std::lock_guard lock(mu_);
  records_.push_back(r);
  payload_ += r.payload_bits;
  header_ += r.header_bits;
}

void PayloadLedger::Record(const Block& block) {
  Record(LedgerRecord{block.id.user, block.id.iteration, block.id.layer, block.PayloadBits(), block.HeaderBits()});
}

std::uint64_t PayloadLedger::PayloadTotal() const {
  std::lock_guard lock(mu_);
  return payload_;
}

std::uint64_t PayloadLedger::HeaderTotal() const {
  std::lock_guard lock(mu_);
  return header_;
}

std::uint64_t PayloadLedger::Total(bool include_headers) const {
  std::lock_guard lock(mu_);
  return include_headers ? payload_ + header_ : payload_;
}

std::size_t PayloadLedger::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::vector<LedgerRecord> PayloadLedger::Records() const {
  std::lock_guard lock(mu_);
  return records_;
}

}  // namespace co3::entropy
