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

#include "co3/co3.h"

#include <cstring>
#include <exception>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "co3/app.hpp"
#include "co3/distmodel.hpp"
#include "co3/entropy.hpp"
#include "co3/error.hpp"
#include "co3/fpq.hpp"

struct co3_config {
  co3::app::RunConfig config;
};

struct co3_codebook {
  co3::entropy::HuffmanCodebook codebook;
};

struct co3_run_result {
  std::vector<co3_run_info> runs;
};

namespace {

thread_local std::string last_error;

template <typename Fn>
co3_status Guard(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return CO3_OK;
  } catch (const co3::Error& e) {
    last_error = e.what();
    return static_cast<co3_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return CO3_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return CO3_ERR_INTERNAL;
  }
}

void Require(bool ok, const char* what) {
  if (!ok) co3::Fail(co3::ErrorCode::kInvalidArgument, what);
}

co3::fpq::FpFormat ToFormat(const co3_fp_format* f) {
  Require(f != nullptr, "format is null");
  co3::fpq::FpFormat out{f->sign_bits, f->mant_bits, f->exp_bits, f->bias};
  out.Validate();
  return out;
}

co3::dist::GenNormParams ToModel(const co3_gennorm* m) {
  Require(m != nullptr, "model is null");
  co3::dist::GenNormParams p{m->beta, m->mu, m->alpha};
  p.Validate();
  return p;
}

co3_gennorm FromModel(const co3::dist::GenNormParams& p) { return {p.beta, p.mu, p.alpha}; }

// Copies `values` into out/cap; reports the count and signals a short buffer.
template <typename T>
co3_status CopyOut(const std::vector<T>& values, T* out, size_t cap, size_t* count) {
  if (count != nullptr) *count = values.size();
  if (out == nullptr || cap < values.size()) {
    last_error = "output buffer too small: " + std::to_string(values.size()) + " needed";
    return CO3_ERR_BUFFER_TOO_SMALL;
  }
  std::copy(values.begin(), values.end(), out);
  return CO3_OK;
}

co3_status CopyText(const std::string& text, char* out, size_t cap, size_t* needed) {
  if (needed != nullptr) *needed = text.size() + 1;
  if (out == nullptr || cap < text.size() + 1) {
    last_error = "output buffer too small: " + std::to_string(text.size() + 1) + " needed";
    return CO3_ERR_BUFFER_TOO_SMALL;
  }
  std::memcpy(out, text.c_str(), text.size() + 1);
  return CO3_OK;
}

co3::dist::Family ToFamily(co3_family f) {
  switch (f) {
    case CO3_FAMILY_NORMAL: return co3::dist::Family::kNormal;
    case CO3_FAMILY_LAPLACE: return co3::dist::Family::kLaplace;
    case CO3_FAMILY_GENNORM: return co3::dist::Family::kGenNorm;
  }
  co3::Fail(co3::ErrorCode::kInvalidArgument, "unknown family");
}

co3_codec_report ToReport(const co3::app::CodecReport& r) {
  return {r.values, r.blocks, r.payload_bits, r.header_bits, r.file_bytes, r.BitsPerWeight()};
}

}  // namespace

extern "C" {

const char* co3_version(void) { return "0.1.0"; }

const char* co3_status_name(co3_status status) {
  switch (status) {
    case CO3_OK: return "ok";
    case CO3_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CO3_ERR_NON_FINITE: return "non-finite value";
    case CO3_ERR_DEGENERATE: return "degenerate input";
    case CO3_ERR_INSUFFICIENT_DATA: return "insufficient data";
    case CO3_ERR_OUT_OF_RANGE: return "out of range";
    case CO3_ERR_TRUNCATED: return "truncated stream";
    case CO3_ERR_CORRUPT: return "corrupt stream";
    case CO3_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case CO3_ERR_DIVERGED: return "training diverged";
    case CO3_ERR_IO: return "i/o error";
    case CO3_ERR_CONFIG: return "configuration error";
    case CO3_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case CO3_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* co3_last_error(void) { return last_error.c_str(); }

co3_status co3_level_count(const co3_fp_format* format, size_t* count) {
  return Guard([&] {
    Require(count != nullptr, "count is null");
    *count = ToFormat(format).LevelCount();
  });
}

co3_status co3_levels(const co3_fp_format* format, double* out, size_t cap, size_t* count) {
  std::vector<double> levels;
  const auto st = Guard([&] { levels = co3::fpq::EnumerateLevels(ToFormat(format)); });
  return st != CO3_OK ? st : CopyOut(levels, out, cap, count);
}

co3_status co3_quantize(const co3_fp_format* format, const double* x, size_t n, uint16_t* symbols,
                        size_t* saturated) {
  return Guard([&] {
    Require(n == 0 || (x != nullptr && symbols != nullptr), "null buffer");
    co3::fpq::QuantizeStats stats;
    const auto q = co3::fpq::Quantize(std::span<const double>(x, n), ToFormat(format), {}, &stats);
    std::copy(q.symbols.begin(), q.symbols.end(), symbols);
    if (saturated != nullptr) *saturated = stats.saturated;
  });
}

co3_status co3_dequantize(const co3_fp_format* format, const uint16_t* symbols, size_t n,
                          double* out) {
  return Guard([&] {
    Require(n == 0 || (symbols != nullptr && out != nullptr), "null buffer");
    const co3::fpq::LevelTable table(ToFormat(format));
    for (size_t i = 0; i < n; ++i) {
      if (symbols[i] >= table.size()) {
        co3::Fail(co3::ErrorCode::kOutOfRange,
                  "symbol " + std::to_string(symbols[i]) + " at index " + std::to_string(i) +
                      " exceeds level count " + std::to_string(table.size()));
      }
    }
    co3::fpq::Dequantize(table, std::span<const uint16_t>(symbols, n), std::span<double>(out, n));
  });
}

co3_status co3_optimize_bias(const co3_gennorm* model, const co3_fp_format* format, double* bias,
                             double* objective) {
  return Guard([&] {
    Require(bias != nullptr, "bias is null");
    const auto r = co3::fpq::OptimizeBias(ToModel(model), ToFormat(format));
    *bias = r.bias;
    if (objective != nullptr) *objective = r.objective;
  });
}

co3_status co3_bias_polynomial(double beta, double sigma, double* bias) {
  return Guard([&] {
    Require(bias != nullptr, "bias is null");
    *bias = co3::fpq::BiasPolynomial(beta, sigma);
  });
}

co3_status co3_fit(co3_family family, const double* x, size_t n, co3_gennorm* model, double* w2) {
  return Guard([&] {
    Require(model != nullptr && (n == 0 || x != nullptr), "null buffer");
    const auto r = co3::dist::FitFamily(std::span<const double>(x, n), ToFamily(family));
    *model = FromModel(r.params);
    if (w2 != nullptr) *w2 = r.w2;
  });
}

co3_status co3_w2_distance(const double* x, size_t n, const co3_gennorm* model, double* w2) {
  return Guard([&] {
    Require(w2 != nullptr && (n == 0 || x != nullptr), "null buffer");
    *w2 = co3::dist::W2Distance(std::span<const double>(x, n), ToModel(model));
  });
}

co3_status co3_cell_probabilities(const co3_gennorm* model, const co3_fp_format* format, double* out,
                                  size_t cap, size_t* count) {
  std::vector<double> probs;
  const auto st =
      Guard([&] { probs = co3::dist::CellProbabilities(ToModel(model), ToFormat(format)); });
  return st != CO3_OK ? st : CopyOut(probs, out, cap, count);
}

co3_status co3_codebook_build(const double* probs, size_t n, co3_codebook** out) {
  return Guard([&] {
    Require(out != nullptr && (n == 0 || probs != nullptr), "null buffer");
    *out = new co3_codebook{co3::entropy::BuildCodebook(std::span<const double>(probs, n))};
  });
}

co3_status co3_codebook_from_lengths(const uint8_t* lengths, size_t n, co3_codebook** out) {
  return Guard([&] {
    Require(out != nullptr && (n == 0 || lengths != nullptr), "null buffer");
    *out = new co3_codebook{co3::entropy::HuffmanCodebook::FromLengths(
        std::vector<uint8_t>(lengths, lengths + n))};
  });
}

void co3_codebook_destroy(co3_codebook* codebook) { delete codebook; }

co3_status co3_codebook_lengths(const co3_codebook* codebook, uint8_t* out, size_t cap, size_t* count) {
  std::vector<uint8_t> lengths;
  const auto st = Guard([&] {
    Require(codebook != nullptr, "codebook is null");
    const auto l = codebook->codebook.lengths();
    lengths.assign(l.begin(), l.end());
  });
  return st != CO3_OK ? st : CopyOut(lengths, out, cap, count);
}

co3_status co3_codebook_expected_length(const co3_codebook* codebook, const double* probs, size_t n,
                                        double* bits) {
  return Guard([&] {
    Require(codebook != nullptr && bits != nullptr && (n == 0 || probs != nullptr), "null buffer");
    *bits = co3::entropy::ExpectedLength(codebook->codebook, std::span<const double>(probs, n));
  });
}

co3_status co3_encode_block(const co3_codebook* codebook, const co3_fp_format* format,
                            const uint16_t* symbols, size_t n, uint16_t user, uint32_t iteration,
                            uint16_t layer, uint8_t* out, size_t cap, size_t* written,
                            uint64_t* payload_bits) {
  std::vector<uint8_t> bytes;
  const auto st = Guard([&] {
    Require(codebook != nullptr && (n == 0 || symbols != nullptr), "null buffer");
    co3::fpq::QuantizedTensor q;
    q.format = ToFormat(format);
    q.symbols.assign(symbols, symbols + n);
    const auto block = co3::entropy::Encode(q, codebook->codebook, {user, iteration, layer});
    bytes = block.Serialize();
    if (payload_bits != nullptr) *payload_bits = block.PayloadBits();
  });
  return st != CO3_OK ? st : CopyOut(bytes, out, cap, written);
}

co3_status co3_decode_block(const uint8_t* bytes, size_t n, co3_block_info* info, uint16_t* symbols,
                            size_t cap) {
  bool short_buffer = false;
  const auto st = Guard([&] {
    Require(n == 0 || bytes != nullptr, "null buffer");
    size_t consumed = 0;
    const auto block = co3::entropy::ParseBlock(std::span<const uint8_t>(bytes, n), &consumed);
    if (info != nullptr) {
      info->user = block.id.user;
      info->iteration = block.id.iteration;
      info->layer = block.id.layer;
      info->symbol_count = block.symbol_count;
      info->format = {block.format.sign_bits, block.format.mant_bits, block.format.exp_bits,
                      block.format.bias};
      info->payload_bits = block.PayloadBits();
      info->header_bits = block.HeaderBits();
      info->block_bytes = consumed;
    }
    if (symbols == nullptr) return;
    if (cap < block.symbol_count) {
      short_buffer = true;
      return;
    }
    const auto q = co3::entropy::DecodeBlock(block);
    std::copy(q.symbols.begin(), q.symbols.end(), symbols);
  });
  if (st == CO3_OK && short_buffer) {
    last_error = "symbol buffer too small";
    return CO3_ERR_BUFFER_TOO_SMALL;
  }
  return st;
}

co3_status co3_config_create(co3_config** out) {
  return Guard([&] {
    Require(out != nullptr, "out is null");
    *out = new co3_config{};
  });
}

void co3_config_destroy(co3_config* config) { delete config; }

co3_status co3_config_set(co3_config* config, const char* key, const char* value) {
  return Guard([&] {
    Require(config != nullptr && key != nullptr && value != nullptr, "null argument");
    co3::app::SetOption(config->config, key, value);
  });
}

co3_status co3_config_load_file(co3_config* config, const char* path) {
  return Guard([&] {
    Require(config != nullptr && path != nullptr, "null argument");
    co3::app::LoadConfigFile(config->config, path);
  });
}

co3_status co3_config_validate(const co3_config* config) {
  return Guard([&] {
    Require(config != nullptr, "config is null");
    config->config.Validate();
  });
}

co3_status co3_config_to_json(const co3_config* config, char* out, size_t cap, size_t* needed) {
  std::string text;
  const auto st = Guard([&] {
    Require(config != nullptr, "config is null");
    text = co3::app::ToJson(config->config);
  });
  return st != CO3_OK ? st : CopyText(text, out, cap, needed);
}

co3_status co3_train(const co3_config* config, co3_run_result** out) {
  return Guard([&] {
    Require(config != nullptr && out != nullptr, "null argument");
    const auto runs = co3::app::RunTraining(config->config);
    auto* result = new co3_run_result{};
    for (const auto& r : runs) {
      const auto& m = r.metrics;
      co3_run_info info{};
      info.gamma = r.gamma;
      info.final_test_accuracy = m.FinalAccuracy();
      info.final_train_loss = m.epochs.empty() ? 0.0 : m.epochs.back().train_loss;
      info.payload_bits = m.ledger_payload;
      info.header_bits = m.ledger_total - m.ledger_payload;
      info.total_bits = config->config.train.include_headers ? m.ledger_total : m.ledger_payload;
      info.parameter_count = m.parameter_count;
      info.iterations = m.iterations;
      info.bits_per_parameter_iteration = r.bits_per_parameter_iteration;
      info.wall_seconds = r.wall_seconds;
      result->runs.push_back(info);
    }
    *out = result;
  });
}

size_t co3_run_result_count(const co3_run_result* result) {
  return result == nullptr ? 0 : result->runs.size();
}

co3_status co3_run_result_get(const co3_run_result* result, size_t index, co3_run_info* info) {
  return Guard([&] {
    Require(result != nullptr && info != nullptr, "null argument");
    if (index >= result->runs.size()) co3::Fail(co3::ErrorCode::kOutOfRange, "run index out of range");
    *info = result->runs[index];
  });
}

void co3_run_result_destroy(co3_run_result* result) { delete result; }

co3_status co3_bias_sweep(double beta_lo, double beta_hi, double step, double sigma,
                          const co3_fp_format* format, const char* csv_path, size_t* rows) {
  return Guard([&] {
    Require(csv_path != nullptr, "csv path is null");
    const auto r = co3::app::BiasSweep(beta_lo, beta_hi, step, sigma, ToFormat(format));
    co3::app::WriteBiasSweepCsv(csv_path, r);
    if (rows != nullptr) *rows = r.size();
  });
}

co3_status co3_fit_dist(const char* run_dir, const char* csv_path, co3_fit_dist_info* info) {
  return Guard([&] {
    Require(run_dir != nullptr && csv_path != nullptr, "null argument");
    const auto s = co3::app::FitDist(run_dir);
    co3::app::WriteFitDistCsv(csv_path, s.rows.data(), s.rows.size());
    if (info != nullptr) {
      *info = {s.rows.size(), s.gennorm_best_fraction, s.median_normal, s.median_laplace,
               s.median_gennorm};
    }
  });
}

void co3_codec_options_default(co3_codec_options* options) {
  if (options == nullptr) return;
  *options = co3_codec_options{};
  options->format = {1, 2, 1, 0.0};
}

co3_status co3_codec_encode_file(const char* in_path, const char* out_path,
                                 const co3_codec_options* options, co3_codec_report* report) {
  return Guard([&] {
    Require(in_path != nullptr && out_path != nullptr && options != nullptr, "null argument");
    co3::app::CodecOptions o;
    o.format = ToFormat(&options->format);
    if (options->has_bias) o.bias = options->bias;
    if (options->has_model) o.model = ToModel(&options->model);
    o.block_size = options->block_size;
    const auto r = co3::app::EncodeFile(in_path, out_path, o);
    if (report != nullptr) *report = ToReport(r);
  });
}

co3_status co3_codec_decode_file(const char* in_path, const char* out_path, co3_codec_report* report) {
  return Guard([&] {
    Require(in_path != nullptr && out_path != nullptr, "null argument");
    const auto r = co3::app::DecodeFile(in_path, out_path);
    if (report != nullptr) *report = ToReport(r);
  });
}

co3_status co3_report(const char* run_dir, char* out, size_t cap, size_t* needed) {
  std::string text;
  const auto st = Guard([&] {
    Require(run_dir != nullptr, "run dir is null");
    text = co3::app::Report(run_dir);
  });
  return st != CO3_OK ? st : CopyText(text, out, cap, needed);
}

}  // extern "C"
