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

// Exercises the shared library through its C header only.

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "co3/co3.h"
#include "doctest.h"

TEST_CASE("status names and last error") {
  CHECK(std::string(co3_status_name(CO3_OK)) == "ok");
  CHECK(std::string(co3_version()) == "0.1.0");
  co3_fp_format bad = {1, 2, 0, 0.0};
  size_t n = 0;
  CHECK(co3_level_count(&bad, &n) == CO3_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(co3_last_error()) > 0);
  co3_fp_format fp4 = {1, 2, 1, 0.0};
  CHECK(co3_level_count(&fp4, &n) == CO3_OK);
  CHECK(n == 15);
  CHECK(std::strlen(co3_last_error()) == 0);
  CHECK(co3_level_count(nullptr, &n) == CO3_ERR_INVALID_ARGUMENT);
}

TEST_CASE("levels with size negotiation") {
  co3_fp_format fp4 = {1, 2, 1, 0.0};
  size_t n = 0;
  CHECK(co3_levels(&fp4, nullptr, 0, &n) == CO3_ERR_BUFFER_TOO_SMALL);
  CHECK(n == 15);
  std::vector<double> levels(n);
  CHECK(co3_levels(&fp4, levels.data(), levels.size(), &n) == CO3_OK);
  CHECK(levels.front() == -1.75);
  CHECK(levels[7] == 0.0);
}

TEST_CASE("quantize, code and decode through the C API") {
  co3_fp_format f = {1, 2, 1, -1.0};
  const co3_gennorm model = {2.0, 0.0, 0.7};
  double bias = 0.0, objective = 0.0;
  REQUIRE(co3_optimize_bias(&model, &f, &bias, &objective) == CO3_OK);
  f.bias = static_cast<float>(bias);
  size_t count = 0;
  std::vector<double> probs(15);
  REQUIRE(co3_cell_probabilities(&model, &f, probs.data(), probs.size(), &count) == CO3_OK);
  co3_codebook* cb = nullptr;
  REQUIRE(co3_codebook_build(probs.data(), probs.size(), &cb) == CO3_OK);
  double expected_bits = 0.0;
  CHECK(co3_codebook_expected_length(cb, probs.data(), probs.size(), &expected_bits) == CO3_OK);
  CHECK(expected_bits > 1.0);
  CHECK(expected_bits < 4.0);

  std::vector<double> x = {0.1, -0.7, 1.3, 0.0, 5.0, -0.02};
  std::vector<uint16_t> sym(x.size());
  size_t saturated = 0;
  REQUIRE(co3_quantize(&f, x.data(), x.size(), sym.data(), &saturated) == CO3_OK);
  CHECK(saturated >= 1);
  size_t need = 0;
  uint64_t payload_bits = 0;
  CHECK(co3_encode_block(cb, &f, sym.data(), sym.size(), 2, 9, 1, nullptr, 0, &need, &payload_bits) ==
        CO3_ERR_BUFFER_TOO_SMALL);
  std::vector<uint8_t> bytes(need);
  REQUIRE(co3_encode_block(cb, &f, sym.data(), sym.size(), 2, 9, 1, bytes.data(), bytes.size(), &need,
                           &payload_bits) == CO3_OK);
  co3_block_info info;
  std::vector<uint16_t> back(sym.size());
  REQUIRE(co3_decode_block(bytes.data(), bytes.size(), &info, back.data(), back.size()) == CO3_OK);
  CHECK(back == sym);
  CHECK(info.user == 2);
  CHECK(info.iteration == 9);
  CHECK(info.layer == 1);
  CHECK(info.payload_bits == payload_bits);
  CHECK(info.block_bytes == bytes.size());
  CHECK(co3_decode_block(bytes.data(), bytes.size(), &info, back.data(), 2) == CO3_ERR_BUFFER_TOO_SMALL);
  bytes[0] = 0;
  CHECK(co3_decode_block(bytes.data(), bytes.size(), &info, back.data(), back.size()) == CO3_ERR_CORRUPT);

  std::vector<double> y(sym.size());
  CHECK(co3_dequantize(&f, sym.data(), sym.size(), y.data()) == CO3_OK);
  sym[0] = 20;
  CHECK(co3_dequantize(&f, sym.data(), sym.size(), y.data()) == CO3_ERR_OUT_OF_RANGE);
  co3_codebook_destroy(cb);
}

TEST_CASE("codebook from lengths") {
  const uint8_t ok[] = {1, 2, 2};
  const uint8_t bad[] = {1, 1, 1};
  co3_codebook* cb = nullptr;
  CHECK(co3_codebook_from_lengths(bad, 3, &cb) == CO3_ERR_CORRUPT);
  REQUIRE(co3_codebook_from_lengths(ok, 3, &cb) == CO3_OK);
  uint8_t out[3];
  size_t n = 0;
  CHECK(co3_codebook_lengths(cb, out, 3, &n) == CO3_OK);
  CHECK(out[2] == 2);
  co3_codebook_destroy(cb);
}

TEST_CASE("fit through the C API") {
  std::vector<double> x;
  for (int i = 0; i < 2000; ++i) x.push_back(std::sin(i * 0.37) + 0.3 * std::cos(i * 1.91));
  co3_gennorm m;
  double w2 = 0.0;
  CHECK(co3_fit(CO3_FAMILY_GENNORM, x.data(), x.size(), &m, &w2) == CO3_OK);
  CHECK(m.beta > 0.1);
  double w2b = 0.0;
  CHECK(co3_w2_distance(x.data(), x.size(), &m, &w2b) == CO3_OK);
  CHECK(w2b == doctest::Approx(w2));
  std::vector<double> constant(200, 1.0);
  CHECK(co3_fit(CO3_FAMILY_GENNORM, constant.data(), constant.size(), &m, &w2) == CO3_ERR_DEGENERATE);
}

TEST_CASE("config handle") {
  co3_config* cfg = nullptr;
  REQUIRE(co3_config_create(&cfg) == CO3_OK);
  CHECK(co3_config_set(cfg, "gamma", "0.5") == CO3_OK);
  CHECK(co3_config_set(cfg, "nonsense", "1") == CO3_ERR_CONFIG);
  CHECK(co3_config_set(cfg, "gamma", "1.5") == CO3_OK);
  CHECK(co3_config_validate(cfg) == CO3_ERR_CONFIG);
  CHECK(std::string(co3_last_error()).find("gamma") != std::string::npos);
  size_t need = 0;
  CHECK(co3_config_to_json(cfg, nullptr, 0, &need) == CO3_ERR_BUFFER_TOO_SMALL);
  std::string text(need, '\0');
  CHECK(co3_config_to_json(cfg, text.data(), text.size(), &need) == CO3_OK);
  CHECK(text.find("\"gamma\"") != std::string::npos);
  CHECK(co3_config_load_file(cfg, "/nonexistent/config.json") == CO3_ERR_IO);
  co3_config_destroy(cfg);
}

TEST_CASE("bias polynomial") {
  double b = 0.0;
  CHECK(co3_bias_polynomial(1.0, 1.0, &b) == CO3_OK);
  CHECK(b == doctest::Approx(0.65));
  CHECK(co3_bias_polynomial(-1.0, 1.0, &b) == CO3_ERR_INVALID_ARGUMENT);
}
