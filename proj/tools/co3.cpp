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

// co3 command-line tool. Talks to the library only through the C API.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "co3/co3.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

int Report(co3_status st, const char* what) {
  std::fprintf(stderr, "co3 %s: %s: %s\n", what, co3_status_name(st), co3_last_error());
  return st == CO3_ERR_CONFIG ? kExitConfig : kExitFailure;
}

std::string OutDir(const std::string& flag) {
  const char* env = std::getenv("CO3_OUT");
  return env != nullptr && *env != '\0' ? std::string(env) : flag;
}

bool ParseFormat(const std::string& text, co3_fp_format* f) {
  int s = 0, m = 0, e = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d,%d,%d%c", &s, &m, &e, &tail) != 3) return false;
  *f = {s, m, e, 0.0};
  return true;
}

struct TrainFlags {
  std::string config;
  std::vector<std::pair<std::string, std::string>> values;  // in command-line order
  std::vector<std::string> sets;
};

// Registers --name as a pass-through to co3_config_set.
void Pass(CLI::App* cmd, TrainFlags& flags, const std::string& name, const std::string& help) {
  const std::string key = name;
  cmd->add_option_function<std::string>(
      "--" + name, [&flags, key](const std::string& v) { flags.values.emplace_back(key, v); }, help);
}

int RunTrain(const TrainFlags& flags) {
  co3_config* cfg = nullptr;
  if (auto st = co3_config_create(&cfg); st != CO3_OK) return Report(st, "train");
  auto fail = [&](co3_status st) {
    const int code = Report(st, "train");
    co3_config_destroy(cfg);
    return code;
  };
  if (!flags.config.empty()) {
    if (auto st = co3_config_load_file(cfg, flags.config.c_str()); st != CO3_OK) return fail(st);
  }
  for (const auto& [k, v] : flags.values) {
    if (auto st = co3_config_set(cfg, k.c_str(), v.c_str()); st != CO3_OK) return fail(st);
  }
  for (const auto& kv : flags.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "co3 train: --set expects key=value, got '%s'\n", kv.c_str());
      co3_config_destroy(cfg);
      return kExitConfig;
    }
    if (auto st = co3_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()); st != CO3_OK) {
      return fail(st);
    }
  }
  if (const char* env = std::getenv("CO3_OUT"); env != nullptr && *env != '\0') {
    if (auto st = co3_config_set(cfg, "out", env); st != CO3_OK) return fail(st);
  }
  if (auto st = co3_config_validate(cfg); st != CO3_OK) return fail(st);

  co3_run_result* result = nullptr;
  if (auto st = co3_train(cfg, &result); st != CO3_OK) return fail(st);
  std::printf("%-8s %10s %12s %18s %14s\n", "gamma", "accuracy", "train_loss", "total_bits_R",
              "bits/param/it");
  for (size_t i = 0; i < co3_run_result_count(result); ++i) {
    co3_run_info info;
    co3_run_result_get(result, i, &info);
    std::printf("%-8g %10.4f %12.6f %18llu %14.4f\n", info.gamma, info.final_test_accuracy,
                info.final_train_loss, static_cast<unsigned long long>(info.total_bits),
                info.bits_per_parameter_iteration);
  }
  co3_run_result_destroy(result);
  co3_config_destroy(cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"co3: fp gradient conversion, entropy coding and error feedback"};
  app.require_subcommand(1);
  app.set_version_flag("--version", co3_version());

  // train
  TrainFlags tf;
  auto* train = app.add_subcommand("train", "run the parameter-server simulator");
  train->add_option("--config", tf.config, "JSON config file (flags override it)")->check(CLI::ExistingFile);
  Pass(train, tf, "gamma", "memory decay, or a comma list for a sweep");
  Pass(train, tf, "fp", "format as sign,mantissa,exponent bits");
  Pass(train, tf, "eta", "learning rate");
  Pass(train, tf, "batch", "minibatch size per user");
  Pass(train, tf, "epochs", "training epochs");
  Pass(train, tf, "users", "number of users");
  Pass(train, tf, "seed", "run seed");
  Pass(train, tf, "dataset", "auto, blobs, cifar10, idx or csv");
  Pass(train, tf, "data-path", "dataset directory or CSV file");
  Pass(train, tf, "out", "output directory (CO3_OUT overrides)");
  Pass(train, tf, "include-headers-in-payload", "count block headers in R (true/false)");
  Pass(train, tf, "mode", "co3, fp32 or identity");
  Pass(train, tf, "threads", "worker threads per round");
  train->add_option("--set", tf.sets, "any config key as key=value (repeatable)");

  // bias-sweep
  double beta_lo = 0.3, beta_hi = 1.6, beta_step = 0.05, sigma = 1.0;
  std::string sweep_fp = "1,2,1", sweep_out = "co3_out";
  auto* sweep = app.add_subcommand("bias-sweep", "optimal and polynomial bias over a beta range");
  sweep->add_option("--beta-lo", beta_lo, "first beta")->capture_default_str();
  sweep->add_option("--beta-hi", beta_hi, "last beta")->capture_default_str();
  sweep->add_option("--step", beta_step, "beta increment")->capture_default_str();
  sweep->add_option("--sigma", sigma, "gradient standard deviation")->capture_default_str();
  sweep->add_option("--fp", sweep_fp, "format as sign,mantissa,exponent bits")->capture_default_str();
  sweep->add_option("--out", sweep_out, "output directory; writes bias_sweep.csv")->capture_default_str();

  // fit-dist
  std::string fit_run, fit_csv;
  auto* fit = app.add_subcommand("fit-dist", "W2 of Normal, Laplace and GenNorm fits per layer group");
  fit->add_option("--run", fit_run, "completed run directory")->required();
  fit->add_option("--csv", fit_csv, "output CSV (default RUN/fit_dist.csv)");

  // codec
  auto* codec = app.add_subcommand("codec", "file codec for raw little-endian f32 arrays");
  codec->require_subcommand(1);
  std::string enc_in, enc_out, enc_fp = "1,2,1";
  std::optional<double> enc_bias, enc_beta, enc_mu, enc_alpha;
  std::uint64_t enc_block = 0;
  auto* enc = codec->add_subcommand("encode", "f32 file to wire blocks");
  enc->add_option("--in", enc_in, "input f32 file")->required();
  enc->add_option("--out", enc_out, "output block file")->required();
  enc->add_option("--fp", enc_fp, "format as sign,mantissa,exponent bits")->capture_default_str();
  enc->add_option("--bias", enc_bias, "exponent bias (default: optimized per block)");
  enc->add_option("--beta", enc_beta, "GenNorm shape (with --mu and --alpha; default: fitted)");
  enc->add_option("--mu", enc_mu, "GenNorm location");
  enc->add_option("--alpha", enc_alpha, "GenNorm scale");
  enc->add_option("--block-size", enc_block, "values per block (0 = one block)")->capture_default_str();
  std::string dec_in, dec_out;
  auto* dec = codec->add_subcommand("decode", "wire blocks to dequantized f32 file");
  dec->add_option("--in", dec_in, "input block file")->required();
  dec->add_option("--out", dec_out, "output f32 file")->required();

  // report
  std::string report_run = "co3_out";
  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("--run", report_run, "run directory (CO3_OUT overrides)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  if (train->parsed()) return RunTrain(tf);

  if (sweep->parsed()) {
    co3_fp_format f;
    if (!ParseFormat(sweep_fp, &f)) {
      std::fprintf(stderr, "co3 bias-sweep: --fp expects S,M,E\n");
      return kExitConfig;
    }
    const std::string dir = OutDir(sweep_out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    const std::string path = (std::filesystem::path(dir) / "bias_sweep.csv").string();
    size_t rows = 0;
    if (auto st = co3_bias_sweep(beta_lo, beta_hi, beta_step, sigma, &f, path.c_str(), &rows); st != CO3_OK) {
      return Report(st, "bias-sweep");
    }
    std::printf("wrote %zu rows to %s\n", rows, path.c_str());
    return 0;
  }

  if (fit->parsed()) {
    const std::string csv = fit_csv.empty() ? (std::filesystem::path(fit_run) / "fit_dist.csv").string() : fit_csv;
    co3_fit_dist_info info;
    if (auto st = co3_fit_dist(fit_run.c_str(), csv.c_str(), &info); st != CO3_OK) {
      return Report(st, "fit-dist");
    }
    std::printf("wrote %zu rows to %s\n", info.rows, csv.c_str());
    std::printf("GenNorm best in %.1f%% of rows; median W2 normal %.6g laplace %.6g gennorm %.6g\n",
                100.0 * info.gennorm_best_fraction, info.median_w2_normal, info.median_w2_laplace,
                info.median_w2_gennorm);
    return 0;
  }

  auto print_codec = [](const co3_codec_report& r) {
    std::printf("values %llu, blocks %llu, payload bits %llu, header bits %llu, file bytes %llu, "
                "bits/weight %.6f\n",
                static_cast<unsigned long long>(r.values), static_cast<unsigned long long>(r.blocks),
                static_cast<unsigned long long>(r.payload_bits),
                static_cast<unsigned long long>(r.header_bits),
                static_cast<unsigned long long>(r.file_bytes), r.bits_per_weight);
  };

  if (enc->parsed()) {
    co3_codec_options o;
    co3_codec_options_default(&o);
    if (!ParseFormat(enc_fp, &o.format)) {
      std::fprintf(stderr, "co3 codec encode: --fp expects S,M,E\n");
      return kExitConfig;
    }
    if (enc_bias) {
      o.has_bias = 1;
      o.bias = *enc_bias;
    }
    const int given = (enc_beta ? 1 : 0) + (enc_mu ? 1 : 0) + (enc_alpha ? 1 : 0);
    if (given != 0 && given != 3) {
      std::fprintf(stderr, "co3 codec encode: --beta, --mu and --alpha go together\n");
      return kExitConfig;
    }
    if (given == 3) {
      o.has_model = 1;
      o.model = {*enc_beta, *enc_mu, *enc_alpha};
    }
    o.block_size = enc_block;
    co3_codec_report r;
    if (auto st = co3_codec_encode_file(enc_in.c_str(), enc_out.c_str(), &o, &r); st != CO3_OK) {
      return Report(st, "codec encode");
    }
    print_codec(r);
    return 0;
  }

  if (dec->parsed()) {
    co3_codec_report r;
    if (auto st = co3_codec_decode_file(dec_in.c_str(), dec_out.c_str(), &r); st != CO3_OK) {
      return Report(st, "codec decode");
    }
    print_codec(r);
    return 0;
  }

  if (report->parsed()) {
    const std::string dir = OutDir(report_run);
    size_t need = 0;
    co3_report(dir.c_str(), nullptr, 0, &need);
    std::string text(need, '\0');
    if (auto st = co3_report(dir.c_str(), text.data(), text.size(), &need); st != CO3_OK) {
      return Report(st, "report");
    }
    std::fputs(text.c_str(), stdout);
    return 0;
  }
  return 0;
}
