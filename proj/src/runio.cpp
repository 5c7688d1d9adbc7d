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

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "co3/app.hpp"
#include "co3/entropy.hpp"
#include "co3/error.hpp"
#include "co3/rng.hpp"
#include "json.hpp"

namespace co3::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string Short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void BadValue(std::string_view key, std::string_view value, std::string_view want) {
  Fail(ErrorCode::kConfig,
       "option '" + std::string(key) + "': expected " + std::string(want) + ", got '" +
           std::string(value) + "'");
}

double ParseDouble(std::string_view key, std::string_view text) {
  const std::string s = Trim(text);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
    BadValue(key, text, "a finite number");
  }
  return v;
}

std::uint64_t ParseUnsigned(std::string_view key, std::string_view text) {
  const std::string s = Trim(text);
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    BadValue(key, text, "a non-negative integer");
  }
  return v;
}

int ParseInt(std::string_view key, std::string_view text) {
  const auto v = ParseUnsigned(key, text);
  if (v > 1000000000ull) BadValue(key, text, "an integer below 1e9");
  return static_cast<int>(v);
}

bool ParseBool(std::string_view key, std::string_view text) {
  const std::string s = Trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  BadValue(key, text, "true or false");
}

std::vector<std::string> SplitList(std::string_view text) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss{std::string(text)};
  while (std::getline(ss, cell, ',')) out.push_back(Trim(cell));
  return out;
}

struct Option {
  std::string help;
  void (*set)(RunConfig&, std::string_view key, std::string_view value);
  json (*get)(const RunConfig&);
};

const std::map<std::string, Option>& Options() {
  static const std::map<std::string, Option> options = {
      {"gamma",
       {"memory decay list, e.g. 0,0.5,0.9",
        [](RunConfig& c, std::string_view k, std::string_view v) {
          c.gammas.clear();
          for (const auto& g : SplitList(v)) c.gammas.push_back(ParseDouble(k, g));
          if (c.gammas.empty()) BadValue(k, v, "at least one value");
        },
        [](const RunConfig& c) { return json(c.gammas); }}},
      {"fp",
       {"sign,mantissa,exponent bits",
        [](RunConfig& c, std::string_view k, std::string_view v) {
          const auto parts = SplitList(v);
          if (parts.size() != 3) BadValue(k, v, "S,M,E");
          c.train.format.sign_bits = ParseInt(k, parts[0]);
          c.train.format.mant_bits = ParseInt(k, parts[1]);
          c.train.format.exp_bits = ParseInt(k, parts[2]);
        },
        [](const RunConfig& c) {
          const auto& f = c.train.format;
          return json(std::to_string(f.sign_bits) + "," + std::to_string(f.mant_bits) + "," +
                      std::to_string(f.exp_bits));
        }}},
      {"eta",
       {"learning rate",
        [](RunConfig& c, std::string_view k, std::string_view v) { c.train.eta = ParseDouble(k, v); },
        [](const RunConfig& c) { return json(c.train.eta); }}},
      {"batch",
       {"minibatch size per user",
        [](RunConfig& c, std::string_view k, std::string_view v) {
          c.train.batch_size = ParseUnsigned(k, v);
        },
        [](const RunConfig& c) { return json(c.train.batch_size); }}},
      {"epochs",
       {"training epochs",
        [](RunConfig& c, std::string_view k, std::string_view v) { c.train.epochs = ParseInt(k, v); },
        [](const RunConfig& c) { return json(c.train.epochs); }}},
      {"users",
       {"number of users",
        [](RunConfig& c, std::string_view k, std::string_view v) { c.train.users = ParseInt(k, v); },
        [](const RunConfig& c) { return json(c.train.users); }}},
      {"seed",
       {"run seed (model, shards, minibatches, synthetic data)",
        [](RunConfig& c, std::string_view k, std::string_view v) { c.train.seed = ParseUnsigned(k, v); },
        [](const RunConfig& c) { return json(c.train.seed); }}},
      {"threads",
       {"worker threads for the users of a round",
        [](RunConfig& c, std::string_view k, std::string_view v) { c.train.threads = ParseInt(k, v); },
        [](const RunConfig& c) { return json(c.train.threads); }}},
      {"mode",
       {"co3, fp32 or identity",
        [](RunConfig& c, std::string_view k, std::string_view v) {
          const auto s = Trim(v);
          if (s == "co3") {
            c.train.mode = train::CodecMode::kCo3;
          } else if (s == "fp32") {
            c.train.mode = train::CodecMode::kFullPrecision;
          } else if (s == "identity") {
            c.train.mode = train::CodecMode::kIdentity;
          } else {
            BadValue(k, v, "co3, fp32 or identity");
          }
        },
        [](const RunConfig& c) { return json(std::string(train::CodecModeName(c.train.mode))); }}},
      {"hidden",
       {"hidden layer widths, e.g. 128,64",
        [](RunConfig& c, std::string_view k, std::string_view v) {
          c.train.hidden.clear();
          for (const auto& h : SplitList(v)) {
            if (!h.empty()) c.train.hidden.push_back(ParseUnsigned(k, h));
          }
        },
        [](const RunConfig& c) { return json(c.train.hidden); }}},
      {"include_headers_in_payload",
       {"count block headers in cum_bits and the total",
        [](RunConfig& c, std::string_view k, std::string_view v) {
          c.train.include_headers = ParseBool(k, v);
        },
        [](const RunConfig& c) { return json(c.train.include_headers); }}},
      {"refit_every_iteration",
       {"refit model, bias and codebook every round instead of every epoch",
        [](RunConfig& c, std::string_view k, std::string_view v) {
          c.train.refit_every_iteration = ParseBool(k, v);
        },
        [](const RunConfig& c) { return json(c.train.refit_every_iteration); }}},
      {"fit_subsample",
       {"maximum pooled entries per layer fit",
        [](RunConfig& c, std::string_view k, std::string_view v) {
          c.train.fit_subsample = ParseUnsigned(k, v);
        },
        [](const RunConfig& c) { return json(c.train.fit_subsample); }}},
      {"record_fits",
       {"write W2 of all families per epoch and layer",
        [](RunConfig& c, std::string_view k, std::string_view v) { c.train.record_fits = ParseBool(k, v); },
        [](const RunConfig& c) { return json(c.train.record_fits); }}},
      {"keep_samples",
       {"write fit samples for fit-dist",
        [](RunConfig& c, std::string_view k, std::string_view v) { c.keep_samples = ParseBool(k, v); },
        [](const RunConfig& c) { return json(c.keep_samples); }}},
      {"dataset",
       {"auto, blobs, cifar10, idx or csv",
        [](RunConfig& c, std::string_view k, std::string_view v) {
          const auto s = Trim(v);
          if (s == "auto") {
            c.dataset = DatasetKind::kAuto;
          } else if (s == "blobs" || s == "synth_blobs") {
            c.dataset = DatasetKind::kBlobs;
          } else if (s == "cifar10") {
            c.dataset = DatasetKind::kCifar10;
          } else if (s == "idx") {
            c.dataset = DatasetKind::kIdx;
          } else if (s == "csv") {
            c.dataset = DatasetKind::kCsv;
          } else {
            BadValue(k, v, "auto, blobs, cifar10, idx or csv");
          }
        },
        [](const RunConfig& c) { return json(std::string(DatasetKindName(c.dataset))); }}},
      {"data_path",
       {"dataset directory (cifar10, idx) or file (csv)",
        [](RunConfig& c, std::string_view, std::string_view v) { c.data_path = Trim(v); },
        [](const RunConfig& c) { return json(c.data_path); }}},
      {"train_limit",
       {"training records kept (0 = all)",
        [](RunConfig& c, std::string_view k, std::string_view v) { c.train_limit = ParseUnsigned(k, v); },
        [](const RunConfig& c) { return json(c.train_limit); }}},
      {"test_limit",
       {"test records kept (0 = all)",
        [](RunConfig& c, std::string_view k, std::string_view v) { c.test_limit = ParseUnsigned(k, v); },
        [](const RunConfig& c) { return json(c.test_limit); }}},
      {"csv_test_fraction",
       {"trailing fraction of CSV rows used as the test split",
        [](RunConfig& c, std::string_view k, std::string_view v) {
          c.csv_test_fraction = ParseDouble(k, v);
        },
        [](const RunConfig& c) { return json(c.csv_test_fraction); }}},
      {"blobs_classes",
       {"synthetic blobs: classes",
        [](RunConfig& c, std::string_view k, std::string_view v) { c.blobs.classes = ParseInt(k, v); },
        [](const RunConfig& c) { return json(c.blobs.classes); }}},
      {"blobs_dim",
       {"synthetic blobs: feature dimension",
        [](RunConfig& c, std::string_view k, std::string_view v) { c.blobs.dim = ParseUnsigned(k, v); },
        [](const RunConfig& c) { return json(c.blobs.dim); }}},
      {"blobs_center_scale",
       {"synthetic blobs: stdev of the cluster centres",
        [](RunConfig& c, std::string_view k, std::string_view v) {
          c.blobs.center_scale = ParseDouble(k, v);
        },
        [](const RunConfig& c) { return json(c.blobs.center_scale); }}},
      {"blobs_noise",
       {"synthetic blobs: stdev within a cluster",
        [](RunConfig& c, std::string_view k, std::string_view v) { c.blobs.noise = ParseDouble(k, v); },
        [](const RunConfig& c) { return json(c.blobs.noise); }}},
      {"blobs_scale_decades",
       {"synthetic blobs: decades spanned by the per-feature scales",
        [](RunConfig& c, std::string_view k, std::string_view v) {
          c.blobs.scale_decades = ParseDouble(k, v);
        },
        [](const RunConfig& c) { return json(c.blobs.scale_decades); }}},
      {"out",
       {"output directory",
        [](RunConfig& c, std::string_view, std::string_view v) { c.out = Trim(v); },
        [](const RunConfig& c) { return json(c.out); }}},
  };
  return options;
}

std::string NormalizeKey(std::string_view key) {
  std::string k = Trim(key);
  while (!k.empty() && k.front() == '-') k.erase(k.begin());
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) Fail(ErrorCode::kIo, "write failed for " + path.string());
}

void MakeDirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

void Subsample(std::vector<double>& pool, std::size_t limit, std::uint64_t seed) {
  if (pool.size() <= limit) return;
  Rng rng(seed);
  for (std::size_t i = 0; i < limit; ++i) std::swap(pool[i], pool[i + rng.Below(pool.size() - i)]);
  pool.resize(limit);
}

}  // namespace

std::string_view DatasetKindName(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kAuto: return "auto";
    case DatasetKind::kBlobs: return "blobs";
    case DatasetKind::kCifar10: return "cifar10";
    case DatasetKind::kIdx: return "idx";
    case DatasetKind::kCsv: return "csv";
  }
  return "unknown";
}

void RunConfig::Validate() const {
  if (gammas.empty()) Fail(ErrorCode::kConfig, "at least one gamma is required");
  for (double g : gammas) {
    if (!(g >= 0.0 && g <= 1.0)) {
      Fail(ErrorCode::kConfig, "gamma must lie in [0, 1], got " + Short(g));
    }
  }
  train.Validate();
  if (out.empty()) Fail(ErrorCode::kConfig, "output directory must not be empty");
  if (!(csv_test_fraction > 0.0 && csv_test_fraction < 1.0)) {
    Fail(ErrorCode::kConfig, "csv_test_fraction must lie in (0, 1)");
  }
  if ((dataset == DatasetKind::kCifar10 || dataset == DatasetKind::kIdx ||
       dataset == DatasetKind::kCsv) &&
      data_path.empty()) {
    Fail(ErrorCode::kConfig, "dataset '" + std::string(DatasetKindName(dataset)) + "' needs data_path");
  }
}

void SetOption(RunConfig& config, std::string_view key, std::string_view value) {
  const std::string k = NormalizeKey(key);
  const auto& options = Options();
  const auto it = options.find(k);
  if (it == options.end()) Fail(ErrorCode::kConfig, "unknown option '" + std::string(key) + "'");
  it->second.set(config, k, value);
}

std::vector<std::string> OptionKeys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : Options()) keys.push_back(k);
  return keys;
}

void ApplyJson(RunConfig& config, std::string_view json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    Fail(ErrorCode::kConfig, origin + ": " + e.what());
  }
  if (!doc.is_object()) Fail(ErrorCode::kConfig, origin + ": top level must be an object");
  for (const auto& [key, value] : doc.items()) {
    auto scalar = [&](const json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
      if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
      if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
      if (v.is_number_float()) return Num(v.get<double>());
      Fail(ErrorCode::kConfig, origin + ": option '" + key + "' has an unsupported value type");
    };
    std::string text;
    if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (i > 0) text += ",";
        text += scalar(value[i]);
      }
    } else {
      text = scalar(value);
    }
    try {
      SetOption(config, key, text);
    } catch (const Error& e) {
      Fail(ErrorCode::kConfig, origin + ": " + e.what());
    }
  }
}

void LoadConfigFile(RunConfig& config, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ApplyJson(config, ss.str(), path.string());
}

std::string ToJson(const RunConfig& config) {
  json doc = json::object();
  for (const auto& [k, opt] : Options()) doc[k] = opt.get(config);
  return doc.dump(2);
}

data::Dataset LoadDataset(const RunConfig& config) {
  switch (config.dataset) {
    case DatasetKind::kAuto:
      if (!config.data_path.empty() && data::HasCifar10Binary(config.data_path)) {
        return data::LoadCifar10Binary(config.data_path, config.train_limit, config.test_limit);
      }
      [[fallthrough]];
    case DatasetKind::kBlobs: {
      data::BlobsConfig b = config.blobs;
      b.train = config.train_limit;
      b.test = config.test_limit;
      b.seed = config.train.seed;
      return data::SynthBlobs(b);
    }
    case DatasetKind::kCifar10:
      return data::LoadCifar10Binary(config.data_path, config.train_limit, config.test_limit);
    case DatasetKind::kIdx:
      return data::LoadIdxDataset(config.data_path, config.train_limit, config.test_limit);
    case DatasetKind::kCsv: {
      auto ds = data::LoadCsv(config.data_path, config.csv_test_fraction);
      if (config.train_limit > 0 && ds.train.rows() > config.train_limit) {
        ds.train.labels.resize(config.train_limit);
        ds.train.features.resize(config.train_limit * ds.dim);
      }
      if (config.test_limit > 0 && ds.test.rows() > config.test_limit) {
        ds.test.labels.resize(config.test_limit);
        ds.test.features.resize(config.test_limit * ds.dim);
      }
      return ds;
    }
  }
  Fail(ErrorCode::kConfig, "unknown dataset kind");
}

fs::path SamplePath(const fs::path& run_dir, int epoch, int layer) {
  char name[48];
  std::snprintf(name, sizeof name, "e%03d_l%02d.f32", epoch, layer);
  return run_dir / "samples" / name;
}

void WriteMetricsCsv(const fs::path& path, const std::vector<RunResult>& runs) {
  std::string s = "epoch,gamma,train_loss,test_accuracy,cum_bits,cum_payload_bits,cum_header_bits\n";
  for (const auto& run : runs) {
    for (const auto& e : run.metrics.epochs) {
      s += std::to_string(e.epoch) + "," + Short(run.gamma) + "," + Num(e.train_loss) + "," +
           Num(e.test_accuracy) + "," + std::to_string(e.cum_bits) + "," +
           std::to_string(e.cum_payload_bits) + "," + std::to_string(e.cum_header_bits) + "\n";
    }
  }
  WriteText(path, s);
}

void WriteFitsCsv(const fs::path& path, const train::RunMetrics& m) {
  std::string s = "epoch,layer,layer_group,family,beta,mu,alpha_or_scale,w2\n";
  const std::size_t layers = m.biases.empty() ? 1 : static_cast<std::size_t>(
      std::max_element(m.biases.begin(), m.biases.end(),
                       [](const auto& a, const auto& b) { return a.layer < b.layer; })->layer + 1);
  for (const auto& f : m.fits) {
    s += std::to_string(f.epoch) + "," + std::to_string(f.layer) + "," +
         std::to_string(train::LayerGroup(static_cast<std::size_t>(f.layer), layers)) + "," +
         std::string(dist::FamilyName(f.report.family)) + "," + Num(f.report.params.beta) + "," +
         Num(f.report.params.mu) + "," + Num(f.report.NativeScale()) + "," + Num(f.report.w2) + "\n";
  }
  WriteText(path, s);
}

void WriteNormsCsv(const fs::path& path, const train::RunMetrics& m) {
  std::string s = "epoch,layer_group,l1_gradient,l1_memory,ratio\n";
  for (const auto& n : m.norms) {
    const double ratio = n.l1_gradient > 0.0 ? n.l1_memory / n.l1_gradient : 0.0;
    s += std::to_string(n.epoch) + "," + std::string(train::LayerGroupName(n.layer_group)) + "," +
         Num(n.l1_gradient) + "," + Num(n.l1_memory) + "," + Num(ratio) + "\n";
  }
  WriteText(path, s);
}

void WriteBiasesCsv(const fs::path& path, const train::RunMetrics& m) {
  std::string s = "epoch,layer,beta,mu,alpha,sigma,bias,bias_polynomial,fallback\n";
  for (const auto& b : m.biases) {
    s += std::to_string(b.epoch) + "," + std::to_string(b.layer) + "," + Num(b.model.beta) + "," +
         Num(b.model.mu) + "," + Num(b.model.alpha) + "," + Num(b.model.Sigma()) + "," + Num(b.bias) +
         "," + Num(b.bias_polynomial) + "," + (b.fallback ? "1" : "0") + "\n";
  }
  WriteText(path, s);
}

namespace {

json RunJson(const RunResult& run, const RunConfig& config) {
  const auto& m = run.metrics;
  const double denom = static_cast<double>(m.parameter_count) * static_cast<double>(m.iterations) *
                       static_cast<double>(config.train.users);
  const auto per = [&](std::uint64_t bits) {
    return denom > 0.0 ? static_cast<double>(bits) / denom : 0.0;
  };
  const std::uint64_t total = config.train.include_headers ? m.ledger_total : m.ledger_payload;
  json j;
  j["gamma"] = run.gamma;
  j["dir"] = run.dir.filename().string();
  j["mode"] = std::string(train::CodecModeName(config.train.mode));
  j["final_test_accuracy"] = m.FinalAccuracy();
  j["final_train_loss"] = m.epochs.empty() ? 0.0 : m.epochs.back().train_loss;
  j["total_bits"] = total;
  j["payload_bits"] = m.ledger_payload;
  j["header_bits"] = m.ledger_total - m.ledger_payload;
  j["parameter_count"] = m.parameter_count;
  j["iterations"] = m.iterations;
  j["users"] = config.train.users;
  j["blocks"] = m.blocks;
  j["stream_bytes"] = m.stream_bytes;
  j["pad_bits"] = m.pad_bits;
  j["symbol_bits"] = m.symbol_bits;
  j["saturated"] = m.saturated;
  j["bits_per_parameter_iteration"] = per(total);
  j["payload_bits_per_parameter_iteration"] = per(m.ledger_payload);
  j["header_bits_per_parameter_iteration"] = per(m.ledger_total - m.ledger_payload);
  j["wall_seconds"] = run.wall_seconds;
  return j;
}

}  // namespace

void WriteSummaryJson(const fs::path& path, const RunConfig& config,
                      const std::vector<RunResult>& runs) {
  json doc;
  doc["config"] = json::parse(ToJson(config));
  doc["runs"] = json::array();
  double wall = 0.0;
  for (const auto& run : runs) {
    doc["runs"].push_back(RunJson(run, config));
    wall += run.wall_seconds;
  }
  doc["wall_seconds"] = wall;
  WriteText(path, doc.dump(2) + "\n");
}

std::vector<RunResult> RunTraining(const RunConfig& config) {
  config.Validate();
  const auto ds = LoadDataset(config);
  const fs::path out = config.out;
  MakeDirs(out);
  const bool sweep = config.gammas.size() > 1;

  std::vector<RunResult> results;
  for (double gamma : config.gammas) {
    RunConfig single = config;
    single.gammas = {gamma};
    single.train.gamma = gamma;
    RunResult run;
    run.gamma = gamma;
    run.dir = sweep ? out / ("gamma_" + Short(gamma)) : out;
    MakeDirs(run.dir);
    std::error_code ec;
    fs::remove_all(run.dir / "samples", ec);

    train::TrainHooks hooks;
    if (config.keep_samples && config.train.mode == train::CodecMode::kCo3) {
      MakeDirs(run.dir / "samples");
      hooks.on_fit_sample = [&](int epoch, int layer, std::span<const double> sample) {
        std::vector<float> f(sample.begin(), sample.end());
        WriteF32File(SamplePath(run.dir, epoch, layer), f);
      };
    }
    const auto t0 = std::chrono::steady_clock::now();
    run.metrics = train::Train(single.train, ds, hooks);
    run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& m = run.metrics;
    const double denom = static_cast<double>(m.parameter_count) * static_cast<double>(m.iterations) *
                         static_cast<double>(config.train.users);
    const std::uint64_t total = config.train.include_headers ? m.ledger_total : m.ledger_payload;
    run.bits_per_parameter_iteration = denom > 0.0 ? static_cast<double>(total) / denom : 0.0;

    WriteMetricsCsv(run.dir / "metrics.csv", {run});
    WriteFitsCsv(run.dir / "fits.csv", m);
    WriteNormsCsv(run.dir / "norms.csv", m);
    WriteBiasesCsv(run.dir / "biases.csv", m);
    WriteSummaryJson(run.dir / "summary.json", single, {run});
    results.push_back(std::move(run));
  }
  if (sweep) {
    WriteMetricsCsv(out / "metrics.csv", results);
    WriteSummaryJson(out / "summary.json", config, results);
  }
  return results;
}

std::vector<BiasSweepRow> BiasSweep(double lo, double hi, double step, double sigma,
                                    const fpq::FpFormat& format, const fpq::BiasSearchConfig& search) {
  if (!(lo > 0.0 && lo <= hi && hi <= 5.0)) {
    Fail(ErrorCode::kInvalidArgument, "bias sweep: need 0 < beta_lo <= beta_hi <= 5");
  }
  if (!(step > 0.0)) Fail(ErrorCode::kInvalidArgument, "bias sweep: step must be > 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    Fail(ErrorCode::kInvalidArgument, "bias sweep: sigma must be > 0");
  }
  format.Validate();
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<BiasSweepRow> rows;
  for (std::size_t i = 0; i < count; ++i) {
    const double beta = lo + static_cast<double>(i) * step;
    const auto p = dist::GenNormParams::FromSigma(beta, 0.0, sigma);
    const auto r = fpq::OptimizeBias(p, format, search);
    rows.push_back({beta, r.bias, fpq::BiasPolynomial(beta, sigma), r.objective});
  }
  return rows;
}

void WriteBiasSweepCsv(const fs::path& path, const std::vector<BiasSweepRow>& rows) {
  std::string s = "beta,b_grid,b_polynomial,objective\n";
  for (const auto& r : rows) {
    s += Num(r.beta) + "," + Num(r.bias_grid) + "," + Num(r.bias_polynomial) + "," + Num(r.objective) + "\n";
  }
  WriteText(path, s);
}

FitDistSummary FitDistRows(const std::vector<std::vector<std::vector<double>>>& samples_by_epoch,
                           const std::vector<int>& epochs, std::size_t subsample) {
  FitDistSummary out;
  std::vector<double> normal, laplace, gennorm;
  std::size_t best = 0;
  for (std::size_t e = 0; e < samples_by_epoch.size(); ++e) {
    const auto& layers = samples_by_epoch[e];
    for (int g = 0; g < 3; ++g) {
      std::vector<double> pool;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        if (train::LayerGroup(l, layers.size()) == g) {
          pool.insert(pool.end(), layers[l].begin(), layers[l].end());
        }
      }
      if (pool.empty()) continue;
      Subsample(pool, subsample, 0x5EEDull ^ (static_cast<std::uint64_t>(epochs[e]) << 8) ^
                                     static_cast<std::uint64_t>(g));
      FitDistRow row;
      row.epoch = epochs[e];
      row.layer_group = g;
      try {
        row.w2_normal = dist::FitFamily(pool, dist::Family::kNormal).w2;
        row.w2_laplace = dist::FitFamily(pool, dist::Family::kLaplace).w2;
        const auto gn = dist::FitFamily(pool, dist::Family::kGenNorm);
        row.w2_gennorm = gn.w2;
        row.gennorm_beta = gn.params.beta;
      } catch (const Error&) {
        continue;  // constant or tiny sample
      }
      if (row.w2_gennorm <= std::min(row.w2_normal, row.w2_laplace) + 1e-6) ++best;
      normal.push_back(row.w2_normal);
      laplace.push_back(row.w2_laplace);
      gennorm.push_back(row.w2_gennorm);
      out.rows.push_back(row);
    }
  }
  if (!out.rows.empty()) {
    out.gennorm_best_fraction = static_cast<double>(best) / static_cast<double>(out.rows.size());
  }
  out.median_normal = Median(normal);
  out.median_laplace = Median(laplace);
  out.median_gennorm = Median(gennorm);
  return out;
}

FitDistSummary FitDist(const fs::path& run_dir, std::size_t subsample) {
  const fs::path dir = run_dir / "samples";
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    Fail(ErrorCode::kIo, "missing artifacts: " + dir.string() + " (run train with keep_samples)");
  }
  std::map<int, std::map<int, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    int epoch = 0, layer = 0;
    char tail = 0;
    const auto name = entry.path().filename().string();
    if (std::sscanf(name.c_str(), "e%d_l%d.f3%c", &epoch, &layer, &tail) == 3 && tail == '2') {
      files[epoch][layer] = entry.path();
    }
  }
  if (files.empty()) Fail(ErrorCode::kIo, "missing artifacts: no samples in " + dir.string());
  std::vector<std::vector<std::vector<double>>> samples;
  std::vector<int> epochs;
  for (const auto& [epoch, layers] : files) {
    std::vector<std::vector<double>> per_layer(layers.rbegin()->first + 1);
    for (const auto& [layer, path] : layers) {
      const auto f = ReadF32File(path);
      per_layer[static_cast<std::size_t>(layer)].assign(f.begin(), f.end());
    }
    samples.push_back(std::move(per_layer));
    epochs.push_back(epoch);
  }
  return FitDistRows(samples, epochs, subsample);
}

void WriteFitDistCsv(const fs::path& path, const FitDistRow* rows, std::size_t n) {
  std::string s = "epoch,layer_group,w2_normal,w2_laplace,w2_gennorm,gennorm_beta\n";
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rows[i];
    s += std::to_string(r.epoch) + "," + std::string(train::LayerGroupName(r.layer_group)) + "," +
         Num(r.w2_normal) + "," + Num(r.w2_laplace) + "," + Num(r.w2_gennorm) + "," +
         Num(r.gennorm_beta) + "\n";
  }
  WriteText(path, s);
}

std::vector<float> ReadF32File(const fs::path& path) {
  const auto bytes = data::ReadFile(path);
  if (bytes.size() % 4 != 0) {
    Fail(ErrorCode::kCorrupt, path.string() + ": size is not a multiple of 4 bytes");
  }
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * i]) |
                            static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8 |
                            static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16 |
                            static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24;
    std::memcpy(&out[i], &u, 4);
  }
  return out;
}

void WriteF32File(const fs::path& path, std::span<const float> values) {
  std::string bytes(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t u;
    std::memcpy(&u, &values[i], 4);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<char>((u >> (8 * b)) & 0xFF);
  }
  WriteText(path, bytes);
}

std::vector<std::uint8_t> EncodeValues(const std::vector<float>& values, const CodecOptions& options,
                                       CodecReport* report) {
  options.format.Validate();
  if (options.model) options.model->Validate();
  CodecReport r;
  std::vector<std::uint8_t> bytes;
  const std::size_t n = values.size();
  const std::size_t block = options.block_size == 0 ? std::max<std::size_t>(n, 1) : options.block_size;
  for (std::size_t start = 0, index = 0; start < n; start += block, ++index) {
    const std::size_t stop = std::min(n, start + block);
    std::vector<double> x(values.begin() + static_cast<std::ptrdiff_t>(start),
                          values.begin() + static_cast<std::ptrdiff_t>(stop));
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(x[i])) {
        Fail(ErrorCode::kNonFinite, "codec: non-finite input at index " + std::to_string(start + i));
      }
    }
    const auto model = options.model ? *options.model : train::FitCodingModel(x);
    double bias = options.bias ? *options.bias : fpq::OptimizeBias(model, options.format).bias;
    bias = static_cast<double>(static_cast<float>(bias));
    fpq::FpFormat fmt = options.format;
    fmt.bias = bias;
    const fpq::LevelTable table(fmt);
    const auto codebook = entropy::BuildCodebook(dist::CellProbabilities(model, fmt));
    const auto q = fpq::Quantize(x, table);
    const auto b = entropy::Encode(q, codebook, {0, static_cast<std::uint32_t>(index), 0});
    b.AppendTo(bytes);
    r.values += x.size();
    ++r.blocks;
    r.payload_bits += b.PayloadBits();
    r.header_bits += b.HeaderBits();
  }
  r.file_bytes = bytes.size();
  if (report != nullptr) *report = r;
  return bytes;
}

std::vector<float> DecodeValues(std::span<const std::uint8_t> bytes, CodecReport* report) {
  CodecReport r;
  std::vector<float> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t consumed = 0;
    const auto block = entropy::ParseBlock(bytes.subspan(pos), &consumed);
    const auto q = entropy::DecodeBlock(block);
    const fpq::LevelTable table(q.format);
    const std::size_t base = out.size();
    out.resize(base + q.symbols.size());
    for (std::size_t i = 0; i < q.symbols.size(); ++i) {
      out[base + i] = static_cast<float>(table.value(q.symbols[i]));
    }
    r.values += q.symbols.size();
    ++r.blocks;
    r.payload_bits += block.PayloadBits();
    r.header_bits += block.HeaderBits();
    pos += consumed;
  }
  r.file_bytes = bytes.size();
  if (report != nullptr) *report = r;
  return out;
}

CodecReport EncodeFile(const fs::path& in, const fs::path& out, const CodecOptions& options) {
  CodecReport r;
  const auto bytes = EncodeValues(ReadF32File(in), options, &r);
  WriteText(out, std::string(bytes.begin(), bytes.end()));
  return r;
}

CodecReport DecodeFile(const fs::path& in, const fs::path& out) {
  CodecReport r;
  const auto values = DecodeValues(data::ReadFile(in), &r);
  WriteF32File(out, values);
  return r;
}

std::string Report(const fs::path& run_dir) {
  const fs::path path = run_dir / "summary.json";
  const auto bytes = data::ReadFile(path);
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    Fail(ErrorCode::kCorrupt, path.string() + ": " + e.what());
  }
  std::ostringstream s;
  s << "run directory: " << run_dir.string() << "\n";
  if (doc.contains("config")) {
    const auto& c = doc["config"];
    s << "dataset " << c.value("dataset", "?") << ", fp " << c.value("fp", "?") << ", eta "
      << c.value("eta", 0.0) << ", batch " << c.value("batch", 0) << ", epochs " << c.value("epochs", 0)
      << ", users " << c.value("users", 0) << ", seed " << c.value("seed", 0) << "\n";
  }
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-6s %10s %16s %16s %12s\n", "gamma", "mode", "accuracy",
                "total_bits", "payload_bits", "bits/param/it");
  s << line;
  for (const auto& r : doc.value("runs", json::array())) {
    std::snprintf(line, sizeof line, "%-8g %-6s %10.4f %16llu %16llu %12.4f\n", r.value("gamma", 0.0),
                  r.value("mode", "?").c_str(), r.value("final_test_accuracy", 0.0),
                  static_cast<unsigned long long>(r.value("total_bits", std::uint64_t{0})),
                  static_cast<unsigned long long>(r.value("payload_bits", std::uint64_t{0})),
                  r.value("bits_per_parameter_iteration", 0.0));
    s << line;
  }
  return s.str();
}

}  // namespace co3::app
