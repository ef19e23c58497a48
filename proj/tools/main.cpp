// Copyright 2026 The xcnet Authors. All Rights Reserved.
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

// xcnet command-line driver: train, eval, gradcheck, sweep, corrupt-export.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "xcnet/checkpoint.hpp"
#include "xcnet/config.hpp"
#include "xcnet/corrupt.hpp"
#include "xcnet/gradcheck.hpp"
#include "xcnet/train.hpp"

namespace fs = std::filesystem;
using namespace xcnet;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kConfigFingerprintMismatch:
    case ErrorCode::kUnknownFamily:
    case ErrorCode::kSeverityOutOfRange:
      return kExitConfig;
    case ErrorCode::kIoError:
    case ErrorCode::kBadMagic:
    case ErrorCode::kTruncatedFile:
    case ErrorCode::kCountMismatch:
    case ErrorCode::kParseError:
    case ErrorCode::kEmptyDataset:
    case ErrorCode::kLabelOutOfRange:
      return kExitData;
    default:
      return kExitRuntime;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

struct Common {
  std::string config;
  std::string out;
  std::string data_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t threads = 1;
};

RunConfig load_run(const Common& c) {
  RunConfig cfg = c.config.empty() ? parse_config("") : load_config(c.config);
  if (c.seed_set) cfg.seed = c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

fs::path data_root(const Common& c) { return c.data_dir.empty() ? default_data_root() : fs::path(c.data_dir); }

Model load_model(const RunConfig& cfg, const std::string& checkpoint) {
  if (checkpoint.empty()) throw Error(ErrorCode::kConfigError, "--checkpoint is required");
  return model_from_checkpoint(cfg.model, load_checkpoint(checkpoint));
}

int cmd_train(const Common& c) {
  const RunConfig cfg = load_run(c);
  const Dataset train_set = load_split(cfg.data, Split::kTrain, data_root(c));
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  write_text(out / "config.ini", cfg.materialize());
  TrainResult r = train(cfg.model, train_set, cfg.optim, cfg.seed);
  save_checkpoint(make_checkpoint(r.model), out / "checkpoint.xcn");
  write_text(out / "history.csv", history_csv(r.history));
  const auto& last = r.history.back();
  std::printf("epochs=%zu loss=%.6f train_acc=%.4f\n", last.epoch, last.loss, last.train_acc);
  return 0;
}

std::optional<CorruptionSpec> parse_corrupt_flag(const std::string& flag, std::uint64_t seed) {
  if (flag.empty()) return std::nullopt;
  const auto colon = flag.find(':');
  if (colon == std::string::npos) throw Error(ErrorCode::kConfigError, "--corrupt expects family:severity");
  CorruptionSpec spec;
  spec.family = parse_family(flag.substr(0, colon));
  try {
    spec.severity = std::stoi(flag.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfigError, "--corrupt severity is not an integer");
  }
  spec.seed = seed;
  return spec;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& split, const std::string& corrupt_flag) {
  const RunConfig cfg = load_run(c);
  const auto spec = parse_corrupt_flag(corrupt_flag, cfg.corruption.seed);
  const Model model = load_model(cfg, checkpoint);
  Dataset ds = load_split(cfg.data, parse_split(split), data_root(c));
  if (spec) ds = corrupt_dataset(ds, *spec, cfg.corruption.table);
  std::printf("dataset=%s acc=%.4f\n", ds.name.c_str(), accuracy(model, ds, c.threads));
  return 0;
}

int cmd_gradcheck(const std::string& size, std::uint64_t seed, double fault) {
  const GradCheckReport report = run_gradcheck(parse_gradcheck_size(size), seed, fault);
  std::fputs(report.csv().c_str(), stdout);
  if (report.all_pass()) return 0;
  std::string names;
  for (const auto& n : report.failures()) names += (names.empty() ? "" : ",") + n;
  std::fprintf(stderr, "gradcheck failed: %s\n", names.c_str());
  return kExitRuntime;
}

int cmd_sweep(const Common& c, const std::string& checkpoint, const std::string& split, const std::string& families) {
  const RunConfig cfg = load_run(c);
  SweepOptions opts;
  opts.families = families.empty() ? cfg.corruption.families : parse_family_list(families);
  opts.seed = cfg.corruption.seed;
  opts.table = cfg.corruption.table;
  opts.threads = c.threads;
  const Model model = load_model(cfg, checkpoint);
  const Dataset ds = load_split(cfg.data, parse_split(split), data_root(c));
  const EvalReport report = robustness_sweep(model, ds, opts);
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  write_text(out / "sweep.csv", grid_csv(report));
  write_text(out / "mrs.csv", mrs_csv(report));
  std::printf("%-20s", "family");
  for (int s = 0; s <= kMaxSeverity; ++s) std::printf("   s%d  ", s);
  std::printf("   mrs\n");
  for (auto f : opts.families) {
    std::printf("%-20s", to_string(f).c_str());
    for (int s = 0; s <= kMaxSeverity; ++s) std::printf(" %.4f", report.cell(f, s));
    std::printf(" %.5f\n", report.family_mrs(f));
  }
  return 0;
}

int cmd_corrupt_export(const Common& c, const std::string& split, const std::string& family, int severity) {
  const RunConfig cfg = load_run(c);
  const CorruptionSpec spec{parse_family(family), severity, cfg.corruption.seed};
  const Dataset ds = corrupt_dataset(load_split(cfg.data, parse_split(split), data_root(c)), spec, cfg.corruption.table);
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  const std::string stem = split + "-" + family + "-s" + std::to_string(severity);
  save_idx(ds, out / (stem + "-images.idx"), out / (stem + "-labels.idx"));
  std::printf("wrote %zu images to %s\n", ds.size(), (out / (stem + "-images.idx")).string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  xcnet::retain_freed_memory();
  CLI::App app{"xcnet: normalized cross-correlation networks"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("-c,--config", common.config, "INI run configuration");
    if (needs_out) sub->add_option("-o,--out", common.out, "output directory (overrides [output] dir)");
    sub->add_option("--data-dir", common.data_dir, "data root (default: $XCNET_DATA_DIR or cwd)");
    sub->add_option("--threads", common.threads, "evaluation worker cap")->check(CLI::PositiveNumber);
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { common.seed = s, common.seed_set = true; }, "run seed");
  };

  auto* train_cmd = app.add_subcommand("train", "train a model from a config");
  add_common(train_cmd, true);

  std::string checkpoint, split = "test", corrupt_flag, families, family, size = "small";
  int severity = 0;
  double fault = 1.0;
  std::uint64_t gc_seed = 42;

  auto* eval_cmd = app.add_subcommand("eval", "accuracy of a checkpoint on one split");
  add_common(eval_cmd, false);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", split, "split: train|test|target");
  eval_cmd->add_option("--corrupt", corrupt_flag, "family:severity applied before scoring");

  auto* gc_cmd = app.add_subcommand("gradcheck", "compare reverse-mode gradients with finite differences");
  gc_cmd->add_option("--size", size, "small|layer|model");
  gc_cmd->add_option("--seed", gc_seed, "seed");
  gc_cmd->add_option("--fault", fault, "scale one backward rule (negative control)")->group("");

  auto* sweep_cmd = app.add_subcommand("sweep", "accuracy grid and MRS over corruption severities");
  add_common(sweep_cmd, true);
  sweep_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  sweep_cmd->add_option("--data", split, "split: train|test|target");
  sweep_cmd->add_option("--families", families, "comma list or 'all' (default: config)");

  auto* export_cmd = app.add_subcommand("corrupt-export", "write a corrupted split as IDX files");
  add_common(export_cmd, true);
  export_cmd->add_option("--data", split, "split: train|test|target");
  export_cmd->add_option("--family", family, "corruption family")->required();
  export_cmd->add_option("--severity", severity, "0..5")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(common);
    if (*eval_cmd) return cmd_eval(common, checkpoint, split, corrupt_flag);
    if (*gc_cmd) return cmd_gradcheck(size, gc_seed, fault);
    if (*sweep_cmd) return cmd_sweep(common, checkpoint, split, families);
    if (*export_cmd) return cmd_corrupt_export(common, split, family, severity);
  } catch (const Error& e) {
    std::fprintf(stderr, "xcnet: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "xcnet: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
