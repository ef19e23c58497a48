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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xcnet/corrupt.hpp"
#include "xcnet/dataset.hpp"
#include "xcnet/model.hpp"
#include "xcnet/train.hpp"

namespace xcnet {

enum class DataSource { kSynth, kIdx };

struct DataConfig {
  DataSource source = DataSource::kSynth;
  std::size_t synth_n = 256;
  std::uint64_t synth_seed = 1;
  double synth_texture = 0.0;
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  std::string target;       ///< optional sparse-text target set (e.g. USPS)
  std::size_t limit = 10000;  ///< source training cap; 0 = all
  std::size_t side = 32;      ///< resize target for file-backed data
};

struct CorruptionConfig {
  std::vector<CorruptionFamily> families = all_families();
  std::uint64_t seed = 0;
  SeverityTable table{};
};

/// Full experiment description. Every field has a default, so an empty file
/// is a valid config.
struct RunConfig {
  ModelConfig model;
  OptimConfig optim;
  DataConfig data;
  CorruptionConfig corruption;
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  /// Canonical INI text with every default filled in.
  std::string materialize() const;
  std::uint64_t fingerprint() const;
};

/// INI-style parser: [section] headers, key = value lines, '#' or ';'
/// comments. Unknown sections or keys, duplicate keys and malformed values
/// throw ConfigError naming the offending key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Resolves a data path: absolute paths are kept; relative ones are taken
/// from `root` (XCNET_DATA_DIR by default, else the working directory).
std::filesystem::path resolve_data_path(const std::string& path, const std::filesystem::path& root);
std::filesystem::path default_data_root();

enum class Split { kTrain, kTest, kTarget };
Split parse_split(const std::string& name);

/// Loads one split. For the synthetic source, test is a fresh corpus from
/// synth_seed + 1 and there is no target split.
Dataset load_split(const DataConfig& data, Split split, const std::filesystem::path& root);

/// Parses a comma list of family names, or "all".
std::vector<CorruptionFamily> parse_family_list(const std::string& text);

}  // namespace xcnet
