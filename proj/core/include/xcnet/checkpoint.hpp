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

#include "xcnet/model.hpp"

namespace xcnet {

/// On-disk model state. Layout (little-endian):
///   "XCN1" | u32 tensor count | per tensor: u16 name length, UTF-8 name,
///   u8 rank, u32 dims[rank], f32 row-major payload | u64 FNV-1a of all
///   preceding bytes.
/// Learnable tensors keep their names; tracked buffers are prefixed
/// "buffer:". The model-config fingerprint travels as an empty tensor named
/// "fingerprint:<16 hex digits>".
struct Checkpoint {
  std::vector<NamedTensor> params;
  std::vector<NamedTensor> buffers;
  std::uint64_t fingerprint = 0;
};

Checkpoint make_checkpoint(const Model& model);

/// Rebuilds a model; ConfigFingerprintMismatch when the checkpoint was
/// written for a different architecture.
Model model_from_checkpoint(const ModelConfig& config, const Checkpoint& ckpt);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// BadMagic, TruncatedFile (short payload or hash mismatch).
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace xcnet
