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

#include "xcnet/tensor.hpp"

namespace xcnet {

/// Labelled single-channel image set. Pixels lie in [0, 1].
struct Dataset {
  Tensor images;  ///< [N, H, W, 1]
  std::vector<int> labels;
  std::size_t n_classes = 10;
  std::string name;
  std::string provenance;  ///< source files and resize method

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t height() const { return images.dim(1); }
  std::size_t width() const { return images.dim(2); }
  /// Image i as [H, W, C].
  Tensor image(std::size_t i) const;
  /// Samples `index` as a batch [len, H, W, C].
  Tensor batch(const std::vector<std::size_t>& index) const;
  std::vector<int> batch_labels(const std::vector<std::size_t>& index) const;
};

/// First `n` samples (all when n == 0 or n >= size()).
Dataset head(const Dataset& ds, std::size_t n);

/// Bilinear resize of an [H, W, C] image with corner-aligned sampling
/// (output corners map exactly onto input corners).
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

/// Reads an IDX image/label pair (magic 2051 / 2049, big-endian header).
/// Pixels are scaled by 1/255 and resized to `side` x `side` (0 keeps the
/// stored size). `limit` caps how many samples are decoded (0 = all).
/// Errors: BadMagic, CountMismatch, TruncatedFile, IoError.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t side = 32, std::size_t limit = 0);

/// Reads "label idx:val ..." lines (USPS distribution format): 1-based
/// labels 1..10 become 0..9, values in [-1, 1] are rescaled to [0, 1] on a
/// `side` x `side` grid, then resized to `out_side`. ParseError carries the
/// line number.
Dataset load_svmtext(const std::filesystem::path& path, std::size_t side = 16, std::size_t out_side = 32);

/// Writes images (rounded to u8) and labels as an IDX pair.
void save_idx(const Dataset& ds, const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Two-class 16x16 corpus: class 0 is a horizontal bar, class 1 a cross,
/// both with jittered position, length and intensities. Labels alternate,
/// so the classes are balanced to within one sample. `texture` > 0 adds a
/// smooth random field with that standard deviation to every image.
Dataset synth_corpus(std::uint64_t seed, std::size_t n, std::size_t side = 16, double texture = 0.0);

}  // namespace xcnet
