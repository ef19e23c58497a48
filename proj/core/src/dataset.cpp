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

#include "xcnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "xcnet/rng.hpp"

namespace xcnet {

Tensor Dataset::image(std::size_t i) const {
  const std::size_t h = images.dim(1), w = images.dim(2), c = images.dim(3);
  if (i >= size()) throw Error(ErrorCode::kAxisOutOfRange, "image index out of range");
  std::vector<double> px(images.data().begin() + static_cast<std::ptrdiff_t>(i * h * w * c),
                         images.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * h * w * c));
  return Tensor(Shape{h, w, c}, std::move(px));
}

Tensor Dataset::batch(const std::vector<std::size_t>& index) const { return take(images, index); }

std::vector<int> Dataset::batch_labels(const std::vector<std::size_t>& index) const {
  std::vector<int> out;
  out.reserve(index.size());
  for (auto i : index) out.push_back(labels.at(i));
  return out;
}

Dataset head(const Dataset& ds, std::size_t n) {
  if (n == 0 || n >= ds.size()) return ds;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Dataset out = ds;
  out.images = ds.batch(idx);
  out.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<std::ptrdiff_t>(n));
  out.provenance += "; first " + std::to_string(n);
  return out;
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) throw Error(ErrorCode::kShapeMismatch, "resize expects [H, W, C]");
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (h == out_h && w == out_w) return image;
  Tensor out(Shape{out_h, out_w, c});
  auto coord = [](std::size_t i, std::size_t out_n, std::size_t in_n) {
    if (out_n <= 1 || in_n <= 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(in_n - 1) / static_cast<double>(out_n - 1);
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = coord(y, out_h, h);
    const auto y0 = static_cast<std::size_t>(std::floor(sy));
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = coord(x, out_w, w);
      const auto x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t k = 0; k < c; ++k) {
        const double a = image[(y0 * w + x0) * c + k], b = image[(y0 * w + x1) * c + k];
        const double d = image[(y1 * w + x0) * c + k], e = image[(y1 * w + x1) * c + k];
        out[(y * out_w + x) * c + k] = (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * d + fx * e);
      }
    }
  }
  return out;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::kTruncatedFile, what + ": header truncated");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::ifstream open_binary(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + p.string());
  return in;
}

// Resizes every sample of a flat [N, h, w] pixel buffer (already in [0,1]).
Tensor to_images(const std::vector<double>& px, std::size_t n, std::size_t h, std::size_t w, std::size_t side) {
  const std::size_t oh = side ? side : h, ow = side ? side : w;
  Tensor out(Shape{n, oh, ow, 1});
  for (std::size_t i = 0; i < n; ++i) {
    Tensor img(Shape{h, w, 1}, std::vector<double>(px.begin() + static_cast<std::ptrdiff_t>(i * h * w),
                                                   px.begin() + static_cast<std::ptrdiff_t>((i + 1) * h * w)));
    const Tensor r = resize_bilinear(img, oh, ow);
    for (std::size_t j = 0; j < oh * ow; ++j) out[i * oh * ow + j] = std::clamp(r[j], 0.0, 1.0);
  }
  return out;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t side, std::size_t limit) {
  auto img = open_binary(images_path);
  auto lab = open_binary(labels_path);
  const std::uint32_t img_magic = read_be32(img, images_path.string());
  if (img_magic != 2051) throw Error(ErrorCode::kBadMagic, images_path.string() + ": image magic " + std::to_string(img_magic));
  const std::uint32_t lab_magic = read_be32(lab, labels_path.string());
  if (lab_magic != 2049) throw Error(ErrorCode::kBadMagic, labels_path.string() + ": label magic " + std::to_string(lab_magic));
  const std::uint32_t n_img = read_be32(img, images_path.string());
  const std::uint32_t rows = read_be32(img, images_path.string());
  const std::uint32_t cols = read_be32(img, images_path.string());
  const std::uint32_t n_lab = read_be32(lab, labels_path.string());
  if (n_img != n_lab) {
    throw Error(ErrorCode::kCountMismatch, std::to_string(n_img) + " images vs " + std::to_string(n_lab) + " labels");
  }
  const std::size_t n = limit ? std::min<std::size_t>(limit, n_img) : n_img;
  const std::size_t per = static_cast<std::size_t>(rows) * cols;

  std::vector<unsigned char> raw(n * per);
  if (!img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw Error(ErrorCode::kTruncatedFile, images_path.string() + ": fewer pixels than the header declares");
  }
  std::vector<unsigned char> raw_labels(n);
  if (!lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(n))) {
    throw Error(ErrorCode::kTruncatedFile, labels_path.string() + ": fewer labels than the header declares");
  }

  Dataset ds;
  std::vector<double> px(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) px[i] = raw[i] / 255.0;
  ds.images = to_images(px, n, rows, cols, side);
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  ds.n_classes = 10;
  for (int l : ds.labels) {
    if (l >= 10) throw Error(ErrorCode::kLabelOutOfRange, labels_path.string() + ": label " + std::to_string(l));
  }
  ds.name = images_path.stem().string();
  ds.provenance = images_path.string() + " + " + labels_path.string() + ", /255, bilinear corner-aligned to " +
                  std::to_string(side ? side : rows);
  return ds;
}

Dataset load_svmtext(const std::filesystem::path& path, std::size_t side, std::size_t out_side) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<double> px;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  const std::size_t per = side * side;
  auto parse_error = [&](const std::string& msg) {
    return Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    double label_value = 0;
    try {
      std::size_t used = 0;
      label_value = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw parse_error("bad label '" + tok + "'");
    }
    const int label = static_cast<int>(label_value);
    if (label < 1 || label > 10 || label != label_value) throw parse_error("label out of range 1..10");
    labels.push_back(label - 1);
    // Unlisted entries are the sparse default, -1 (background).
    std::vector<double> img(per, 0.0);
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw parse_error("token '" + tok + "' is not idx:val");
      std::size_t idx = 0;
      double val = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(tok.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument(tok);
        const std::string v = tok.substr(colon + 1);
        val = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw parse_error("malformed token '" + tok + "'");
      }
      if (idx < 1 || idx > per) throw parse_error("index " + std::to_string(idx) + " outside 1.." + std::to_string(per));
      img[idx - 1] = std::clamp((val + 1.0) / 2.0, 0.0, 1.0);
    }
    px.insert(px.end(), img.begin(), img.end());
  }
  Dataset ds;
  const std::size_t n = labels.size();
  const std::size_t os = out_side ? out_side : side;
  ds.images = n ? to_images(px, n, side, side, os) : Tensor(Shape{0, os, os, 1});
  ds.labels = std::move(labels);
  ds.n_classes = 10;
  ds.name = path.stem().string();
  ds.provenance = path.string() + ", [-1,1]->[0,1], bilinear corner-aligned to " + std::to_string(os);
  return ds;
}

void save_idx(const Dataset& ds, const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
  std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
  if (!img || !lab) throw Error(ErrorCode::kIoError, "cannot write IDX output");
  const auto n = static_cast<std::uint32_t>(ds.size());
  write_be32(img, 2051);
  write_be32(img, n);
  write_be32(img, static_cast<std::uint32_t>(ds.height()));
  write_be32(img, static_cast<std::uint32_t>(ds.width()));
  const std::size_t per = ds.height() * ds.width();
  std::vector<unsigned char> px(static_cast<std::size_t>(n) * per);
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = static_cast<unsigned char>(std::lround(std::clamp(ds.images[i], 0.0, 1.0) * 255.0));
  }
  img.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  write_be32(lab, 2049);
  write_be32(lab, n);
  for (int l : ds.labels) lab.put(static_cast<char>(l));
  if (!img || !lab) throw Error(ErrorCode::kIoError, "IDX write failed");
}

namespace {

// Unit-variance field: white noise smoothed by two passes of a 3x3 box.
std::vector<double> smooth_field(Rng& rng, std::size_t side) {
  std::vector<double> f(side * side);
  for (auto& v : f) v = rng.normal();
  std::vector<double> tmp(f.size());
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) {
        double acc = 0;
        int cnt = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const auto yy = static_cast<std::ptrdiff_t>(y) + dy, xx = static_cast<std::ptrdiff_t>(x) + dx;
            if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(side) || xx >= static_cast<std::ptrdiff_t>(side)) continue;
            acc += f[static_cast<std::size_t>(yy) * side + static_cast<std::size_t>(xx)];
            ++cnt;
          }
        tmp[y * side + x] = acc / cnt;
      }
    f.swap(tmp);
  }
  double mu = 0, sq = 0;
  for (double v : f) mu += v;
  mu /= static_cast<double>(f.size());
  for (double v : f) sq += (v - mu) * (v - mu);
  const double sd = std::sqrt(sq / static_cast<double>(f.size()));
  for (auto& v : f) v = sd > 0 ? (v - mu) / sd : 0.0;
  return f;
}

}  // namespace

Dataset synth_corpus(std::uint64_t seed, std::size_t n, std::size_t side, double texture) {
  if (texture < 0) throw Error(ErrorCode::kInvalidArgument, "synth_corpus texture must be >= 0");
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "synth_corpus needs n >= 1");
  if (side < 12) throw Error(ErrorCode::kInvalidArgument, "synth_corpus needs side >= 12");
  Rng rng(seed);
  Dataset ds;
  ds.images = Tensor(Shape{n, side, side, 1});
  ds.labels.resize(n);
  ds.n_classes = 2;
  ds.name = "synth";
  ds.provenance = "synth_corpus(seed=" + std::to_string(seed) + ", n=" + std::to_string(n) +
                  ", texture=" + std::to_string(texture) + ")";
  const std::size_t per = side * side;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    ds.labels[i] = label;
    const double bg = rng.uniform(0.0, 0.2);
    const double fg = rng.uniform(0.6, 1.0);
    const std::size_t len = 8 + rng.below(side / 4 + 1);   // bar length
    const std::size_t thick = 2;
    const std::size_t x0 = 1 + rng.below(side - len - 1);  // bar start column
    const std::size_t cy = 3 + rng.below(side - 6);        // bar row
    const std::size_t cx = x0 + len / 2 - 1 + rng.below(3); // vertical stroke column (cross)
    const std::size_t vlen = 8 + rng.below(side / 4 + 1);
    const std::size_t vy0 = std::min(cy >= vlen / 2 ? cy - vlen / 2 : 0, side - vlen);
    double* img = ds.images.data().data() + i * per;
    for (std::size_t p = 0; p < per; ++p) img[p] = bg;
    for (std::size_t y = cy; y < std::min(cy + thick, side); ++y) {
      for (std::size_t x = x0; x < x0 + len; ++x) img[y * side + x] = fg;
    }
    if (label == 1) {
      for (std::size_t y = vy0; y < vy0 + vlen; ++y) {
        for (std::size_t x = cx; x < std::min(cx + thick, side); ++x) img[y * side + x] = fg;
      }
    }
    if (texture > 0) {
      const auto field = smooth_field(rng, side);
      for (std::size_t p = 0; p < per; ++p) img[p] = std::clamp(img[p] + texture * field[p], 0.0, 1.0);
    }
  }
  return ds;
}

}  // namespace xcnet
