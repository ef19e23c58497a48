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

#include "xcnet/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

namespace xcnet {

namespace {

constexpr char kMagic[4] = {'X', 'C', 'N', '1'};
const std::string kBufferPrefix = "buffer:";
const std::string kFingerprintPrefix = "fingerprint:";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes, std::size_t limit) : bytes_(bytes), limit_(limit) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > limit_) throw Error(ErrorCode::kTruncatedFile, "checkpoint ends mid-record");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a_bytes(const std::uint8_t* data, std::size_t n) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(data), n));
}

void write_tensor(Writer& w, const std::string& name, const Tensor& t) {
  if (name.size() > 0xFFFF) throw Error(ErrorCode::kInvalidArgument, "tensor name too long");
  if (t.rank() > 0xFF) throw Error(ErrorCode::kInvalidArgument, "tensor rank too large");
  w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
  w.put_bytes(name);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
  for (auto d : t.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
  for (double v : t.data()) w.put<float>(static_cast<float>(v));
}

}  // namespace

Checkpoint make_checkpoint(const Model& model) {
  Checkpoint ckpt;
  ckpt.params = model.params().items();
  ckpt.buffers = model.buffers().items();
  ckpt.fingerprint = model.config().fingerprint();
  return ckpt;
}

Model model_from_checkpoint(const ModelConfig& config, const Checkpoint& ckpt) {
  if (ckpt.fingerprint != config.fingerprint()) {
    throw Error(ErrorCode::kConfigFingerprintMismatch, "checkpoint was written for a different model configuration");
  }
  TensorList params, buffers;
  for (const auto& p : ckpt.params) params.add(p.name, p.value);
  for (const auto& b : ckpt.buffers) buffers.add(b.name, b.value);
  return Model(config, std::move(params), std::move(buffers));
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  for (char c : kMagic) w.put<char>(c);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.params.size() + ckpt.buffers.size() + 1));
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(ckpt.fingerprint));
  write_tensor(w, kFingerprintPrefix + hex, Tensor(Shape{0}));
  for (const auto& p : ckpt.params) write_tensor(w, p.name, p.value);
  for (const auto& b : ckpt.buffers) write_tensor(w, kBufferPrefix + b.name, b.value);
  const std::uint64_t h = fnv1a_bytes(w.bytes().data(), w.bytes().size());
  w.put<std::uint64_t>(h);
  return std::move(w.bytes());
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "not an XCN1 checkpoint");
  }
  if (bytes.size() < 4 + 4 + 8) throw Error(ErrorCode::kTruncatedFile, "checkpoint shorter than its header");
  const std::size_t body = bytes.size() - 8;
  Reader r(bytes, body);
  r.get_string(4);
  const auto count = r.get<std::uint32_t>();
  Checkpoint ckpt;
  bool have_fingerprint = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>();
    std::string name = r.get_string(name_len);
    const auto rank = r.get<std::uint8_t>();
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint32_t>();
    Tensor t(shape);
    for (auto& v : t.data()) v = static_cast<double>(r.get<float>());
    if (name.rfind(kFingerprintPrefix, 0) == 0) {
      ckpt.fingerprint = std::stoull(name.substr(kFingerprintPrefix.size()), nullptr, 16);
      have_fingerprint = true;
    } else if (name.rfind(kBufferPrefix, 0) == 0) {
      ckpt.buffers.push_back({name.substr(kBufferPrefix.size()), std::move(t)});
    } else {
      ckpt.params.push_back({std::move(name), std::move(t)});
    }
  }
  if (r.pos() != body) throw Error(ErrorCode::kTruncatedFile, "trailing bytes before checksum");
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (stored != fnv1a_bytes(bytes.data(), body)) {
    throw Error(ErrorCode::kTruncatedFile, "checksum mismatch (file truncated or corrupted)");
  }
  if (!have_fingerprint) throw Error(ErrorCode::kConfigFingerprintMismatch, "checkpoint carries no fingerprint");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace xcnet
