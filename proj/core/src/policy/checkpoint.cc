// Copyright 2026 The Hapchunk Authors
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

#include "hapchunk/policy/checkpoint.h"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hapchunk/error.h"

namespace hapchunk::policy {
namespace {

constexpr char kMagic[4] = {'H', 'I', 'A', 'M'};

std::uint32_t Crc32(const char* data, std::size_t n) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(data),
            static_cast<uInt>(n)));
}

class Writer {
 public:
  void U32(std::uint32_t v) { Bytes(v, 4); }
  void U64(std::uint64_t v) { Bytes(v, 8); }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }
  void Raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string Take() { return std::move(out_); }

 private:
  void Bytes(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>(v >> (8 * i)));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  std::uint32_t U32() { return static_cast<std::uint32_t>(Bytes(4)); }
  std::uint64_t U64() { return Bytes(8); }
  double F64() { return std::bit_cast<double>(U64()); }
  bool done() const { return at_ == in_.size(); }

 private:
  std::uint64_t Bytes(int n) {
    if (at_ + static_cast<std::size_t>(n) > in_.size()) {
      throw Error(ErrorCode::kTruncated,
                  "checkpoint truncated at byte " + std::to_string(at_));
    }
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[at_++]))
           << (8 * i);
    }
    return v;
  }
  const std::string& in_;
  std::size_t at_ = 0;
};

void WriteConfig(Writer& w, const PolicyConfig& c) {
  w.U64(c.chunk_k);
  w.U64(c.d_model);
  w.U64(c.n_heads);
  w.U64(c.n_encoder_layers);
  w.U64(c.n_decoder_layers);
  w.U64(c.ffn_dim);
  w.U64(c.z_dim);
  w.F64(c.beta_kl);
  w.U32(c.haptic_enabled ? 1 : 0);
  w.F64(c.lr);
  w.U64(c.train_steps);
  w.U64(c.batch_size);
  w.U64(c.rng_seed);
}

PolicyConfig ReadConfig(Reader& r) {
  PolicyConfig c;
  c.chunk_k = r.U64();
  c.d_model = r.U64();
  c.n_heads = r.U64();
  c.n_encoder_layers = r.U64();
  c.n_decoder_layers = r.U64();
  c.ffn_dim = r.U64();
  c.z_dim = r.U64();
  c.beta_kl = r.F64();
  c.haptic_enabled = r.U32() != 0;
  c.lr = r.F64();
  c.train_steps = r.U64();
  c.batch_size = r.U64();
  c.rng_seed = r.U64();
  return c;
}

}  // namespace

std::string EncodeCheckpoint(const PolicyConfig& cfg,
                             const ModelParams& params) {
  Writer w;
  w.Raw(kMagic, 4);
  w.U32(kCheckpointFormatVersion);
  w.U64(0);  // total length, patched below
  WriteConfig(w, cfg);
  const std::vector<Tensor> all = params.All();
  w.U32(static_cast<std::uint32_t>(all.size()));
  for (const Tensor& t : all) {
    w.U32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t dim : t.shape()) w.U64(dim);
    for (double v : t.data()) w.F64(v);
  }
  std::string out = w.Take();
  const std::uint64_t total = out.size() + 4;
  for (int i = 0; i < 8; ++i) out[8 + i] = static_cast<char>(total >> (8 * i));
  const std::uint32_t crc = Crc32(out.data(), out.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(crc >> (8 * i)));
  return out;
}

Checkpoint DecodeCheckpoint(const std::string& bytes) {
  if (bytes.size() < 16) throw Error(ErrorCode::kTruncated, "checkpoint header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kFormat, "not a checkpoint (bad magic)");
  }
  Reader r(bytes);
  r.U32();
  const std::uint32_t version = r.U32();
  if (version != kCheckpointFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                "checkpoint version " + std::to_string(version) +
                    ", expected " + std::to_string(kCheckpointFormatVersion));
  }
  const std::uint64_t total = r.U64();
  if (bytes.size() < total) {
    throw Error(ErrorCode::kTruncated,
                "checkpoint truncated: " + std::to_string(bytes.size()) +
                    " of " + std::to_string(total) + " bytes");
  }
  if (bytes.size() > total) {
    throw Error(ErrorCode::kFormat, "trailing bytes in checkpoint");
  }
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) {
    stored |= static_cast<std::uint32_t>(
                  static_cast<unsigned char>(bytes[bytes.size() - 4 + i]))
              << (8 * i);
  }
  if (total < 20 || Crc32(bytes.data(), bytes.size() - 4) != stored) {
    throw Error(ErrorCode::kChecksumMismatch, "checkpoint checksum mismatch");
  }
  Checkpoint ck;
  ck.config = ReadConfig(r);
  try {
    ck.params = AllocateParams(ck.config);
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint config: ") + e.what());
  }
  const std::vector<Tensor> all = ck.params.All();
  const std::uint32_t count = r.U32();
  if (count != all.size()) {
    throw Error(ErrorCode::kFormat,
                "checkpoint holds " + std::to_string(count) +
                    " tensors, config implies " + std::to_string(all.size()));
  }
  for (Tensor t : all) {
    const std::uint32_t rank = r.U32();
    tensor::Shape shape(rank);
    for (std::size_t& dim : shape) dim = r.U64();
    if (shape != t.shape()) {
      throw Error(ErrorCode::kFormat,
                  "checkpoint tensor " + tensor::ShapeString(shape) +
                      ", expected " + tensor::ShapeString(t.shape()));
    }
    for (double& v : t.data()) v = r.F64();
  }
  r.U32();  // checksum, verified above
  if (!r.done()) throw Error(ErrorCode::kFormat, "trailing bytes in checkpoint");
  return ck;
}

void SaveCheckpoint(const std::filesystem::path& path, const PolicyConfig& cfg,
                    const ModelParams& params) {
  const std::string bytes = EncodeCheckpoint(cfg, params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return DecodeCheckpoint(s.str());
}

std::string ParamsChecksum(const ModelParams& params) {
  uLong crc = crc32(0L, Z_NULL, 0);
  for (const Tensor& t : params.All()) {
    for (double v : t.data()) {
      unsigned char b[8];
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
      crc = crc32(crc, b, 8);
    }
  }
  std::ostringstream s;
  s << std::hex << std::setw(8) << std::setfill('0') << crc;
  return s.str();
}

}  // namespace hapchunk::policy
