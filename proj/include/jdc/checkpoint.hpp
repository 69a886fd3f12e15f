// Copyright (c) the JDC project authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Checkpoint container: magic "JDCM", format version u16, config block, then
// named arrays (name length u16, name bytes, dtype u8, rank u8, dims
// u32 x rank, raw little-endian payload). Bit-exact save/load.

#ifndef JDC_CHECKPOINT_HPP_
#define JDC_CHECKPOINT_HPP_

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "jdc/codec_net.hpp"
#include "jdc/common.hpp"

namespace jdc {

constexpr uint16_t kCheckpointVersion = 1;

// --- SHA-256 (FIPS 180-4), used for the 8-byte model hash -----------------

namespace sha256detail {

struct Sha256 {
  uint32_t h[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                   0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
  uint8_t buf[64];
  size_t buf_len = 0;
  uint64_t total = 0;

  static uint32_t rotr(uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

  void block(const uint8_t* p) {
    static const uint32_t K[64] = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b,
        0x59f111f1, 0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01,
        0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7,
        0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc,
        0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152,
        0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
        0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
        0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
        0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819,
        0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116, 0x1e376c08,
        0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f,
        0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
        0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
    uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (uint32_t(p[i * 4]) << 24) | (uint32_t(p[i * 4 + 1]) << 16) |
             (uint32_t(p[i * 4 + 2]) << 8) | uint32_t(p[i * 4 + 3]);
    for (int i = 16; i < 64; ++i) {
      const uint32_t s0 =
          rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      const uint32_t s1 =
          rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5],
             g = h[6], hh = h[7];
    for (int i = 0; i < 64; ++i) {
      const uint32_t S1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      const uint32_t ch = (e & f) ^ (~e & g);
      const uint32_t t1 = hh + S1 + ch + K[i] + w[i];
      const uint32_t S0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      const uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      const uint32_t t2 = S0 + maj;
      hh = g; g = f; f = e; e = d + t1;
      d = c; c = b; b = a; a = t1 + t2;
    }
    h[0] += a; h[1] += b; h[2] += c; h[3] += d;
    h[4] += e; h[5] += f; h[6] += g; h[7] += hh;
  }

  void update(const uint8_t* p, size_t n) {
    total += n;
    while (n > 0) {
      const size_t take = std::min(n, sizeof(buf) - buf_len);
      std::memcpy(buf + buf_len, p, take);
      buf_len += take;
      p += take;
      n -= take;
      if (buf_len == 64) {
        block(buf);
        buf_len = 0;
      }
    }
  }

  void finish(uint8_t out[32]) {
    const uint64_t bits = total * 8;
    uint8_t pad = 0x80;
    update(&pad, 1);
    uint8_t zero = 0;
    while (buf_len != 56) update(&zero, 1);
    uint8_t len[8];
    for (int i = 0; i < 8; ++i) len[i] = uint8_t(bits >> (56 - i * 8));
    update(len, 8);
    for (int i = 0; i < 8; ++i) {
      out[i * 4] = uint8_t(h[i] >> 24);
      out[i * 4 + 1] = uint8_t(h[i] >> 16);
      out[i * 4 + 2] = uint8_t(h[i] >> 8);
      out[i * 4 + 3] = uint8_t(h[i]);
    }
  }
};

}  // namespace sha256detail

// --- Little-endian byte plumbing -------------------------------------------

namespace ckptdetail {

inline void put_u16(std::vector<uint8_t>& v, uint16_t x) {
  v.push_back(uint8_t(x));
  v.push_back(uint8_t(x >> 8));
}
inline void put_u32(std::vector<uint8_t>& v, uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back(uint8_t(x >> (8 * i)));
}
inline void put_u64(std::vector<uint8_t>& v, uint64_t x) {
  for (int i = 0; i < 8; ++i) v.push_back(uint8_t(x >> (8 * i)));
}
inline void put_f32(std::vector<uint8_t>& v, float x) {
  uint32_t u;
  std::memcpy(&u, &x, 4);
  put_u32(v, u);
}

struct Reader {
  const std::vector<uint8_t>& data;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > data.size()) throw DecodeError("checkpoint: truncated");
  }
  uint16_t u16() {
    need(2);
    uint16_t x = uint16_t(data[pos]) | (uint16_t(data[pos + 1]) << 8);
    pos += 2;
    return x;
  }
  uint32_t u32() {
    need(4);
    uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= uint32_t(data[pos + i]) << (8 * i);
    pos += 4;
    return x;
  }
  uint64_t u64() {
    need(8);
    uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= uint64_t(data[pos + i]) << (8 * i);
    pos += 8;
    return x;
  }
  float f32() {
    const uint32_t u = u32();
    float x;
    std::memcpy(&x, &u, 4);
    return x;
  }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data.data() + pos), n);
    pos += n;
    return s;
  }
};

constexpr uint8_t kDtypeF32 = 0;
constexpr uint8_t kDtypeU8 = 1;

inline void put_f32_array(std::vector<uint8_t>& out, const std::string& name,
                          const Shape& s, const std::vector<float>& data) {
  put_u16(out, uint16_t(name.size()));
  out.insert(out.end(), name.begin(), name.end());
  out.push_back(kDtypeF32);
  out.push_back(4);  // rank
  put_u32(out, uint32_t(s.n));
  put_u32(out, uint32_t(s.c));
  put_u32(out, uint32_t(s.h));
  put_u32(out, uint32_t(s.w));
  for (float v : data) put_f32(out, v);
}

inline void put_u8_array(std::vector<uint8_t>& out, const std::string& name,
                         const std::vector<uint8_t>& data) {
  put_u16(out, uint16_t(name.size()));
  out.insert(out.end(), name.begin(), name.end());
  out.push_back(kDtypeU8);
  out.push_back(1);  // rank
  put_u32(out, uint32_t(data.size()));
  out.insert(out.end(), data.begin(), data.end());
}

}  // namespace ckptdetail

// Serialized parameter values only, in declaration order; the basis of the
// 8-byte model hash carried in every bitstream.
inline std::vector<uint8_t> serialize_param_values(CodecModel& m) {
  std::vector<uint8_t> out;
  for (Param* p : m.params())
    for (float v : p->value) ckptdetail::put_f32(out, v);
  return out;
}

inline uint64_t model_hash64(CodecModel& m) {
  const auto bytes = serialize_param_values(m);
  sha256detail::Sha256 h;
  h.update(bytes.data(), bytes.size());
  uint8_t digest[32];
  h.finish(digest);
  uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= uint64_t(digest[i]) << (8 * i);
  return x;
}

inline std::vector<uint8_t> serialize_checkpoint(
    CodecModel& m,
    const std::map<std::string, std::vector<uint8_t>>& extras = {}) {
  std::vector<uint8_t> out;
  out.insert(out.end(), {'J', 'D', 'C', 'M'});
  ckptdetail::put_u16(out, kCheckpointVersion);
  // config block
  ckptdetail::put_u32(out, uint32_t(m.cfg.hidden_channels));
  ckptdetail::put_u32(out, uint32_t(m.cfg.latent_channels));
  ckptdetail::put_u32(out, uint32_t(m.cfg.decoder_layers));
  ckptdetail::put_u32(out, uint32_t(m.cfg.num_priors));
  ckptdetail::put_u32(out, uint32_t(m.cfg.mixture_components));
  ckptdetail::put_u64(out, m.step);
  ckptdetail::put_f32(out, m.lambda);
  // arrays
  uint32_t count = uint32_t(m.params().size()) * 3 + uint32_t(extras.size());
  ckptdetail::put_u32(out, count);
  for (Param* p : m.params()) {
    ckptdetail::put_f32_array(out, p->name, p->shape, p->value);
    ckptdetail::put_f32_array(out, p->name + ".adam_m", p->shape, p->adam_m);
    ckptdetail::put_f32_array(out, p->name + ".adam_v", p->shape, p->adam_v);
  }
  for (const auto& [name, data] : extras)
    ckptdetail::put_u8_array(out, name, data);
  return out;
}

inline void save_checkpoint(
    CodecModel& m, const std::string& path,
    const std::map<std::string, std::vector<uint8_t>>& extras = {}) {
  const auto bytes = serialize_checkpoint(m, extras);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          std::streamsize(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

struct LoadedCheckpoint {
  CodecModel model;
  std::map<std::string, std::vector<uint8_t>> extras;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  ckptdetail::Reader r{bytes};
  if (r.str(4) != "JDCM") throw DecodeError("checkpoint: bad magic");
  const uint16_t version = r.u16();
  if (version != kCheckpointVersion)
    throw DecodeError("checkpoint: unsupported version " +
                      std::to_string(version));
  CodecConfig cfg;
  cfg.hidden_channels = int(r.u32());
  cfg.latent_channels = int(r.u32());
  cfg.decoder_layers = int(r.u32());
  cfg.num_priors = int(r.u32());
  cfg.mixture_components = int(r.u32());
  LoadedCheckpoint out{make_model(cfg, 0), {}};
  out.model.step = r.u64();
  out.model.lambda = r.f32();

  std::map<std::string, std::pair<Shape, std::vector<float>>> f32_arrays;
  const uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = r.u16();
    const std::string name = r.str(name_len);
    r.need(2);
    const uint8_t dtype = bytes[r.pos++];
    const uint8_t rank = bytes[r.pos++];
    if (dtype == ckptdetail::kDtypeF32) {
      if (rank != 4) throw DecodeError("checkpoint: f32 arrays must be rank 4");
      Shape s;
      s.n = int(r.u32());
      s.c = int(r.u32());
      s.h = int(r.u32());
      s.w = int(r.u32());
      std::vector<float> data(size_t(s.numel()));
      for (auto& v : data) v = r.f32();
      f32_arrays.emplace(name, std::make_pair(s, std::move(data)));
    } else if (dtype == ckptdetail::kDtypeU8) {
      if (rank != 1) throw DecodeError("checkpoint: u8 arrays must be rank 1");
      const uint32_t n = r.u32();
      r.need(n);
      out.extras.emplace(name,
                         std::vector<uint8_t>(bytes.begin() + long(r.pos),
                                              bytes.begin() + long(r.pos + n)));
      r.pos += n;
    } else {
      throw DecodeError("checkpoint: unknown dtype");
    }
  }

  for (Param* p : out.model.params()) {
    auto fetch = [&f32_arrays, p](const std::string& name,
                                  std::vector<float>& dst) {
      auto it = f32_arrays.find(name);
      if (it == f32_arrays.end())
        throw DecodeError("checkpoint: missing array " + name);
      if (!(it->second.first == p->shape))
        throw DecodeError("checkpoint: shape mismatch for " + name);
      dst = std::move(it->second.second);
    };
    fetch(p->name, p->value);
    fetch(p->name + ".adam_m", p->adam_m);
    fetch(p->name + ".adam_v", p->adam_v);
  }
  return out;
}

}  // namespace jdc

#endif  // JDC_CHECKPOINT_HPP_
