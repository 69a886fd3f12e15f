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

// The .jdc compressed-image container: header + range-coded latent payload.

#ifndef JDC_BITSTREAM_HPP_
#define JDC_BITSTREAM_HPP_

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "jdc/checkpoint.hpp"
#include "jdc/codec_net.hpp"
#include "jdc/common.hpp"
#include "jdc/entropy_model.hpp"
#include "jdc/image.hpp"
#include "jdc/range_coder.hpp"
#include "jdc/tensor.hpp"

namespace jdc {

constexpr char kBitstreamMagic[4] = {'J', 'D', 'C', 'B'};
constexpr uint16_t kBitstreamVersion = 1;

// All multi-byte fields little-endian. Field order after the magic:
// version u16, model hash u64, orig w/h u32, padded w/h u32,
// latent c/h/w u16, prior index u16, payload length u32, payload bytes.
struct JdcHeader {
  uint64_t model_hash = 0;
  uint32_t orig_w = 0, orig_h = 0;
  uint32_t padded_w = 0, padded_h = 0;
  uint16_t latent_c = 0, latent_h = 0, latent_w = 0;
  uint16_t prior = 0;
};

struct JdcFile {
  JdcHeader header;
  std::vector<uint8_t> payload;
};

inline std::vector<uint8_t> serialize_jdc(const JdcFile& f) {
  using ckptdetail::put_u16;
  using ckptdetail::put_u32;
  using ckptdetail::put_u64;
  std::vector<uint8_t> out;
  out.insert(out.end(), kBitstreamMagic, kBitstreamMagic + 4);
  put_u16(out, kBitstreamVersion);
  put_u64(out, f.header.model_hash);
  put_u32(out, f.header.orig_w);
  put_u32(out, f.header.orig_h);
  put_u32(out, f.header.padded_w);
  put_u32(out, f.header.padded_h);
  put_u16(out, f.header.latent_c);
  put_u16(out, f.header.latent_h);
  put_u16(out, f.header.latent_w);
  put_u16(out, f.header.prior);
  put_u32(out, uint32_t(f.payload.size()));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

inline JdcFile parse_jdc(const std::vector<uint8_t>& bytes) {
  ckptdetail::Reader r{bytes, 0};
  r.need(4);
  if (!std::equal(kBitstreamMagic, kBitstreamMagic + 4,
                  bytes.begin()))
    throw DecodeError("parse_jdc: bad magic");
  r.pos = 4;
  const uint16_t version = r.u16();
  if (version != kBitstreamVersion)
    throw DecodeError("parse_jdc: unsupported version " +
                      std::to_string(version));
  JdcFile f;
  f.header.model_hash = r.u64();
  f.header.orig_w = r.u32();
  f.header.orig_h = r.u32();
  f.header.padded_w = r.u32();
  f.header.padded_h = r.u32();
  f.header.latent_c = r.u16();
  f.header.latent_h = r.u16();
  f.header.latent_w = r.u16();
  f.header.prior = r.u16();
  const uint32_t plen = r.u32();
  if (bytes.size() - r.pos != plen)
    throw DecodeError("parse_jdc: payload length mismatch");
  f.payload.assign(bytes.begin() + long(r.pos), bytes.end());
  return f;
}

namespace bitdetail {

// per-element table pointers in the latent's NCHW order
inline std::vector<const ChannelCdf*> element_tables(const CdfTable& table,
                                                     const Shape& s) {
  std::vector<const ChannelCdf*> tabs;
  tabs.reserve(size_t(s.n) * s.c * s.h * s.w);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int64_t p = 0; p < int64_t(s.h) * s.w; ++p)
        tabs.push_back(&table.channels[size_t(c)]);
  return tabs;
}

}  // namespace bitdetail

struct CompressStats {
  size_t file_bytes = 0;
  double estimate_bits = 0.0;  // model cross-entropy of the coded values
  int prior = 0;
};

inline std::vector<uint8_t> compress(CodecModel& model, const ImageF32& img,
                                     CompressStats* stats = nullptr) {
  if (img.channels != 3)
    throw UnsupportedChannels("compress: need 3-channel input");
  auto [padded, orig] = pad_to_multiple(img, CodecConfig::kDownsampleFactor);

  Tape tape;
  ParamBinding bind(tape);
  NodeId x = tape.leaf(Shape{1, 3, padded.height, padded.width}, padded.data);
  NodeId latent = encode_analysis(tape, x, model, bind);
  const Shape ls = tape.shape(latent);
  std::vector<float> q = quantize_values(tape.val(latent));

  std::vector<DensityEval> densities;
  densities.reserve(model.priors.size());
  for (const auto& pr : model.priors) densities.push_back(DensityEval::from(pr));
  auto [prior, est_bits] = select_prior(q, ls, densities);

  CdfTable table = build_cdf_tables(densities[size_t(prior)]);
  std::vector<int> symbols(q.size());
  for (size_t i = 0; i < q.size(); ++i) symbols[i] = int(std::lround(q[i]));
  Bitstream bs = rc_encode(symbols, bitdetail::element_tables(table, ls));

  JdcFile f;
  f.header.model_hash = model_hash64(model);
  f.header.orig_w = uint32_t(orig.second);
  f.header.orig_h = uint32_t(orig.first);
  f.header.padded_w = uint32_t(padded.width);
  f.header.padded_h = uint32_t(padded.height);
  f.header.latent_c = uint16_t(ls.c);
  f.header.latent_h = uint16_t(ls.h);
  f.header.latent_w = uint16_t(ls.w);
  f.header.prior = uint16_t(prior);
  f.payload = std::move(bs.bytes);
  std::vector<uint8_t> out = serialize_jdc(f);
  if (stats != nullptr) {
    stats->file_bytes = out.size();
    stats->estimate_bits = est_bits;
    stats->prior = prior;
  }
  return out;
}

inline ImageF32 decompress(CodecModel& model, const std::vector<uint8_t>& bytes) {
  JdcFile f = parse_jdc(bytes);
  if (f.header.model_hash != model_hash64(model))
    throw ModelMismatch("decompress: bitstream was produced by a different model");
  if (int(f.header.prior) >= model.cfg.num_priors)
    throw DecodeError("decompress: prior index out of range");
  if (f.header.latent_c != uint16_t(model.cfg.latent_channels))
    throw DecodeError("decompress: latent channel mismatch");
  if (f.header.padded_w % CodecConfig::kDownsampleFactor != 0 ||
      f.header.padded_h % CodecConfig::kDownsampleFactor != 0 ||
      uint32_t(f.header.latent_h) * CodecConfig::kDownsampleFactor !=
          f.header.padded_h ||
      uint32_t(f.header.latent_w) * CodecConfig::kDownsampleFactor !=
          f.header.padded_w ||
      f.header.orig_w > f.header.padded_w ||
      f.header.orig_h > f.header.padded_h || f.header.orig_w == 0 ||
      f.header.orig_h == 0)
    throw DecodeError("decompress: inconsistent header dimensions");

  const Shape ls{1, int(f.header.latent_c), int(f.header.latent_h),
                 int(f.header.latent_w)};
  DensityEval d = DensityEval::from(model.priors[f.header.prior]);
  CdfTable table = build_cdf_tables(d);

  Bitstream bs;
  bs.bytes = std::move(f.payload);
  const size_t n = size_t(ls.n) * ls.c * ls.h * ls.w;
  std::vector<int> symbols =
      rc_decode(bs, bitdetail::element_tables(table, ls), n);
  std::vector<float> latent(symbols.begin(), symbols.end());

  Tape tape;
  ParamBinding bind(tape);
  NodeId z = tape.leaf(ls, latent);
  NodeId xhat = decode_synthesis(tape, z, model, bind);
  const auto& xv = tape.val(xhat);

  ImageF32 padded(3, int(f.header.padded_h), int(f.header.padded_w));
  std::copy(xv.begin(), xv.end(), padded.data.begin());
  ImageF32 out =
      crop_to_dims(padded, int(f.header.orig_h), int(f.header.orig_w));
  for (auto& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

inline void write_bytes(const std::string& path,
                        const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), long(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

inline std::vector<uint8_t> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open: " + path);
  const auto size = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(size));
  f.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!f) throw IoError("read failed: " + path);
  return bytes;
}

}  // namespace jdc

#endif  // JDC_BITSTREAM_HPP_
