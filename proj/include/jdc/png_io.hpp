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

// Minimal PNG reader/writer for 8/16-bit RGB, backed by zlib. Included from
// image.hpp when JDC_HAS_PNG is defined; expects jdc::ImageF32 to be visible.

#ifndef JDC_PNG_IO_HPP_
#define JDC_PNG_IO_HPP_

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "jdc/common.hpp"

namespace jdc {
namespace pngdetail {

inline uint32_t be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) |
         (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

inline void put_be32(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(uint8_t(x >> 24));
  v.push_back(uint8_t(x >> 16));
  v.push_back(uint8_t(x >> 8));
  v.push_back(uint8_t(x));
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

inline void unfilter(std::vector<uint8_t>& raw, int height, int row_bytes,
                     int bpp) {
  std::vector<uint8_t> prev(static_cast<size_t>(row_bytes), 0);
  for (int y = 0; y < height; ++y) {
    uint8_t* row = raw.data() + static_cast<size_t>(y) * (row_bytes + 1);
    const int filter = row[0];
    uint8_t* cur = row + 1;
    switch (filter) {
      case 0:
        break;
      case 1:
        for (int i = bpp; i < row_bytes; ++i) cur[i] += cur[i - bpp];
        break;
      case 2:
        for (int i = 0; i < row_bytes; ++i) cur[i] += prev[i];
        break;
      case 3:
        for (int i = 0; i < row_bytes; ++i) {
          const int left = i >= bpp ? cur[i - bpp] : 0;
          cur[i] += uint8_t((left + prev[i]) / 2);
        }
        break;
      case 4:
        for (int i = 0; i < row_bytes; ++i) {
          const int left = i >= bpp ? cur[i - bpp] : 0;
          const int ul = i >= bpp ? prev[i - bpp] : 0;
          cur[i] += uint8_t(paeth(left, prev[i], ul));
        }
        break;
      default:
        throw DecodeError("PNG: bad filter type " + std::to_string(filter));
    }
    std::memcpy(prev.data(), cur, static_cast<size_t>(row_bytes));
  }
}

}  // namespace pngdetail

inline ImageF32 load_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<uint8_t> file((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (file.size() < 8 || std::memcmp(file.data(), sig, 8) != 0)
    throw IoError("not a PNG: " + path);

  int width = 0, height = 0, depth = 0, color_type = -1;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  while (pos + 8 <= file.size()) {
    const uint32_t len = pngdetail::be32(&file[pos]);
    if (pos + 12 + len > file.size()) throw DecodeError("PNG: truncated chunk");
    const char* type = reinterpret_cast<const char*>(&file[pos + 4]);
    const uint8_t* body = &file[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw DecodeError("PNG: bad IHDR");
      width = int(pngdetail::be32(body));
      height = int(pngdetail::be32(body + 4));
      depth = body[8];
      color_type = body[9];
      if (body[10] != 0 || body[11] != 0)
        throw DecodeError("PNG: unsupported compression/filter method");
      if (body[12] != 0) throw UnsupportedChannels("PNG: interlace unsupported");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), body, body + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (width <= 0 || height <= 0) throw DecodeError("PNG: missing IHDR");
  if (color_type != 2)
    throw UnsupportedChannels("PNG: only 3-channel RGB supported (color type " +
                              std::to_string(color_type) + ")");
  if (depth != 8 && depth != 16)
    throw UnsupportedChannels("PNG: only 8/16-bit supported");

  const int bytes_per = depth / 8;
  const int bpp = 3 * bytes_per;
  const int row_bytes = width * bpp;
  std::vector<uint8_t> raw(static_cast<size_t>(height) * (row_bytes + 1));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  const int zrc = uncompress(raw.data(), &raw_len, idat.data(),
                             static_cast<uLong>(idat.size()));
  if (zrc != Z_OK || raw_len != raw.size())
    throw DecodeError("PNG: inflate failed: " + path);
  pngdetail::unfilter(raw, height, row_bytes, bpp);

  ImageF32 img(3, height, width);
  const float scale = depth == 8 ? 1.0f / 255.0f : 1.0f / 65535.0f;
  for (int y = 0; y < height; ++y) {
    const uint8_t* row = raw.data() + static_cast<size_t>(y) * (row_bytes + 1) + 1;
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) {
        const uint8_t* p = row + (x * 3 + c) * bytes_per;
        const uint32_t v = bytes_per == 1 ? p[0] : (uint32_t(p[0]) << 8) | p[1];
        img.at(c, y, x) = static_cast<float>(v) * scale;
      }
  }
  return img;
}

inline void save_png(const ImageF32& img, const std::string& path) {
  const int row_bytes = img.width * 3;
  std::vector<uint8_t> raw(static_cast<size_t>(img.height) * (row_bytes + 1));
  for (int y = 0; y < img.height; ++y) {
    uint8_t* row = raw.data() + static_cast<size_t>(y) * (row_bytes + 1);
    row[0] = 0;  // no per-row filtering
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(img.at(c, y, x), 0.0f, 1.0f);
        row[1 + x * 3 + c] = uint8_t(std::lround(v * 255.0f));
      }
  }
  uLongf comp_cap = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(comp_cap);
  if (compress2(comp.data(), &comp_cap, raw.data(),
                static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("PNG: deflate failed");
  comp.resize(comp_cap);

  std::vector<uint8_t> out;
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.insert(out.end(), sig, sig + 8);
  auto chunk = [&out](const char* type, const std::vector<uint8_t>& body) {
    pngdetail::put_be32(out, static_cast<uint32_t>(body.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), body.begin(), body.end());
    const uint32_t crc = static_cast<uint32_t>(
        crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
    pngdetail::put_be32(out, crc);
  };
  std::vector<uint8_t> ihdr;
  pngdetail::put_be32(ihdr, static_cast<uint32_t>(img.width));
  pngdetail::put_be32(ihdr, static_cast<uint32_t>(img.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor RGB
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  chunk("IHDR", ihdr);
  chunk("IDAT", comp);
  chunk("IEND", {});

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace jdc

#endif  // JDC_PNG_IO_HPP_
