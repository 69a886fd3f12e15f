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

#ifndef JDC_IMAGE_HPP_
#define JDC_IMAGE_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "jdc/common.hpp"

namespace jdc {

// Planar float image in [0,1]. Layout: data[c * h * w + y * w + x].
struct ImageF32 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  ImageF32() = default;
  ImageF32(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w),
        data(static_cast<size_t>(c) * h * w, fill) {}

  float& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t num_samples() const { return data.size(); }
  bool same_dims(const ImageF32& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

// Square crop window. x0/y0 are offsets from the top-left corner.
struct CropSpec {
  int x0 = 0;
  int y0 = 0;
  int size = 0;
};

inline ImageF32 extract_crop(const ImageF32& img, const CropSpec& spec) {
  if (spec.x0 < 0 || spec.y0 < 0 || spec.size < 0 ||
      spec.x0 + spec.size > img.width || spec.y0 + spec.size > img.height) {
    throw OutOfBounds("crop (" + std::to_string(spec.x0) + "," +
                      std::to_string(spec.y0) + ")+" +
                      std::to_string(spec.size) + " exceeds " +
                      std::to_string(img.width) + "x" +
                      std::to_string(img.height));
  }
  ImageF32 out(img.channels, spec.size, spec.size);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < spec.size; ++y)
      for (int x = 0; x < spec.size; ++x)
        out.at(c, y, x) = img.at(c, spec.y0 + y, spec.x0 + x);
  return out;
}

// Pads with edge replication so both dims become multiples of m.
// Returns the padded image and the original (height, width).
inline std::pair<ImageF32, std::pair<int, int>> pad_to_multiple(
    const ImageF32& img, int m) {
  if (m < 1) throw ConfigError("pad_to_multiple: m must be >= 1");
  const int ph = (img.height + m - 1) / m * m;
  const int pw = (img.width + m - 1) / m * m;
  if (ph == img.height && pw == img.width)
    return {img, {img.height, img.width}};
  ImageF32 out(img.channels, ph, pw);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < ph; ++y) {
      const int sy = std::min(y, img.height - 1);
      for (int x = 0; x < pw; ++x)
        out.at(c, y, x) = img.at(c, sy, std::min(x, img.width - 1));
    }
  return {std::move(out), {img.height, img.width}};
}

inline ImageF32 crop_to_dims(const ImageF32& img, int h, int w) {
  if (h > img.height || w > img.width)
    throw OutOfBounds("crop_to_dims exceeds image");
  ImageF32 out(img.channels, h, w);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y, x);
  return out;
}

namespace detail {

inline int ppm_next_int(std::istream& in) {
  // Skips whitespace and '#' comments between header tokens.
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {}
    } else if (!std::isspace(ch)) {
      in.unget();
      break;
    }
  }
  int v;
  if (!(in >> v)) throw IoError("PPM: malformed header");
  return v;
}

inline ImageF32 load_ppm(std::istream& in, const std::string& path) {
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '6') throw IoError("not a P6 PPM: " + path);
  const int w = ppm_next_int(in);
  const int h = ppm_next_int(in);
  const int maxval = ppm_next_int(in);
  in.get();  // single whitespace byte before raster
  if (w <= 0 || h <= 0) throw IoError("PPM: bad dimensions: " + path);
  if (maxval != 255 && maxval != 65535)
    throw UnsupportedChannels("PPM: maxval must be 255 or 65535: " + path);
  const int bytes_per = maxval == 255 ? 1 : 2;
  std::vector<uint8_t> raw(static_cast<size_t>(w) * h * 3 * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<size_t>(in.gcount()) != raw.size())
    throw IoError("PPM: truncated raster: " + path);
  ImageF32 img(3, h, w);
  const float scale = 1.0f / static_cast<float>(maxval);
  size_t i = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        uint32_t v = raw[i++];
        if (bytes_per == 2) v = (v << 8) | raw[i++];  // big-endian
        img.at(c, y, x) = static_cast<float>(v) * scale;
      }
  return img;
}

inline void save_ppm(const ImageF32& img, std::ostream& out) {
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> raw(static_cast<size_t>(img.width) * img.height * 3);
  size_t i = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(img.at(c, y, x), 0.0f, 1.0f);
        raw[i++] = static_cast<uint8_t>(std::lround(v * 255.0f));
      }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
}

inline bool has_suffix(const std::string& s, const std::string& suf) {
  if (s.size() < suf.size()) return false;
  std::string tail = s.substr(s.size() - suf.size());
  std::transform(tail.begin(), tail.end(), tail.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return tail == suf;
}

}  // namespace detail

}  // namespace jdc

#ifdef JDC_HAS_PNG
#include "jdc/png_io.hpp"
#endif

namespace jdc {

inline ImageF32 load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  int c0 = in.peek();
  if (c0 == 'P') return detail::load_ppm(in, path);
#ifdef JDC_HAS_PNG
  if (c0 == 0x89) {
    in.close();
    return load_png(path);
  }
#endif
  throw UnsupportedChannels("unsupported image format: " + path);
}

inline void save_image(const ImageF32& img, const std::string& path) {
  if (img.channels != 3)
    throw UnsupportedChannels("save_image expects 3 channels");
#ifdef JDC_HAS_PNG
  if (detail::has_suffix(path, ".png")) {
    save_png(img, path);
    return;
  }
#endif
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  detail::save_ppm(img, out);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace jdc

#endif  // JDC_IMAGE_HPP_
