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

#ifndef JDC_METRICS_HPP_
#define JDC_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "jdc/common.hpp"
#include "jdc/config.hpp"
#include "jdc/image.hpp"

namespace jdc {

// One row of the benchmark output.
struct RDPoint {
  std::string codec_id;
  double lambda = 0.0;
  double bpp = 0.0;
  double ms_ssim = 0.0;
  double psnr = 0.0;
};

inline double mse(const ImageF32& a, const ImageF32& b) {
  if (!a.same_dims(b)) throw ShapeMismatch("mse: dimension mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    acc += d * d;
  }
  return acc / double(a.data.size());
}

inline double psnr(const ImageF32& a, const ImageF32& b) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(m);
}

namespace ssimdetail {

// Rec. 601 luma.
inline std::vector<double> luminance(const ImageF32& img) {
  std::vector<double> y(static_cast<size_t>(img.height) * img.width);
  if (img.channels == 3) {
    for (int r = 0; r < img.height; ++r)
      for (int c = 0; c < img.width; ++c)
        y[size_t(r) * img.width + c] = 0.299 * img.at(0, r, c) +
                                       0.587 * img.at(1, r, c) +
                                       0.114 * img.at(2, r, c);
  } else {
    for (size_t i = 0; i < y.size(); ++i) y[i] = img.data[i];
  }
  return y;
}

inline std::vector<double> gaussian_kernel(int taps, double sigma) {
  std::vector<double> k(taps);
  const double c = (taps - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < taps; ++i) {
    k[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable valid-mode Gaussian filter: (h,w) -> (h-taps+1, w-taps+1).
inline std::vector<double> gauss_filter(const std::vector<double>& img, int h,
                                        int w, const std::vector<double>& k) {
  const int taps = int(k.size());
  const int wo = w - taps + 1;
  const int ho = h - taps + 1;
  std::vector<double> tmp(size_t(h) * wo);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wo; ++x) {
      double acc = 0.0;
      for (int t = 0; t < taps; ++t) acc += k[t] * img[size_t(y) * w + x + t];
      tmp[size_t(y) * wo + x] = acc;
    }
  std::vector<double> out(size_t(ho) * wo);
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x) {
      double acc = 0.0;
      for (int t = 0; t < taps; ++t) acc += k[t] * tmp[size_t(y + t) * wo + x];
      out[size_t(y) * wo + x] = acc;
    }
  return out;
}

// 2x2 mean pooling with stride 2 (floor dims).
inline std::vector<double> downsample2(const std::vector<double>& img, int h,
                                       int w, int& ho, int& wo) {
  ho = h / 2;
  wo = w / 2;
  std::vector<double> out(size_t(ho) * wo);
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x)
      out[size_t(y) * wo + x] =
          0.25 * (img[size_t(2 * y) * w + 2 * x] +
                  img[size_t(2 * y) * w + 2 * x + 1] +
                  img[size_t(2 * y + 1) * w + 2 * x] +
                  img[size_t(2 * y + 1) * w + 2 * x + 1]);
  return out;
}

struct ScaleStats {
  double mean_cs = 0.0;   // contrast-structure term
  double mean_lcs = 0.0;  // full SSIM (luminance * cs) term
};

inline ScaleStats ssim_scale(const std::vector<double>& a,
                             const std::vector<double>& b, int h, int w) {
  constexpr double kK1 = 0.01, kK2 = 0.03;
  constexpr double kC1 = kK1 * kK1, kC2 = kK2 * kK2;  // [0,1] dynamic range
  static const std::vector<double> kWin = gaussian_kernel(11, 1.5);
  const auto mu_a = gauss_filter(a, h, w, kWin);
  const auto mu_b = gauss_filter(b, h, w, kWin);
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto m_aa = gauss_filter(aa, h, w, kWin);
  const auto m_bb = gauss_filter(bb, h, w, kWin);
  const auto m_ab = gauss_filter(ab, h, w, kWin);
  double cs_acc = 0.0, lcs_acc = 0.0;
  for (size_t i = 0; i < mu_a.size(); ++i) {
    const double va = m_aa[i] - mu_a[i] * mu_a[i];
    const double vb = m_bb[i] - mu_b[i] * mu_b[i];
    const double cov = m_ab[i] - mu_a[i] * mu_b[i];
    const double cs = (2.0 * cov + kC2) / (va + vb + kC2);
    const double l =
        (2.0 * mu_a[i] * mu_b[i] + kC1) / (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1);
    cs_acc += cs;
    lcs_acc += l * cs;
  }
  ScaleStats s;
  s.mean_cs = cs_acc / double(mu_a.size());
  s.mean_lcs = lcs_acc / double(mu_a.size());
  return s;
}

}  // namespace ssimdetail

// Single-scale SSIM on luminance (Gaussian 11x11, sigma 1.5).
inline double ssim(const ImageF32& a, const ImageF32& b) {
  if (!a.same_dims(b)) throw ShapeMismatch("ssim: dimension mismatch");
  if (a.height < 11 || a.width < 11)
    throw ShapeMismatch("ssim: image smaller than the 11-tap window");
  const auto ya = ssimdetail::luminance(a);
  const auto yb = ssimdetail::luminance(b);
  return ssimdetail::ssim_scale(ya, yb, a.height, a.width).mean_lcs;
}

// Multi-scale SSIM with the canonical 5-scale exponents. Inputs smaller than
// 176 pixels on a side use however many scales survive the 11-tap window,
// with exponents renormalized to sum to 1.
inline double ms_ssim(const ImageF32& a, const ImageF32& b) {
  if (!a.same_dims(b)) throw ShapeMismatch("ms_ssim: dimension mismatch");
  static const double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  int scales = 0;
  {
    int d = std::min(a.height, a.width);
    while (scales < 5 && d >= 11) {
      ++scales;
      d /= 2;
    }
  }
  if (scales == 0)
    throw ShapeMismatch("ms_ssim: image smaller than the 11-tap window");
  double wsum = 0.0;
  for (int i = 0; i < scales; ++i) wsum += kWeights[i];

  auto ya = ssimdetail::luminance(a);
  auto yb = ssimdetail::luminance(b);
  int h = a.height, w = a.width;
  double result = 1.0;
  for (int s = 0; s < scales; ++s) {
    const auto stats = ssimdetail::ssim_scale(ya, yb, h, w);
    const double weight = kWeights[s] / wsum;
    // cs at every scale; full (luminance-weighted) SSIM at the coarsest.
    const double term = s == scales - 1 ? stats.mean_lcs : stats.mean_cs;
    result *= std::pow(std::max(term, 0.0), weight);
    if (s != scales - 1) {
      int ho, wo;
      ya = ssimdetail::downsample2(ya, h, w, ho, wo);
      yb = ssimdetail::downsample2(yb, h, w, ho, wo);
      h = ho;
      w = wo;
    }
  }
  return result;
}

inline double bpp(uint64_t stream_bytes, int width, int height) {
  if (width <= 0 || height <= 0) throw ConfigError("bpp: zero-pixel image");
  return 8.0 * double(stream_bytes) / (double(width) * double(height));
}

// --- Analytic multiply-accumulate counting -------------------------------

struct LayerSpec {
  std::string name;
  int c_in = 0;
  int c_out = 0;
  int kernel = 1;
  int stride = 1;
  bool transposed = false;
  bool gdn = false;  // counted as c^2 MACs per pixel at this layer's output
};

struct LayerMacs {
  std::string name;
  double conv_macs = 0.0;  // at the requested megapixel count
  double gdn_macs = 0.0;
  double macs() const { return conv_macs + gdn_macs; }
};

// MACs for a layer stack applied to `megapixels` of input. `pixel_scale`
// tracks output pixels per original input pixel across stride changes.
// Convs cost c_out*c_in*k^2 per output pixel; transposed convs the same per
// *input* pixel (scatter form); GDN adds c_out^2 per output pixel.
inline std::vector<LayerMacs> count_macs_layers(
    const std::vector<LayerSpec>& layers, double megapixels) {
  std::vector<LayerMacs> out;
  const double px = megapixels * 1e6;
  double pixel_scale = 1.0;
  for (const auto& l : layers) {
    const double in_px = px * pixel_scale;
    double out_scale = pixel_scale;
    if (l.transposed)
      out_scale *= double(l.stride) * l.stride;
    else
      out_scale /= double(l.stride) * l.stride;
    const double out_px = px * out_scale;
    const double kk = double(l.kernel) * l.kernel;
    LayerMacs lm;
    lm.name = l.name;
    lm.conv_macs = l.transposed ? double(l.c_in) * l.c_out * kk * in_px
                                : double(l.c_out) * l.c_in * kk * out_px;
    if (l.gdn) lm.gdn_macs = double(l.c_out) * l.c_out * out_px;
    out.push_back(lm);
    pixel_scale = out_scale;
  }
  return out;
}

inline std::vector<LayerSpec> encoder_layers(const CodecConfig& cfg) {
  std::vector<LayerSpec> layers;
  const int H = cfg.hidden_channels, L = cfg.latent_channels;
  const int k = CodecConfig::kKernel, s = CodecConfig::kStride;
  layers.push_back({"enc1", 3, H, k, s, false, true});
  layers.push_back({"enc2", H, H, k, s, false, true});
  layers.push_back({"enc3", H, H, k, s, false, true});
  layers.push_back({"enc4", H, L, k, s, false, false});
  return layers;
}

inline std::vector<LayerSpec> decoder_layers_spec(const CodecConfig& cfg) {
  std::vector<LayerSpec> layers;
  const int H = cfg.hidden_channels, L = cfg.latent_channels;
  const int k = CodecConfig::kKernel, s = CodecConfig::kStride;
  const bool deep = cfg.decoder_layers == 8;
  const int cins[4] = {L, H, H, H};
  const int couts[4] = {H, H, H, 3};
  for (int i = 0; i < 4; ++i) {
    if (deep)
      layers.push_back({"dec" + std::to_string(i + 1) + "a", cins[i], cins[i],
                        k, 1, true, false});
    layers.push_back({"dec" + std::to_string(i + 1), cins[i], couts[i], k, s,
                      true, i != 3});
  }
  return layers;
}

struct MacReport {
  std::vector<LayerMacs> encoder;
  std::vector<LayerMacs> decoder;
  double encoder_total = 0.0;
  double encoder_conv_total = 0.0;
  double decoder_total = 0.0;
  double decoder_conv_total = 0.0;
  double total = 0.0;
};

inline MacReport count_macs(const CodecConfig& cfg, double megapixels) {
  cfg.validate();
  MacReport r;
  r.encoder = count_macs_layers(encoder_layers(cfg), megapixels);
  // the decoder stack starts from the latent, at 1/16^2 of the image pixels
  const double df = double(CodecConfig::kDownsampleFactor) *
                    CodecConfig::kDownsampleFactor;
  r.decoder = count_macs_layers(decoder_layers_spec(cfg), megapixels / df);
  for (const auto& l : r.encoder) {
    r.encoder_total += l.macs();
    r.encoder_conv_total += l.conv_macs;
  }
  for (const auto& l : r.decoder) {
    r.decoder_total += l.macs();
    r.decoder_conv_total += l.conv_macs;
  }
  r.total = r.encoder_total + r.decoder_total;
  return r;
}

}  // namespace jdc

#endif  // JDC_METRICS_HPP_
