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

// Analysis/synthesis transforms: four stride-2 kernel-5 (transposed)
// convolutions with GDN/IGDN in between. GDN nonnegativity constraints hold
// by construction: stored parameters are unconstrained and mapped through
// squaring plus floor constants.

#ifndef JDC_CODEC_NET_HPP_
#define JDC_CODEC_NET_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "jdc/common.hpp"
#include "jdc/config.hpp"
#include "jdc/tensor.hpp"

namespace jdc {

constexpr float kGdnBetaMin = 1e-6f;
// Keeps the squaring reparametrization away from its zero-gradient point.
constexpr float kGdnGammaPedestal = 3.814697265625e-6f;  // 2^-18

struct Param {
  std::string name;
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;
  std::vector<float> adam_m;
  std::vector<float> adam_v;

  void init_zero(const std::string& n, const Shape& s) {
    name = n;
    shape = s;
    value.assign(size_t(s.numel()), 0.0f);
    grad.assign(size_t(s.numel()), 0.0f);
    adam_m.assign(size_t(s.numel()), 0.0f);
    adam_v.assign(size_t(s.numel()), 0.0f);
  }
};

struct ConvLayer {
  Param w;
  Param b;
};

struct GdnParams {
  Param beta_raw;   // (1, C, 1, 1); beta = beta_raw^2 + beta_min
  Param gamma_raw;  // (C, C, 1, 1); gamma = gamma_raw^2
};

// Per-step mapping from persistent parameters to tape leaves.
class ParamBinding {
 public:
  explicit ParamBinding(Tape& tape) : tape_(&tape) {}

  NodeId operator()(Param& p) {
    auto it = ids_.find(&p);
    if (it != ids_.end()) return it->second;
    NodeId id = tape_->leaf(p.shape, p.value);
    ids_.emplace(&p, id);
    return id;
  }

  // Adds tape gradients into each bound parameter's grad buffer.
  void harvest() {
    for (auto& [p, id] : ids_) {
      const auto& g = tape_->grad(id);
      for (size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
    }
  }

 private:
  Tape* tape_;
  std::unordered_map<Param*, NodeId> ids_;
};

// y_i = x_i / sqrt(beta_i + sum_j gamma_ij x_j^2). The channel coupling is a
// 1x1 convolution of x^2 with gamma as the kernel and beta as its bias.
inline NodeId gdn_forward(Tape& t, NodeId x, GdnParams& p, ParamBinding& bind) {
  if (t.shape(x).c != p.beta_raw.shape.c)
    throw ShapeMismatch("gdn: channel mismatch");
  NodeId beta = t.add_scalar(t.square(bind(p.beta_raw)), kGdnBetaMin);
  NodeId gamma = t.square(bind(p.gamma_raw));
  NodeId denom2 = t.conv2d(t.square(x), gamma, beta, 1, 0);
  return t.div(x, t.sqrt_(t.clamp_min(denom2, kGdnBetaMin)));
}

// Inverse: x_i = y_i * sqrt(beta_i + sum_j gamma_ij y_j^2).
inline NodeId igdn_forward(Tape& t, NodeId y, GdnParams& p,
                           ParamBinding& bind) {
  if (t.shape(y).c != p.beta_raw.shape.c)
    throw ShapeMismatch("igdn: channel mismatch");
  NodeId beta = t.add_scalar(t.square(bind(p.beta_raw)), kGdnBetaMin);
  NodeId gamma = t.square(bind(p.gamma_raw));
  NodeId denom2 = t.conv2d(t.square(y), gamma, beta, 1, 0);
  return t.mul(y, t.sqrt_(t.clamp_min(denom2, kGdnBetaMin)));
}

// Logistic mixture over one latent channel set; K parallel per-channel
// parameter vectors, all shaped (1, latent_channels, 1, 1).
struct MixturePrior {
  std::vector<Param> weight_logit;
  std::vector<Param> mean;
  std::vector<Param> log_scale;
};

struct CodecModel {
  CodecConfig cfg;
  std::vector<ConvLayer> enc;      // 4 layers
  std::vector<GdnParams> enc_gdn;  // 3, between encoder layers
  std::vector<ConvLayer> dec;      // 4 or 8 layers
  std::vector<GdnParams> dec_gdn;  // 3, between upsampling stages
  std::vector<MixturePrior> priors;
  uint64_t step = 0;
  float lambda = 0.0f;

  std::vector<Param*> params() {
    std::vector<Param*> out;
    auto add_conv = [&out](ConvLayer& l) {
      out.push_back(&l.w);
      out.push_back(&l.b);
    };
    auto add_gdn = [&out](GdnParams& g) {
      out.push_back(&g.beta_raw);
      out.push_back(&g.gamma_raw);
    };
    for (auto& l : enc) add_conv(l);
    for (auto& g : enc_gdn) add_gdn(g);
    for (auto& l : dec) add_conv(l);
    for (auto& g : dec_gdn) add_gdn(g);
    for (auto& p : priors) {
      for (auto& q : p.weight_logit) out.push_back(&q);
      for (auto& q : p.mean) out.push_back(&q);
      for (auto& q : p.log_scale) out.push_back(&q);
    }
    return out;
  }
};

namespace netdetail {

inline void init_conv(ConvLayer& l, const std::string& name, int c_out,
                      int c_in, int k, std::mt19937_64& rng) {
  l.w.init_zero(name + ".w", {c_out, c_in, k, k});
  l.b.init_zero(name + ".b", {1, c_out, 1, 1});
  const float bound = 1.0f / std::sqrt(float(c_in) * k * k);
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (auto& v : l.w.value) v = dist(rng);
}

inline void init_gdn(GdnParams& g, const std::string& name, int c) {
  g.beta_raw.init_zero(name + ".beta_raw", {1, c, 1, 1});
  g.gamma_raw.init_zero(name + ".gamma_raw", {c, c, 1, 1});
  // beta = 1, gamma = 0.1 * I (near-identity start).
  const float beta_raw0 = std::sqrt(1.0f - kGdnBetaMin);
  for (auto& v : g.beta_raw.value) v = beta_raw0;
  const float diag = std::sqrt(0.1f);
  const float off = std::sqrt(kGdnGammaPedestal);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j)
      g.gamma_raw.value[size_t(i) * c + j] = i == j ? diag : off;
}

}  // namespace netdetail

inline CodecModel make_model(const CodecConfig& cfg, uint64_t seed) {
  cfg.validate();
  CodecModel m;
  m.cfg = cfg;
  std::mt19937_64 rng(seed);
  const int H = cfg.hidden_channels, L = cfg.latent_channels;
  const int k = CodecConfig::kKernel;

  m.enc.resize(4);
  netdetail::init_conv(m.enc[0], "enc1", H, 3, k, rng);
  netdetail::init_conv(m.enc[1], "enc2", H, H, k, rng);
  netdetail::init_conv(m.enc[2], "enc3", H, H, k, rng);
  netdetail::init_conv(m.enc[3], "enc4", L, H, k, rng);
  m.enc_gdn.resize(3);
  for (int i = 0; i < 3; ++i)
    netdetail::init_gdn(m.enc_gdn[i], "enc_gdn" + std::to_string(i + 1), H);

  // Transposed-conv weights are stored (c_in, c_out, k, k).
  const bool deep = cfg.decoder_layers == 8;
  const int cins[4] = {L, H, H, H};
  const int couts[4] = {H, H, H, 3};
  for (int i = 0; i < 4; ++i) {
    if (deep) {
      ConvLayer pre;
      // square (c_in == c_out) so the (c_in, c_out, k, k) layout needs no swap
      netdetail::init_conv(pre, "dec" + std::to_string(i + 1) + "a", cins[i],
                           cins[i], k, rng);
      m.dec.push_back(std::move(pre));
    }
    ConvLayer lay;
    lay.w.init_zero("dec" + std::to_string(i + 1) + ".w",
                    {cins[i], couts[i], k, k});
    lay.b.init_zero("dec" + std::to_string(i + 1) + ".b", {1, couts[i], 1, 1});
    const float bound = 1.0f / std::sqrt(float(cins[i]) * k * k);
    std::uniform_real_distribution<float> dist(-bound, bound);
    for (auto& v : lay.w.value) v = dist(rng);
    m.dec.push_back(std::move(lay));
  }
  m.dec_gdn.resize(3);
  for (int i = 0; i < 3; ++i)
    netdetail::init_gdn(m.dec_gdn[i], "dec_gdn" + std::to_string(i + 1), H);

  m.priors.resize(size_t(cfg.num_priors));
  const int K = cfg.mixture_components;
  for (int p = 0; p < cfg.num_priors; ++p) {
    auto& pr = m.priors[size_t(p)];
    pr.weight_logit.resize(size_t(K));
    pr.mean.resize(size_t(K));
    pr.log_scale.resize(size_t(K));
    for (int c = 0; c < K; ++c) {
      const std::string base =
          "prior" + std::to_string(p) + ".k" + std::to_string(c);
      pr.weight_logit[size_t(c)].init_zero(base + ".logit", {1, L, 1, 1});
      pr.mean[size_t(c)].init_zero(base + ".mean", {1, L, 1, 1});
      pr.log_scale[size_t(c)].init_zero(base + ".log_scale", {1, L, 1, 1});
      const float mu0 = float(c) - float(K - 1) / 2.0f;
      for (auto& v : pr.mean[size_t(c)].value) v = mu0;
    }
  }
  return m;
}

// img: (n, 3, h, w) with h, w multiples of 16 -> latent (n, L, h/16, w/16).
inline NodeId encode_analysis(Tape& t, NodeId img, CodecModel& m,
                              ParamBinding& bind) {
  const Shape s = t.shape(img);
  if (s.h % CodecConfig::kDownsampleFactor != 0 ||
      s.w % CodecConfig::kDownsampleFactor != 0)
    throw ShapeMismatch("encode_analysis: dims must be multiples of 16, got " +
                        s.str());
  NodeId x = img;
  for (int i = 0; i < 4; ++i) {
    x = t.conv2d(x, bind(m.enc[size_t(i)].w), bind(m.enc[size_t(i)].b),
                 CodecConfig::kStride, 2);
    if (i < 3) x = gdn_forward(t, x, m.enc_gdn[size_t(i)], bind);
  }
  return x;
}

// latent (n, L, h, w) -> image-domain (n, 3, 16h, 16w). No activation after
// the final transposed convolution; clamping to [0,1] is an evaluation-time
// concern, not part of the loss path.
inline NodeId decode_synthesis(Tape& t, NodeId latent, CodecModel& m,
                               ParamBinding& bind) {
  if (t.shape(latent).c != m.cfg.latent_channels)
    throw ShapeMismatch("decode_synthesis: latent channels mismatch");
  const bool deep = m.cfg.decoder_layers == 8;
  NodeId x = latent;
  size_t li = 0;
  for (int stage = 0; stage < 4; ++stage) {
    if (deep) {
      // stride-1 layer keeps resolution: (h-1) - 2*2 + 5 = h
      x = t.conv2d_transpose(x, bind(m.dec[li].w), bind(m.dec[li].b), 1, 2, 0);
      ++li;
    }
    x = t.conv2d_transpose(x, bind(m.dec[li].w), bind(m.dec[li].b),
                           CodecConfig::kStride, 2, 1);
    ++li;
    if (stage < 3) x = igdn_forward(t, x, m.dec_gdn[size_t(stage)], bind);
  }
  return x;
}

enum class QuantizeMode { kTrain, kInfer };

// Train mode: additive i.i.d. Uniform(-0.5, 0.5) noise (gradient passes
// through). Infer mode: round half away from zero, integer-valued floats.
inline NodeId quantize(Tape& t, NodeId latent, QuantizeMode mode,
                       std::mt19937_64* rng = nullptr) {
  if (mode == QuantizeMode::kTrain) {
    if (rng == nullptr) throw ConfigError("quantize: train mode needs an rng");
    NodeId noise = t.constant(t.shape(latent), 0.0f);
    std::uniform_real_distribution<float> dist(-0.5f, 0.5f);
    for (auto& v : t.val(noise)) v = dist(*rng);
    return t.add(latent, noise);
  }
  NodeId out = t.constant(t.shape(latent), 0.0f);
  const auto& in = t.val(latent);
  auto& ov = t.val(out);
  for (size_t i = 0; i < in.size(); ++i) ov[i] = std::round(in[i]);
  return out;
}

inline std::vector<float> quantize_values(const std::vector<float>& latent) {
  std::vector<float> out(latent.size());
  for (size_t i = 0; i < latent.size(); ++i) out[i] = std::round(latent[i]);
  return out;
}

}  // namespace jdc

#endif  // JDC_CODEC_NET_HPP_
