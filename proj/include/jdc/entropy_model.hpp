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

// Trained CDF over quantized latents: a per-channel K-component logistic
// mixture. The same parameters serve the differentiable rate term (tape ops)
// and the discrete coder tables (plain double math).

#ifndef JDC_ENTROPY_MODEL_HPP_
#define JDC_ENTROPY_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "jdc/codec_net.hpp"
#include "jdc/common.hpp"
#include "jdc/tensor.hpp"

namespace jdc {

constexpr float kProbFloor = 1e-9f;
constexpr double kScaleFloor = 1e-4;
constexpr int kCoderPrecision = 16;
constexpr uint32_t kCoderTotal = 1u << kCoderPrecision;
constexpr int kMaxSupport = 255;  // support clamped to [-255, 255]

// --- Differentiable path (training) --------------------------------------

// Elementwise p(v) = c(v+0.5) - c(v-0.5), floored at kProbFloor.
inline NodeId likelihood(Tape& t, NodeId latent, MixturePrior& prior,
                         ParamBinding& bind) {
  const Shape ls = t.shape(latent);
  if (ls.c != prior.mean.front().shape.c)
    throw ShapeMismatch("likelihood: latent channels != density channels");
  const int K = int(prior.mean.size());

  // softmax over the K per-channel weight logits
  std::vector<NodeId> expl(static_cast<size_t>(K));
  NodeId wsum = -1;
  for (int k = 0; k < K; ++k) {
    expl[size_t(k)] = t.exp_(bind(prior.weight_logit[size_t(k)]));
    wsum = k == 0 ? expl[size_t(k)] : t.add(wsum, expl[size_t(k)]);
  }

  NodeId up = t.add_scalar(latent, 0.5f);
  NodeId lo = t.add_scalar(latent, -0.5f);
  NodeId cdf_up = -1, cdf_lo = -1;
  for (int k = 0; k < K; ++k) {
    NodeId wk = t.broadcast_chan(t.div(expl[size_t(k)], wsum), ls);
    NodeId mu = t.broadcast_chan(bind(prior.mean[size_t(k)]), ls);
    NodeId scale = t.broadcast_chan(
        t.clamp_min(t.exp_(bind(prior.log_scale[size_t(k)])),
                    float(kScaleFloor)),
        ls);
    NodeId cu = t.mul(wk, t.sigmoid(t.div(t.sub(up, mu), scale)));
    NodeId cl = t.mul(wk, t.sigmoid(t.div(t.sub(lo, mu), scale)));
    cdf_up = k == 0 ? cu : t.add(cdf_up, cu);
    cdf_lo = k == 0 ? cl : t.add(cdf_lo, cl);
  }
  return t.clamp_min(t.sub(cdf_up, cdf_lo), kProbFloor);
}

// Sum of -log2 p over all latent elements (scalar node).
inline NodeId rate_bits(Tape& t, NodeId latent, MixturePrior& prior,
                        ParamBinding& bind) {
  NodeId p = likelihood(t, latent, prior, bind);
  return t.mul_scalar(t.sum(t.log_(p)), -1.0f / float(M_LN2));
}

// --- Frozen-parameter path (inference / coding) ---------------------------

// Snapshot of one prior's mixture parameters in coder-friendly form.
struct DensityEval {
  int channels = 0;
  int K = 0;
  std::vector<double> weight;  // [c*K + k], softmaxed
  std::vector<double> mu;
  std::vector<double> scale;

  static DensityEval from(const MixturePrior& prior) {
    DensityEval d;
    d.K = int(prior.mean.size());
    d.channels = prior.mean.front().shape.c;
    d.weight.resize(size_t(d.channels) * d.K);
    d.mu.resize(size_t(d.channels) * d.K);
    d.scale.resize(size_t(d.channels) * d.K);
    for (int c = 0; c < d.channels; ++c) {
      double wsum = 0.0;
      for (int k = 0; k < d.K; ++k) {
        const double e =
            std::exp(double(prior.weight_logit[size_t(k)].value[size_t(c)]));
        d.weight[size_t(c) * d.K + k] = e;
        wsum += e;
        d.mu[size_t(c) * d.K + k] =
            double(prior.mean[size_t(k)].value[size_t(c)]);
        d.scale[size_t(c) * d.K + k] = std::max(
            std::exp(double(prior.log_scale[size_t(k)].value[size_t(c)])),
            kScaleFloor);
      }
      for (int k = 0; k < d.K; ++k) d.weight[size_t(c) * d.K + k] /= wsum;
    }
    return d;
  }

  double cdf(int c, double v) const {
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      const size_t i = size_t(c) * K + k;
      const double z = (v - mu[i]) / scale[i];
      const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                              : std::exp(z) / (1.0 + std::exp(z));
      acc += weight[i] * s;
    }
    return acc;
  }

  double pmf(int c, double v) const {
    return std::max(cdf(c, v + 0.5) - cdf(c, v - 0.5), double(kProbFloor));
  }
};

// Estimated code length in bits for quantized latent values laid out NCHW.
inline double rate_bits_estimate(const std::vector<float>& values,
                                 const Shape& shape, const DensityEval& d) {
  if (shape.c != d.channels)
    throw ShapeMismatch("rate_bits_estimate: channel mismatch");
  const int64_t plane = int64_t(shape.h) * shape.w;
  double bits = 0.0;
  int64_t i = 0;
  for (int n = 0; n < shape.n; ++n)
    for (int c = 0; c < shape.c; ++c)
      for (int64_t p = 0; p < plane; ++p)
        bits -= std::log2(d.pmf(c, double(values[size_t(i++)])));
  return bits;
}

// Argmin over priors of the rate estimate; ties break to the lowest index.
inline std::pair<int, double> select_prior(const std::vector<float>& quantized,
                                           const Shape& shape,
                                           const std::vector<DensityEval>& priors) {
  if (priors.empty()) throw ConfigError("select_prior: no priors");
  int best = 0;
  double best_bits = rate_bits_estimate(quantized, shape, priors[0]);
  for (int p = 1; p < int(priors.size()); ++p) {
    const double b = rate_bits_estimate(quantized, shape, priors[size_t(p)]);
    if (b < best_bits) {
      best = p;
      best_bits = b;
    }
  }
  return {best, best_bits};
}

// --- Discrete coder tables -------------------------------------------------

// Per-channel quantized CDF. Symbols 0..n-1 map to integers v_lo..v_hi; the
// final symbol is the escape for out-of-support values. cum is strictly
// increasing with cum.front() = 0 and cum.back() = 2^16, so every symbol has
// probability >= 2^-16.
struct ChannelCdf {
  int v_lo = 0;
  int v_hi = 0;
  std::vector<uint32_t> cum;  // size = support + 2

  int num_symbols() const { return int(cum.size()) - 1; }
  int escape_symbol() const { return num_symbols() - 1; }
  int symbol_of(int v) const {
    return v >= v_lo && v <= v_hi ? v - v_lo : escape_symbol();
  }
};

struct CdfTable {
  std::vector<ChannelCdf> channels;
};

inline CdfTable build_cdf_tables(const DensityEval& d) {
  CdfTable table;
  table.channels.resize(size_t(d.channels));
  const double tail = std::pow(2.0, -double(kCoderPrecision));
  for (int c = 0; c < d.channels; ++c) {
    ChannelCdf& ch = table.channels[size_t(c)];
    // Start the support at the mixture mean and grow until both tail masses
    // drop below 2^-16 (or the hard [-255, 255] clamp is reached).
    double mean = 0.0;
    for (int k = 0; k < d.K; ++k)
      mean += d.weight[size_t(c) * d.K + k] * d.mu[size_t(c) * d.K + k];
    int v0 = int(std::lround(mean));
    v0 = std::clamp(v0, -kMaxSupport, kMaxSupport);
    int lo = v0, hi = v0;
    while (lo > -kMaxSupport && d.cdf(c, lo - 0.5) >= tail) --lo;
    while (hi < kMaxSupport && 1.0 - d.cdf(c, hi + 0.5) >= tail) ++hi;
    ch.v_lo = lo;
    ch.v_hi = hi;

    const int support = hi - lo + 1;
    std::vector<double> p(size_t(support) + 1);
    for (int v = lo; v <= hi; ++v)
      p[size_t(v - lo)] = std::max(d.cdf(c, v + 0.5) - d.cdf(c, v - 0.5), 0.0);
    p[size_t(support)] =
        std::max(d.cdf(c, lo - 0.5) + 1.0 - d.cdf(c, hi + 0.5), 0.0);  // escape

    double total = 0.0;
    for (double v : p) total += v;
    if (total <= 0.0) total = 1.0;
    const int nsym = support + 1;
    std::vector<uint32_t> freq(static_cast<size_t>(nsym));
    int64_t sum = 0;
    for (int i = 0; i < nsym; ++i) {
      freq[size_t(i)] = uint32_t(std::max<int64_t>(
          1, std::llround(p[size_t(i)] / total * double(kCoderTotal))));
      sum += freq[size_t(i)];
    }
    // Redistribute the rounding residue on the largest entries, keeping
    // every frequency >= 1.
    while (sum != kCoderTotal) {
      size_t imax = 0;
      for (size_t i = 1; i < freq.size(); ++i)
        if (freq[i] > freq[imax]) imax = i;
      if (sum < int64_t(kCoderTotal)) {
        const int64_t add = int64_t(kCoderTotal) - sum;
        freq[imax] += uint32_t(add);
        sum += add;
      } else {
        const int64_t cut =
            std::min<int64_t>(sum - int64_t(kCoderTotal), freq[imax] - 1);
        freq[imax] -= uint32_t(cut);
        sum -= cut;
        if (cut == 0) throw ConfigError("build_cdf_tables: cannot normalize");
      }
    }
    ch.cum.resize(size_t(nsym) + 1);
    ch.cum[0] = 0;
    for (int i = 0; i < nsym; ++i)
      ch.cum[size_t(i) + 1] = ch.cum[size_t(i)] + freq[size_t(i)];
  }
  return table;
}

}  // namespace jdc

#endif  // JDC_ENTROPY_MODEL_HPP_
