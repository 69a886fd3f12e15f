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

// Reverse-mode automatic differentiation over dense NCHW arrays. A Tape owns
// every node of a dynamically built graph; ops append nodes and record a
// backward closure. Reductions and convolution inner loops accumulate in
// 64-bit floats, storage is 32-bit. Single-threaded: one tape per training
// thread, ops applied in creation order.

#ifndef JDC_TENSOR_HPP_
#define JDC_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "jdc/common.hpp"

namespace jdc {

struct Shape {
  int n = 1, c = 1, h = 1, w = 1;
  int64_t numel() const {
    return int64_t(n) * c * h * w;
  }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

using NodeId = int;

class Tape {
 public:
  // Leaves and constants -----------------------------------------------

  NodeId leaf(const Shape& s, const float* data) {
    NodeId id = new_node(s);
    std::copy(data, data + s.numel(), nodes_[id].value.begin());
    return id;
  }
  NodeId leaf(const Shape& s, const std::vector<float>& data) {
    if (int64_t(data.size()) != s.numel())
      throw ShapeMismatch("leaf: data size != " + s.str());
    return leaf(s, data.data());
  }
  NodeId constant(const Shape& s, float fill) {
    NodeId id = new_node(s);
    std::fill(nodes_[id].value.begin(), nodes_[id].value.end(), fill);
    return id;
  }

  const Shape& shape(NodeId id) const { return nodes_[id].shape; }
  std::vector<float>& val(NodeId id) { return nodes_[id].value; }
  const std::vector<float>& val(NodeId id) const { return nodes_[id].value; }
  std::vector<float>& grad(NodeId id) { return nodes_[id].grad; }
  float scalar(NodeId id) const { return nodes_[id].value[0]; }
  size_t size() const { return nodes_.size(); }

  void set_check_finite(bool on) { check_finite_ = on; }

  // Convolutions ---------------------------------------------------------

  // x: (n, ci, h, w), w: (co, ci, k, k), bias: (1, co, 1, 1) or -1.
  NodeId conv2d(NodeId x, NodeId w, NodeId bias, int stride, int pad) {
    const Shape xs = shape(x), ws = shape(w);
    if (ws.h != ws.w) throw ShapeMismatch("conv2d: non-square kernel");
    if (xs.c != ws.c)
      throw ShapeMismatch("conv2d: input channels " + std::to_string(xs.c) +
                          " != kernel channels " + std::to_string(ws.c));
    if (bias >= 0 && shape(bias).c != ws.n)
      throw ShapeMismatch("conv2d: bias channels != out channels");
    const int k = ws.h;
    const int ho = (xs.h + 2 * pad - k) / stride + 1;
    const int wo = (xs.w + 2 * pad - k) / stride + 1;
    if (ho <= 0 || wo <= 0) throw ShapeMismatch("conv2d: empty output");
    NodeId out = new_node({xs.n, ws.n, ho, wo});

    conv2d_forward(val(x), xs, val(w), ws, bias >= 0 ? &val(bias) : nullptr,
                   stride, pad, val(out), ho, wo);
    finite_or_throw(out, "conv2d");

    nodes_[out].back = [x, w, bias, out, stride, pad](Tape& t) {
      t.conv2d_backward(x, w, bias, out, stride, pad);
    };
    return out;
  }

  // x: (n, ci, h, w), w: (ci, co, k, k) — adjoint of conv2d with the same
  // weight array. Output spatial size = (h-1)*stride - 2*pad + k + out_pad.
  NodeId conv2d_transpose(NodeId x, NodeId w, NodeId bias, int stride, int pad,
                          int out_pad = 0) {
    const Shape xs = shape(x), ws = shape(w);
    if (ws.h != ws.w) throw ShapeMismatch("conv2d_transpose: non-square kernel");
    if (xs.c != ws.n)
      throw ShapeMismatch("conv2d_transpose: input channels " +
                          std::to_string(xs.c) + " != kernel in-channels " +
                          std::to_string(ws.n));
    if (bias >= 0 && shape(bias).c != ws.c)
      throw ShapeMismatch("conv2d_transpose: bias channels != out channels");
    const int k = ws.h;
    const int ho = (xs.h - 1) * stride - 2 * pad + k + out_pad;
    const int wo = (xs.w - 1) * stride - 2 * pad + k + out_pad;
    if (ho <= 0 || wo <= 0) throw ShapeMismatch("conv2d_transpose: empty output");
    NodeId out = new_node({xs.n, ws.c, ho, wo});

    tconv_forward(val(x), xs, val(w), ws, bias >= 0 ? &val(bias) : nullptr,
                  stride, pad, val(out), ho, wo);
    finite_or_throw(out, "conv2d_transpose");

    nodes_[out].back = [x, w, bias, out, stride, pad](Tape& t) {
      t.tconv_backward(x, w, bias, out, stride, pad);
    };
    return out;
  }

  // Elementwise ----------------------------------------------------------

  NodeId add(NodeId a, NodeId b) {
    return binary("add", a, b, [](float u, float v) { return u + v; },
                  [](float, float, float) { return 1.0f; },
                  [](float, float, float) { return 1.0f; });
  }
  NodeId sub(NodeId a, NodeId b) {
    return binary("sub", a, b, [](float u, float v) { return u - v; },
                  [](float, float, float) { return 1.0f; },
                  [](float, float, float) { return -1.0f; });
  }
  NodeId mul(NodeId a, NodeId b) {
    return binary("mul", a, b, [](float u, float v) { return u * v; },
                  [](float, float v, float) { return v; },
                  [](float u, float, float) { return u; });
  }
  NodeId div(NodeId a, NodeId b) {
    return binary("div", a, b, [](float u, float v) { return u / v; },
                  [](float, float v, float) { return 1.0f / v; },
                  [](float, float v, float y) { return -y / v; });
  }
  NodeId square(NodeId a) {
    return unary("square", a, [](float u) { return u * u; },
                 [](float u, float) { return 2.0f * u; });
  }
  // Domain guarded: sqrt(max(x, 1e-20)); derivative clamped accordingly.
  NodeId sqrt_(NodeId a) {
    return unary("sqrt", a,
                 [](float u) { return std::sqrt(std::max(u, 1e-20f)); },
                 [](float, float y) { return 0.5f / std::max(y, 1e-10f); });
  }
  NodeId exp_(NodeId a) {
    return unary("exp", a, [](float u) { return std::exp(u); },
                 [](float, float y) { return y; });
  }
  NodeId log_(NodeId a) {
    return unary("log", a, [](float u) { return std::log(u); },
                 [](float u, float) { return 1.0f / u; });
  }
  NodeId sigmoid(NodeId a) {
    return unary("sigmoid", a,
                 [](float u) {
                   return u >= 0 ? 1.0f / (1.0f + std::exp(-u))
                                 : std::exp(u) / (1.0f + std::exp(u));
                 },
                 [](float, float y) { return y * (1.0f - y); });
  }
  NodeId neg(NodeId a) {
    return unary("neg", a, [](float u) { return -u; },
                 [](float, float) { return -1.0f; });
  }
  NodeId clamp_min(NodeId a, float m) {
    return unary("clamp_min", a,
                 [m](float u) { return u < m ? m : u; },
                 [m](float u, float) { return u >= m ? 1.0f : 0.0f; });
  }
  NodeId add_scalar(NodeId a, float s) {
    return unary("add_scalar", a, [s](float u) { return u + s; },
                 [](float, float) { return 1.0f; });
  }
  NodeId mul_scalar(NodeId a, float s) {
    return unary("mul_scalar", a, [s](float u) { return u * s; },
                 [s](float, float) { return s; });
  }

  // Materializes a per-channel vector (1, C, 1, 1) to a full NCHW shape.
  NodeId broadcast_chan(NodeId a, const Shape& target) {
    const Shape as = shape(a);
    if (as.n != 1 || as.h != 1 || as.w != 1 || as.c != target.c)
      throw ShapeMismatch("broadcast_chan: expected (1," +
                          std::to_string(target.c) + ",1,1), got " + as.str());
    NodeId out = new_node(target);
    auto& ov = val(out);
    const auto& av = val(a);
    const int64_t plane = int64_t(target.h) * target.w;
    int64_t i = 0;
    for (int n = 0; n < target.n; ++n)
      for (int c = 0; c < target.c; ++c)
        for (int64_t p = 0; p < plane; ++p) ov[i++] = av[c];
    nodes_[out].back = [a, out](Tape& t) {
      const auto& g = t.grad(out);
      auto& ga = t.grad(a);
      const Shape ts = t.shape(out);
      const int64_t plane = int64_t(ts.h) * ts.w;
      for (int c = 0; c < ts.c; ++c) {
        double acc = 0.0;
        for (int n = 0; n < ts.n; ++n) {
          const float* gp = g.data() + (int64_t(n) * ts.c + c) * plane;
          for (int64_t p = 0; p < plane; ++p) acc += gp[p];
        }
        ga[c] += float(acc);
      }
    };
    return out;
  }

  // Reductions -----------------------------------------------------------

  NodeId sum(NodeId a) {
    NodeId out = new_node({1, 1, 1, 1});
    const auto& av = val(a);
    double acc = 0.0;
    for (float v : av) acc += v;
    val(out)[0] = float(acc);
    finite_or_throw(out, "sum");
    nodes_[out].back = [a, out](Tape& t) {
      const float g = t.grad(out)[0];
      for (auto& ga : t.grad(a)) ga += g;
    };
    return out;
  }
  NodeId mean(NodeId a) {
    NodeId out = new_node({1, 1, 1, 1});
    const auto& av = val(a);
    double acc = 0.0;
    for (float v : av) acc += v;
    val(out)[0] = float(acc / double(av.size()));
    finite_or_throw(out, "mean");
    nodes_[out].back = [a, out](Tape& t) {
      const float g = t.grad(out)[0] / float(t.val(a).size());
      for (auto& ga : t.grad(a)) ga += g;
    };
    return out;
  }

  // Backprop -------------------------------------------------------------

  // Seeds d(loss)/d(loss) = 1 and runs recorded closures in reverse
  // creation order. Grads accumulate additively across calls.
  void backward(NodeId loss) {
    if (nodes_[loss].shape.numel() != 1)
      throw ShapeMismatch("backward: loss must be scalar, got " +
                          nodes_[loss].shape.str());
    nodes_[loss].grad[0] += 1.0f;
    for (NodeId id = loss; id >= 0; --id) {
      if (!nodes_[id].back) continue;
      if (!any_nonzero(nodes_[id].grad)) continue;
      nodes_[id].back(*this);
    }
  }

 private:
  struct Node {
    Shape shape;
    std::vector<float> value;
    std::vector<float> grad;
    std::function<void(Tape&)> back;
  };

  NodeId new_node(const Shape& s) {
    Node n;
    n.shape = s;
    n.value.resize(static_cast<size_t>(s.numel()));
    n.grad.assign(static_cast<size_t>(s.numel()), 0.0f);
    nodes_.push_back(std::move(n));
    return NodeId(nodes_.size()) - 1;
  }

  static bool any_nonzero(const std::vector<float>& v) {
    for (float x : v)
      if (x != 0.0f) return true;
    return false;
  }

  void finite_or_throw(NodeId id, const char* op) {
    if (!check_finite_) return;
    for (float v : nodes_[id].value)
      if (!std::isfinite(v))
        throw NonFinite(std::string(op) + ": non-finite value in output " +
                        nodes_[id].shape.str());
  }

  template <class F, class DF>
  NodeId unary(const char* name, NodeId a, F f, DF df) {
    NodeId out = new_node(shape(a));
    const auto& av = val(a);
    auto& ov = val(out);
    for (size_t i = 0; i < av.size(); ++i) ov[i] = f(av[i]);
    finite_or_throw(out, name);
    nodes_[out].back = [a, out, df](Tape& t) {
      const auto& av2 = t.val(a);
      const auto& ov2 = t.val(out);
      const auto& g = t.grad(out);
      auto& ga = t.grad(a);
      for (size_t i = 0; i < av2.size(); ++i)
        ga[i] += g[i] * df(av2[i], ov2[i]);
    };
    return out;
  }

  template <class F, class DA, class DB>
  NodeId binary(const char* name, NodeId a, NodeId b, F f, DA da, DB db) {
    if (!(shape(a) == shape(b)))
      throw ShapeMismatch(std::string(name) + ": " + shape(a).str() +
                          " vs " + shape(b).str());
    NodeId out = new_node(shape(a));
    const auto& av = val(a);
    const auto& bv = val(b);
    auto& ov = val(out);
    for (size_t i = 0; i < av.size(); ++i) ov[i] = f(av[i], bv[i]);
    finite_or_throw(out, name);
    nodes_[out].back = [a, b, out, da, db](Tape& t) {
      const auto& av2 = t.val(a);
      const auto& bv2 = t.val(b);
      const auto& ov2 = t.val(out);
      const auto& g = t.grad(out);
      auto& ga = t.grad(a);
      for (size_t i = 0; i < av2.size(); ++i)
        ga[i] += g[i] * da(av2[i], bv2[i], ov2[i]);
      auto& gb = t.grad(b);
      for (size_t i = 0; i < av2.size(); ++i)
        gb[i] += g[i] * db(av2[i], bv2[i], ov2[i]);
    };
    return out;
  }

  // ---- conv kernels (double accumulation) ----

  static void conv2d_forward(const std::vector<float>& x, const Shape& xs,
                             const std::vector<float>& w, const Shape& ws,
                             const std::vector<float>* bias, int stride,
                             int pad, std::vector<float>& out, int ho,
                             int wo) {
    const int k = ws.h;
    const int64_t xplane = int64_t(xs.h) * xs.w;
    const int64_t oplane = int64_t(ho) * wo;
    std::vector<double> acc(static_cast<size_t>(oplane));
    for (int n = 0; n < xs.n; ++n) {
      for (int oc = 0; oc < ws.n; ++oc) {
        const double b = bias ? double((*bias)[oc]) : 0.0;
        std::fill(acc.begin(), acc.end(), b);
        for (int ic = 0; ic < xs.c; ++ic) {
          const float* xp = x.data() + (int64_t(n) * xs.c + ic) * xplane;
          const float* wp =
              w.data() + ((int64_t(oc) * ws.c + ic) * k) * k;
          for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw) {
              const float wv = wp[kh * k + kw];
              if (wv == 0.0f) continue;
              for (int oy = 0; oy < ho; ++oy) {
                const int iy = oy * stride - pad + kh;
                if (iy < 0 || iy >= xs.h) continue;
                const float* xrow = xp + int64_t(iy) * xs.w;
                double* arow = acc.data() + int64_t(oy) * wo;
                const int base = -pad + kw;
                // valid ox range so that 0 <= ox*stride+base < xs.w
                if (base >= xs.w) continue;
                int lo = base < 0 ? (-base + stride - 1) / stride : 0;
                int hi = (xs.w - 1 - base) / stride;
                if (hi >= wo) hi = wo - 1;
                for (int ox = lo; ox <= hi; ++ox)
                  arow[ox] += double(wv) * double(xrow[ox * stride + base]);
              }
            }
        }
        float* op = out.data() + (int64_t(n) * ws.n + oc) * oplane;
        for (int64_t i = 0; i < oplane; ++i) op[i] = float(acc[i]);
      }
    }
  }

  void conv2d_backward(NodeId x, NodeId w, NodeId bias, NodeId out, int stride,
                       int pad) {
    const Shape xs = shape(x), ws = shape(w), os = shape(out);
    const int k = ws.h;
    const auto& go = grad(out);
    const auto& xv = val(x);
    const auto& wv = val(w);
    const int64_t xplane = int64_t(xs.h) * xs.w;
    const int64_t oplane = int64_t(os.h) * os.w;

    // d(bias)
    if (bias >= 0) {
      auto& gb = grad(bias);
      for (int oc = 0; oc < ws.n; ++oc) {
        double acc = 0.0;
        for (int n = 0; n < xs.n; ++n) {
          const float* gp = go.data() + (int64_t(n) * ws.n + oc) * oplane;
          for (int64_t i = 0; i < oplane; ++i) acc += gp[i];
        }
        gb[oc] += float(acc);
      }
    }

    // d(w)
    {
      auto& gw = grad(w);
      for (int oc = 0; oc < ws.n; ++oc)
        for (int ic = 0; ic < ws.c; ++ic)
          for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw) {
              double acc = 0.0;
              for (int n = 0; n < xs.n; ++n) {
                const float* gp =
                    go.data() + (int64_t(n) * ws.n + oc) * oplane;
                const float* xp =
                    xv.data() + (int64_t(n) * xs.c + ic) * xplane;
                for (int oy = 0; oy < os.h; ++oy) {
                  const int iy = oy * stride - pad + kh;
                  if (iy < 0 || iy >= xs.h) continue;
                  const float* xrow = xp + int64_t(iy) * xs.w;
                  const float* grow = gp + int64_t(oy) * os.w;
                  const int base = -pad + kw;
                  if (base >= xs.w) continue;
                  int lo = base < 0 ? (-base + stride - 1) / stride : 0;
                  int hi = (xs.w - 1 - base) / stride;
                  if (hi >= os.w) hi = os.w - 1;
                  for (int ox = lo; ox <= hi; ++ox)
                    acc += double(grow[ox]) * double(xrow[ox * stride + base]);
                }
              }
              gw[((int64_t(oc) * ws.c + ic) * k + kh) * k + kw] += float(acc);
            }
    }

    // d(x): scatter go*w back through the kernel
    {
      auto& gx = grad(x);
      std::vector<double> acc(static_cast<size_t>(xplane));
      for (int n = 0; n < xs.n; ++n)
        for (int ic = 0; ic < xs.c; ++ic) {
          std::fill(acc.begin(), acc.end(), 0.0);
          for (int oc = 0; oc < ws.n; ++oc) {
            const float* gp = go.data() + (int64_t(n) * ws.n + oc) * oplane;
            const float* wp = wv.data() + ((int64_t(oc) * ws.c + ic) * k) * k;
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                const float wvv = wp[kh * k + kw];
                if (wvv == 0.0f) continue;
                for (int oy = 0; oy < os.h; ++oy) {
                  const int iy = oy * stride - pad + kh;
                  if (iy < 0 || iy >= xs.h) continue;
                  double* arow = acc.data() + int64_t(iy) * xs.w;
                  const float* grow = gp + int64_t(oy) * os.w;
                  const int base = -pad + kw;
                  if (base >= xs.w) continue;
                  int lo = base < 0 ? (-base + stride - 1) / stride : 0;
                  int hi = (xs.w - 1 - base) / stride;
                  if (hi >= os.w) hi = os.w - 1;
                  for (int ox = lo; ox <= hi; ++ox)
                    arow[ox * stride + base] += double(wvv) * double(grow[ox]);
                }
              }
          }
          float* gxp = gx.data() + (int64_t(n) * xs.c + ic) * xplane;
          for (int64_t i = 0; i < xplane; ++i) gxp[i] += float(acc[i]);
        }
    }
  }

  static void tconv_forward(const std::vector<float>& x, const Shape& xs,
                            const std::vector<float>& w, const Shape& ws,
                            const std::vector<float>* bias, int stride,
                            int pad, std::vector<float>& out, int ho, int wo) {
    const int k = ws.h;
    const int co = ws.c;
    const int64_t xplane = int64_t(xs.h) * xs.w;
    const int64_t oplane = int64_t(ho) * wo;
    std::vector<double> acc(static_cast<size_t>(oplane));
    for (int n = 0; n < xs.n; ++n) {
      for (int oc = 0; oc < co; ++oc) {
        const double b = bias ? double((*bias)[oc]) : 0.0;
        std::fill(acc.begin(), acc.end(), b);
        for (int ic = 0; ic < xs.c; ++ic) {
          const float* xp = x.data() + (int64_t(n) * xs.c + ic) * xplane;
          const float* wp = w.data() + ((int64_t(ic) * co + oc) * k) * k;
          for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw) {
              const float wvv = wp[kh * k + kw];
              if (wvv == 0.0f) continue;
              for (int iy = 0; iy < xs.h; ++iy) {
                const int oy = iy * stride - pad + kh;
                if (oy < 0 || oy >= ho) continue;
                const float* xrow = xp + int64_t(iy) * xs.w;
                double* arow = acc.data() + int64_t(oy) * wo;
                const int base = -pad + kw;
                for (int ix = 0; ix < xs.w; ++ix) {
                  const int ox = ix * stride + base;
                  if (ox < 0 || ox >= wo) continue;
                  arow[ox] += double(wvv) * double(xrow[ix]);
                }
              }
            }
        }
        float* op = out.data() + (int64_t(n) * co + oc) * oplane;
        for (int64_t i = 0; i < oplane; ++i) op[i] = float(acc[i]);
      }
    }
  }

  void tconv_backward(NodeId x, NodeId w, NodeId bias, NodeId out, int stride,
                      int pad) {
    const Shape xs = shape(x), ws = shape(w), os = shape(out);
    const int k = ws.h;
    const int co = ws.c;
    const auto& go = grad(out);
    const auto& xv = val(x);
    const auto& wv = val(w);
    const int64_t xplane = int64_t(xs.h) * xs.w;
    const int64_t oplane = int64_t(os.h) * os.w;

    if (bias >= 0) {
      auto& gb = grad(bias);
      for (int oc = 0; oc < co; ++oc) {
        double acc = 0.0;
        for (int n = 0; n < xs.n; ++n) {
          const float* gp = go.data() + (int64_t(n) * co + oc) * oplane;
          for (int64_t i = 0; i < oplane; ++i) acc += gp[i];
        }
        gb[oc] += float(acc);
      }
    }

    // d(x): gather from output positions each input pixel scattered to.
    {
      auto& gx = grad(x);
      std::vector<double> acc(static_cast<size_t>(xplane));
      for (int n = 0; n < xs.n; ++n)
        for (int ic = 0; ic < xs.c; ++ic) {
          std::fill(acc.begin(), acc.end(), 0.0);
          for (int oc = 0; oc < co; ++oc) {
            const float* gp = go.data() + (int64_t(n) * co + oc) * oplane;
            const float* wp = wv.data() + ((int64_t(ic) * co + oc) * k) * k;
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                const float wvv = wp[kh * k + kw];
                if (wvv == 0.0f) continue;
                for (int iy = 0; iy < xs.h; ++iy) {
                  const int oy = iy * stride - pad + kh;
                  if (oy < 0 || oy >= os.h) continue;
                  const float* grow = gp + int64_t(oy) * os.w;
                  double* arow = acc.data() + int64_t(iy) * xs.w;
                  const int base = -pad + kw;
                  for (int ix = 0; ix < xs.w; ++ix) {
                    const int ox = ix * stride + base;
                    if (ox < 0 || ox >= os.w) continue;
                    arow[ix] += double(wvv) * double(grow[ox]);
                  }
                }
              }
          }
          float* gxp = gx.data() + (int64_t(n) * xs.c + ic) * xplane;
          for (int64_t i = 0; i < xplane; ++i) gxp[i] += float(acc[i]);
        }
    }

    // d(w)
    {
      auto& gw = grad(w);
      for (int ic = 0; ic < ws.n; ++ic)
        for (int oc = 0; oc < co; ++oc)
          for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw) {
              double acc = 0.0;
              for (int n = 0; n < xs.n; ++n) {
                const float* gp = go.data() + (int64_t(n) * co + oc) * oplane;
                const float* xp = xv.data() + (int64_t(n) * xs.c + ic) * xplane;
                for (int iy = 0; iy < xs.h; ++iy) {
                  const int oy = iy * stride - pad + kh;
                  if (oy < 0 || oy >= os.h) continue;
                  const float* grow = gp + int64_t(oy) * os.w;
                  const float* xrow = xp + int64_t(iy) * xs.w;
                  const int base = -pad + kw;
                  for (int ix = 0; ix < xs.w; ++ix) {
                    const int ox = ix * stride + base;
                    if (ox < 0 || ox >= os.w) continue;
                    acc += double(xrow[ix]) * double(grow[ox]);
                  }
                }
              }
              gw[((int64_t(ic) * co + oc) * k + kh) * k + kw] += float(acc);
            }
    }
  }

  std::vector<Node> nodes_;
  bool check_finite_ = true;
};

}  // namespace jdc

#endif  // JDC_TENSOR_HPP_
