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

// Rate-distortion training loop: loss assembly, lambda schedule with exact
// halving, Adam, per-stage checkpoints, CSV logging, deterministic resume.

#ifndef JDC_TRAINER_HPP_
#define JDC_TRAINER_HPP_

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "jdc/checkpoint.hpp"
#include "jdc/codec_net.hpp"
#include "jdc/common.hpp"
#include "jdc/dataset.hpp"
#include "jdc/entropy_model.hpp"
#include "jdc/tensor.hpp"

namespace jdc {

// Distortion is computed on 255-scaled samples and normalized by the
// 256x256 reference training crop so the rate term stays per-pixel and the
// familiar lambda magnitudes (256..16384) keep their meaning at any crop size.
constexpr double kDistortionScale = 255.0 * 255.0 / (256.0 * 256.0);

struct LambdaStage {
  double lambda = 0.0;
  int64_t steps = 0;
};

// 4096 for the equivalent of six million steps, then halving down to 256
// with three million steps each; `scale` shrinks the counts for desk runs
// (rounded up to at least one step per stage). The extended flag prepends
// 8192, and 16384 on top of that for the synthetic-noise mode.
inline std::vector<LambdaStage> default_schedule(double scale,
                                                 bool extended = false,
                                                 bool testolina = false) {
  if (scale <= 0.0 || scale > 1.0)
    throw ConfigError("default_schedule: scale must be in (0, 1]");
  auto steps = [scale](double full) {
    // small slack so e.g. 6e6 * 1e-5 rounds to 60, not 61
    return std::max<int64_t>(1, int64_t(std::ceil(full * scale - 1e-9)));
  };
  std::vector<LambdaStage> sched;
  if (extended) {
    if (testolina) sched.push_back({16384.0, steps(3e6)});
    sched.push_back({8192.0, steps(3e6)});
  }
  sched.push_back({4096.0, steps(6e6)});
  for (double l = 2048.0; l >= 256.0; l /= 2) sched.push_back({l, steps(3e6)});
  return sched;
}

struct TrainConfig {
  CodecConfig net;
  SupervisionMode mode;
  std::vector<LambdaStage> schedule;
  double lr = 1e-4;
  int crop_size = 64;
  uint64_t seed = 1;
  int max_clean_iso = 200;
  int log_every = 1;
  bool strict = true;  // deterministic sequential mode
};

// loss = rate_bits/pixels + lambda * scaled MSE(xhat, x_clean). x_clean is
// the clean target, which may differ from the network input.
inline NodeId rd_loss(Tape& t, NodeId xhat, NodeId x_clean,
                      NodeId latent_relaxed, MixturePrior& prior,
                      ParamBinding& bind, double lambda) {
  if (!(t.shape(xhat) == t.shape(x_clean)))
    throw ShapeMismatch("rd_loss: xhat vs target " + t.shape(xhat).str() +
                        " vs " + t.shape(x_clean).str());
  const Shape s = t.shape(xhat);
  const double pixels = double(s.n) * s.h * s.w;
  NodeId rate = rate_bits(t, latent_relaxed, prior, bind);
  NodeId rate_bpp = t.mul_scalar(rate, float(1.0 / pixels));
  NodeId mse_term = t.mean(t.square(t.sub(xhat, x_clean)));
  NodeId dist = t.mul_scalar(mse_term, float(lambda * kDistortionScale));
  return t.add(rate_bpp, dist);
}

// Adam with beta1=0.9, beta2=0.999, eps=1e-8. `t` is the 1-based update
// count shared by all parameters.
inline void optimizer_step(std::vector<Param*>& params, double lr, int64_t t) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  const double bc1 = 1.0 - std::pow(kBeta1, double(t));
  const double bc2 = 1.0 - std::pow(kBeta2, double(t));
  for (Param* p : params) {
    for (size_t i = 0; i < p->value.size(); ++i) {
      const double g = double(p->grad[i]);
      if (!std::isfinite(g))
        throw NonFinite("optimizer_step: non-finite gradient in " + p->name);
      const double m = kBeta1 * p->adam_m[i] + (1.0 - kBeta1) * g;
      const double v = kBeta2 * p->adam_v[i] + (1.0 - kBeta2) * g * g;
      p->adam_m[i] = float(m);
      p->adam_v[i] = float(v);
      p->value[i] -=
          float(lr * (m / bc1) / (std::sqrt(v / bc2) + kEps));
    }
  }
}

inline void zero_grads(std::vector<Param*>& params) {
  for (Param* p : params)
    std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

namespace traindetail {

inline NodeId batch_to_leaf(Tape& t, const std::vector<ImageF32>& imgs) {
  const int n = int(imgs.size());
  const int c = imgs[0].channels, h = imgs[0].height, w = imgs[0].width;
  std::vector<float> data(size_t(n) * c * h * w);
  size_t i = 0;
  for (const auto& img : imgs) {
    if (img.channels != c || img.height != h || img.width != w)
      throw ShapeMismatch("batch: ragged element sizes");
    std::copy(img.data.begin(), img.data.end(), data.begin() + long(i));
    i += img.data.size();
  }
  return t.leaf(Shape{n, c, h, w}, data);
}

inline std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::vector<uint8_t> rng_state_bytes(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  const std::string s = os.str();
  return std::vector<uint8_t>(s.begin(), s.end());
}

inline void restore_rng(std::mt19937_64& rng, const std::vector<uint8_t>& b) {
  std::istringstream is(std::string(b.begin(), b.end()));
  is >> rng;
}

}  // namespace traindetail

struct TrainResult {
  CodecModel model;
  std::vector<std::string> checkpoint_paths;
  std::string log_path;
};

// Runs the whole schedule, warm-starting each lambda stage from the previous
// one. Writes <out_dir>/ckpt_lambda<L>.jdcm per stage, a resumable
// <out_dir>/last.jdcm every stage, train_log.csv and provenance.csv.
// `resume_from` continues a previous run bit-exactly in strict mode.
inline TrainResult train(const TrainConfig& cfg, const Manifest& manifest,
                         const std::string& out_dir,
                         const std::string& resume_from = "") {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  DataPools pools =
      build_pools(manifest, cfg.mode, cfg.crop_size, cfg.max_clean_iso);

  CodecModel model = make_model(cfg.net, cfg.seed);
  std::mt19937_64 rng(cfg.seed);
  int64_t adam_t = 0;
  uint64_t global_step = 0;

  const std::string log_path = (fs::path(out_dir) / "train_log.csv").string();
  const std::string prov_path = (fs::path(out_dir) / "provenance.csv").string();
  std::ofstream log, prov;
  if (!resume_from.empty()) {
    auto loaded = load_checkpoint(resume_from);
    model = std::move(loaded.model);
    global_step = model.step;
    auto it = loaded.extras.find("train.adam_t");
    if (it != loaded.extras.end() && it->second.size() == 8) {
      adam_t = 0;
      for (int i = 0; i < 8; ++i)
        adam_t |= int64_t(it->second[size_t(i)]) << (8 * i);
    }
    it = loaded.extras.find("train.rng");
    if (it != loaded.extras.end()) traindetail::restore_rng(rng, it->second);
    log.open(log_path, std::ios::app);
    prov.open(prov_path, std::ios::app);
  } else {
    log.open(log_path);
    prov.open(prov_path);
    log << "step,lambda,bpp,mse,loss\n";
    prov << "step,element,tag,score\n";
  }
  if (!log || !prov) throw IoError("train: cannot open logs in " + out_dir);

  auto params = model.params();
  TrainResult result;
  result.log_path = log_path;

  int64_t schedule_pos = 0;  // absolute step count covered by prior stages
  for (const auto& stage : cfg.schedule) {
    model.lambda = float(stage.lambda);
    const int64_t stage_end = schedule_pos + stage.steps;
    for (; int64_t(global_step) < stage_end; ++global_step) {
      TrainBatch batch = sample_batch(cfg.mode, pools, cfg.crop_size, rng);

      Tape tape;
      ParamBinding bind(tape);
      NodeId input = traindetail::batch_to_leaf(tape, batch.inputs);
      NodeId target = traindetail::batch_to_leaf(tape, batch.targets);

      double loss_v, bpp_v, mse_v;
      try {
        NodeId latent = encode_analysis(tape, input, model, bind);
        NodeId relaxed = quantize(tape, latent, QuantizeMode::kTrain, &rng);
        NodeId xhat = decode_synthesis(tape, relaxed, model, bind);
        NodeId loss = rd_loss(tape, xhat, target, relaxed, model.priors[0],
                              bind, stage.lambda);
        loss_v = tape.scalar(loss);
        if (!std::isfinite(loss_v))
          throw NonFinite("train: non-finite loss value");

        zero_grads(params);
        tape.backward(loss);
        bind.harvest();

        // recompute the two reported components from forward values
        double se = 0.0;
        const auto& xv = tape.val(xhat);
        const auto& tv = tape.val(target);
        for (size_t i = 0; i < xv.size(); ++i) {
          const double d = double(xv[i]) - double(tv[i]);
          se += d * d;
        }
        mse_v = se / double(xv.size());
        bpp_v = loss_v - stage.lambda * kDistortionScale * mse_v;
      } catch (const NonFinite& e) {
        // diagnostic dump of the offending batch's provenance, then abort
        for (size_t i = 0; i < batch.tags.size(); ++i)
          prov << global_step << "," << i << ",abort:tag"
               << int(batch.tags[i]) << "," << batch.scores[i] << "\n";
        prov.flush();
        throw NonFinite(std::string("train: aborted at step ") +
                        std::to_string(global_step) + ": " + e.what());
      }

      ++adam_t;
      optimizer_step(params, cfg.lr, adam_t);
      model.step = global_step + 1;

      if (cfg.log_every > 0 && global_step % uint64_t(cfg.log_every) == 0) {
        log << global_step << "," << traindetail::fmt6(stage.lambda) << ","
            << traindetail::fmt6(bpp_v) << "," << traindetail::fmt6(mse_v)
            << "," << traindetail::fmt6(loss_v) << "\n";
        for (size_t i = 0; i < batch.tags.size(); ++i) {
          static const char* kTagNames[] = {"noisy-paired", "clean-paired",
                                            "synthetic", "ud"};
          prov << global_step << "," << i << ","
               << kTagNames[int(batch.tags[i])] << ","
               << traindetail::fmt6(batch.scores[i]) << "\n";
        }
      }
    }
    schedule_pos = stage_end;

    std::map<std::string, std::vector<uint8_t>> extras;
    std::vector<uint8_t> t_bytes(8);
    for (int i = 0; i < 8; ++i) t_bytes[size_t(i)] = uint8_t(adam_t >> (8 * i));
    extras["train.adam_t"] = t_bytes;
    extras["train.rng"] = traindetail::rng_state_bytes(rng);
    const std::string mode_name = cfg.mode.name();
    extras["train.mode"] =
        std::vector<uint8_t>(mode_name.begin(), mode_name.end());
    const std::string ckpt =
        (fs::path(out_dir) /
         ("ckpt_lambda" + std::to_string(int64_t(stage.lambda)) + ".jdcm"))
            .string();
    save_checkpoint(model, ckpt, extras);
    save_checkpoint(model, (fs::path(out_dir) / "last.jdcm").string(), extras);
    result.checkpoint_paths.push_back(ckpt);
  }

  result.model = std::move(model);
  return result;
}

}  // namespace jdc

#endif  // JDC_TRAINER_HPP_
