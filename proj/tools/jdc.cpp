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

// jdc: train/compress/decompress/evaluate learned image codecs.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 decode error.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "jdc/bitstream.hpp"
#include "jdc/checkpoint.hpp"
#include "jdc/codec_net.hpp"
#include "jdc/common.hpp"
#include "jdc/dataset.hpp"
#include "jdc/entropy_model.hpp"
#include "jdc/image.hpp"
#include "jdc/metrics.hpp"
#include "jdc/trainer.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDecode = 4;

std::string extra_string(const std::map<std::string, std::vector<uint8_t>>& e,
                         const std::string& key, const std::string& fallback) {
  auto it = e.find(key);
  if (it == e.end()) return fallback;
  return std::string(it->second.begin(), it->second.end());
}

double record_score(const jdc::PairRecord& r) {
  if (r.crop_scores.empty()) return -1.0;
  double s = 0.0;
  for (const auto& c : r.crop_scores) s += c.ms_ssim;
  return s / double(r.crop_scores.size());
}

struct EvalRow {
  std::string codec;
  double lambda = 0.0;
  double bpp = 0.0;
  double msssim = 0.0;
  double psnr = 0.0;
};

void write_rows_csv(std::ostream& os, const std::vector<EvalRow>& rows) {
  os << "codec,lambda,bpp,msssim,psnr\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%g,%.6f,%.6f,%.4f\n", r.codec.c_str(),
                  r.lambda, r.bpp, r.msssim, r.psnr);
    os << buf;
  }
}

// Pairs whose mean crop score lies in [lo, hi). Records without crop scores
// are skipped (the manifest must be scored first).
std::vector<const jdc::PairRecord*> bucket_records(const jdc::Manifest& m,
                                                   double lo, double hi) {
  std::vector<const jdc::PairRecord*> out;
  for (const auto& r : m.records) {
    if (!r.is_pair() || !r.scored()) continue;
    const double s = record_score(r);
    if (s >= lo && s < hi) out.push_back(&r);
  }
  return out;
}

// Compresses each bucketed noisy image with the model and measures the
// reconstruction against the clean ground truth. The clean file is touched
// only for measurement, never for coding.
EvalRow eval_bucket(jdc::CodecModel& model, const std::string& codec_name,
                    const jdc::Manifest& m,
                    const std::vector<const jdc::PairRecord*>& recs,
                    double* mean_input_score) {
  EvalRow row;
  row.codec = codec_name;
  row.lambda = model.lambda;
  double sum_bpp = 0, sum_ms = 0, sum_psnr = 0, sum_score = 0;
  for (const auto* r : recs) {
    jdc::ImageF32 noisy = jdc::load_image(m.resolve(*r->noisy_path));
    jdc::ImageF32 clean = jdc::load_image(m.resolve(r->clean_path));
    std::vector<uint8_t> stream = jdc::compress(model, noisy);
    jdc::ImageF32 rec = jdc::decompress(model, stream);
    sum_bpp += jdc::bpp(stream.size(), noisy.width, noisy.height);
    sum_ms += jdc::ms_ssim(rec, clean);
    sum_psnr += jdc::psnr(rec, clean);
    sum_score += record_score(*r);
  }
  const double n = double(recs.size());
  row.bpp = sum_bpp / n;
  row.msssim = sum_ms / n;
  row.psnr = sum_psnr / n;
  if (mean_input_score != nullptr) *mean_input_score = sum_score / n;
  return row;
}

std::vector<jdc::LayerSpec> layers_from_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw jdc::IoError("cannot open layer config: " + path);
  nlohmann::json j;
  f >> j;
  std::vector<jdc::LayerSpec> layers;
  for (const auto& l : j.at("layers")) {
    jdc::LayerSpec s;
    s.name = l.at("name").get<std::string>();
    s.c_in = l.at("c_in").get<int>();
    s.c_out = l.at("c_out").get<int>();
    s.kernel = l.at("kernel").get<int>();
    s.stride = l.value("stride", 1);
    s.transposed = l.value("transposed", false);
    s.gdn = l.value("gdn", false);
    layers.push_back(std::move(s));
  }
  return layers;
}

void print_layer_table(const std::vector<jdc::LayerMacs>& layers) {
  std::printf("%-10s %14s %14s %14s\n", "layer", "conv MACs", "gdn MACs",
              "total");
  for (const auto& l : layers)
    std::printf("%-10s %14.4g %14.4g %14.4g\n", l.name.c_str(), l.conv_macs,
                l.gdn_macs, l.macs());
}

jdc::SupervisionMode parse_mode(const std::string& name, double tau, double a,
                                double b) {
  if (name == "compression-only") return jdc::SupervisionMode::compression_only();
  if (name == "jdc-n") return jdc::SupervisionMode::jdc_n();
  if (name == "jdc-cn") return jdc::SupervisionMode::jdc_cn();
  if (name == "jdc-cn-tau") return jdc::SupervisionMode::jdc_cn_tau(tau);
  if (name == "jdc-ud") return jdc::SupervisionMode::jdc_ud();
  if (name == "testolina") return jdc::SupervisionMode::testolina(a, b);
  throw jdc::ConfigError("unknown mode: " + name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jdc: a joint denoising and compression image codec"};
  app.require_subcommand(1);

  // --- score-pairs ---------------------------------------------------------
  auto* sc = app.add_subcommand("score-pairs",
                                "Score noisy/clean alignment per crop (MS-SSIM)");
  std::string sc_manifest, sc_out;
  int sc_crop = 256;
  sc->add_option("--manifest", sc_manifest, "input manifest (JSON lines)")
      ->required();
  sc->add_option("--out", sc_out, "output manifest path")->required();
  sc->add_option("--crop", sc_crop, "crop size for scoring (default 256)");

  // --- filter --------------------------------------------------------------
  auto* fi = app.add_subcommand("filter",
                                "Report crops passing an MS-SSIM threshold");
  std::string fi_manifest;
  double fi_tau = 0.8;
  fi->add_option("--manifest", fi_manifest, "scored manifest")->required();
  fi->add_option("--tau", fi_tau, "MS-SSIM threshold (default 0.8)");

  // --- make-synthetic ------------------------------------------------------
  auto* mk = app.add_subcommand("make-synthetic",
                                "Generate a synthetic noisy/clean scene set");
  std::string mk_out;
  int mk_scenes = 16, mk_size = 128;
  uint64_t mk_seed = 1;
  std::vector<double> mk_a{0.0004}, mk_b{0.0016};
  std::vector<int> mk_iso{1600};
  mk->add_option("--out", mk_out, "output directory")->required();
  mk->add_option("--scenes", mk_scenes, "scene count (default 16)");
  mk->add_option("--size", mk_size, "image size, multiple of 16 (default 128)");
  mk->add_option("--seed", mk_seed, "rng seed (default 1)");
  mk->add_option("--noise-a", mk_a, "signal-dependent variance slopes");
  mk->add_option("--noise-b", mk_b, "constant variance terms");
  mk->add_option("--iso", mk_iso, "nominal ISO per noise level");

  // --- train ---------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train a codec over a lambda schedule");
  std::string tr_manifest, tr_out, tr_mode = "compression-only", tr_resume;
  double tr_tau = 0.8, tr_a = 0.04, tr_b = 0.0016, tr_scale = 2e-4,
         tr_lr = 1e-4;
  int tr_crop = 64, tr_hidden = 32, tr_latent = 48, tr_priors = 1;
  uint64_t tr_seed = 1;
  bool tr_deep = false, tr_extended = false;
  tr->add_option("--manifest", tr_manifest, "scored manifest")->required();
  tr->add_option("--out", tr_out, "output directory")->required();
  tr->add_option("--mode", tr_mode,
                 "compression-only|jdc-n|jdc-cn|jdc-cn-tau|jdc-ud|testolina");
  tr->add_option("--tau", tr_tau, "threshold for jdc-cn-tau (default 0.8)");
  tr->add_option("--noise-a", tr_a, "testolina variance slope");
  tr->add_option("--noise-b", tr_b, "testolina constant variance");
  tr->add_option("--scale", tr_scale,
                 "schedule scale factor, 1 = full paper-length (default 2e-4)");
  tr->add_option("--lr", tr_lr, "Adam learning rate (default 1e-4)");
  tr->add_option("--crop", tr_crop, "training crop size (default 64)");
  tr->add_option("--hidden", tr_hidden, "hidden channels (default 32)");
  tr->add_option("--latent", tr_latent, "latent channels (default 48)");
  tr->add_option("--priors", tr_priors, "number of priors (default 1)");
  tr->add_flag("--deep-decoder", tr_deep, "use the 8-layer decoder");
  tr->add_flag("--extended", tr_extended, "prepend the high-rate lambda stages");
  tr->add_option("--seed", tr_seed, "rng seed (default 1)");
  tr->add_option("--resume", tr_resume, "checkpoint to resume from");

  // --- compress ------------------------------------------------------------
  auto* co = app.add_subcommand("compress", "Compress an image to a .jdc file");
  std::string co_model, co_in, co_out;
  co->add_option("--model", co_model, "checkpoint path")->required();
  co->add_option("--input", co_in, "input image (PPM or PNG)")->required();
  co->add_option("--output", co_out, "output .jdc path")->required();

  // --- decompress ----------------------------------------------------------
  auto* de = app.add_subcommand("decompress", "Decode a .jdc file to an image");
  std::string de_model, de_in, de_out;
  de->add_option("--model", de_model, "checkpoint path")->required();
  de->add_option("--input", de_in, "input .jdc path")->required();
  de->add_option("--output", de_out, "output image path")->required();

  // --- eval ----------------------------------------------------------------
  auto* ev = app.add_subcommand(
      "eval", "Evaluate a model on a noise bucket of a scored manifest");
  std::string ev_model, ev_manifest, ev_out;
  double ev_lo = 0.7, ev_hi = 1.0;
  ev->add_option("--model", ev_model, "checkpoint path")->required();
  ev->add_option("--manifest", ev_manifest, "scored manifest")->required();
  ev->add_option("--bucket-lo", ev_lo, "bucket lower bound, inclusive");
  ev->add_option("--bucket-hi", ev_hi, "bucket upper bound, exclusive");
  ev->add_option("--out", ev_out, "output CSV (default stdout)");

  // --- rd-curve ------------------------------------------------------------
  auto* rd = app.add_subcommand(
      "rd-curve", "Rate-distortion rows for several checkpoints and buckets");
  std::vector<std::string> rd_models;
  std::string rd_manifest, rd_out;
  std::vector<double> rd_lo{0.7}, rd_hi{1.0};
  rd->add_option("--models", rd_models, "checkpoint paths")->required();
  rd->add_option("--manifest", rd_manifest, "scored manifest")->required();
  rd->add_option("--bucket-lo", rd_lo, "bucket lower bounds");
  rd->add_option("--bucket-hi", rd_hi, "bucket upper bounds");
  rd->add_option("--out", rd_out, "output prefix (writes .csv and .dat)")
      ->required();

  // --- count-macs ----------------------------------------------------------
  auto* cm = app.add_subcommand("count-macs",
                                "Per-layer MAC table and GMac/MP totals");
  std::string cm_layers, cm_reference;
  int cm_hidden = 32, cm_latent = 48;
  bool cm_deep = false;
  double cm_mp = 1.0;
  cm->add_option("--layers", cm_layers,
                 "JSON layer list (overrides --hidden/--latent)");
  cm->add_option("--reference", cm_reference,
                 "JSON layer list of a reference denoiser for the ratio");
  cm->add_option("--hidden", cm_hidden, "hidden channels (default 32)");
  cm->add_option("--latent", cm_latent, "latent channels (default 48)");
  cm->add_flag("--deep-decoder", cm_deep, "use the 8-layer decoder");
  cm->add_option("--megapixels", cm_mp, "input megapixels (default 1)");

  // --- external ------------------------------------------------------------
  auto* ex = app.add_subcommand(
      "external", "Benchmark an external codec over the same protocol");
  std::string ex_adapter = "jpeg-gm", ex_manifest, ex_out;
  double ex_lo = 0.7, ex_hi = 1.0;
  std::vector<int> ex_q{10, 25, 50, 75, 95};
  ex->add_option("--adapter", ex_adapter, "external codec adapter (jpeg-gm)");
  ex->add_option("--manifest", ex_manifest, "scored manifest")->required();
  ex->add_option("--bucket-lo", ex_lo, "bucket lower bound");
  ex->add_option("--bucket-hi", ex_hi, "bucket upper bound");
  ex->add_option("--qualities", ex_q, "quality sweep");
  ex->add_option("--out", ex_out, "output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*sc) {
      jdc::Manifest m = jdc::load_manifest(sc_manifest);
      jdc::Manifest scored = jdc::score_pairs(m, sc_crop);
      jdc::save_manifest(scored, sc_out);
      int pairs = 0, flagged = 0;
      for (const auto& r : scored.records) {
        pairs += r.is_pair();
        flagged += r.flagged;
      }
      std::printf("scored %d pairs (%d flagged) -> %s\n", pairs, flagged,
                  sc_out.c_str());
    } else if (*fi) {
      jdc::Manifest m = jdc::load_manifest(fi_manifest);
      jdc::FilterResult res = jdc::filter_by_threshold(m, fi_tau);
      std::printf("tau=%g: kept %zu of %zu crops (%d below alignment floor)\n",
                  fi_tau, res.crops.size(), res.total_crops,
                  res.below_alignment_floor);
    } else if (*mk) {
      if (mk_a.size() != mk_b.size() || mk_a.size() != mk_iso.size())
        throw jdc::ConfigError("--noise-a/--noise-b/--iso must align");
      std::vector<jdc::NoiseLevel> levels;
      for (size_t i = 0; i < mk_a.size(); ++i)
        levels.push_back({mk_a[i], mk_b[i], mk_iso[i]});
      std::mt19937_64 rng(mk_seed);
      jdc::Manifest m =
          jdc::make_synthetic_scene_set(mk_scenes, mk_size, levels, rng, mk_out);
      std::printf("wrote %zu records to %s/manifest.jsonl\n", m.records.size(),
                  mk_out.c_str());
    } else if (*tr) {
      jdc::TrainConfig cfg;
      cfg.net.hidden_channels = tr_hidden;
      cfg.net.latent_channels = tr_latent;
      cfg.net.decoder_layers = tr_deep ? 8 : 4;
      cfg.net.num_priors = tr_priors;
      cfg.mode = parse_mode(tr_mode, tr_tau, tr_a, tr_b);
      cfg.schedule = jdc::default_schedule(
          tr_scale, tr_extended,
          cfg.mode.kind == jdc::SupervisionMode::Kind::kTestolina);
      cfg.lr = tr_lr;
      cfg.crop_size = tr_crop;
      cfg.seed = tr_seed;
      jdc::Manifest m = jdc::load_manifest(tr_manifest);
      jdc::TrainResult res = jdc::train(cfg, m, tr_out, tr_resume);
      std::printf("trained %s: %zu checkpoints, log %s\n",
                  cfg.mode.name().c_str(), res.checkpoint_paths.size(),
                  res.log_path.c_str());
    } else if (*co) {
      auto loaded = jdc::load_checkpoint(co_model);
      jdc::ImageF32 img = jdc::load_image(co_in);
      jdc::CompressStats stats;
      std::vector<uint8_t> bytes = jdc::compress(loaded.model, img, &stats);
      jdc::write_bytes(co_out, bytes);
      std::printf("%s: %zu bytes, %.6f bpp (prior %d)\n", co_out.c_str(),
                  stats.file_bytes,
                  jdc::bpp(stats.file_bytes, img.width, img.height),
                  stats.prior);
    } else if (*de) {
      auto loaded = jdc::load_checkpoint(de_model);
      std::vector<uint8_t> bytes = jdc::read_bytes(de_in);
      jdc::ImageF32 img = jdc::decompress(loaded.model, bytes);
      jdc::save_image(img, de_out);
      std::printf("%s: %dx%d\n", de_out.c_str(), img.width, img.height);
    } else if (*ev) {
      auto loaded = jdc::load_checkpoint(ev_model);
      jdc::Manifest m = jdc::load_manifest(ev_manifest);
      auto recs = bucket_records(m, ev_lo, ev_hi);
      std::vector<EvalRow> rows;
      if (recs.empty()) {
        std::fprintf(stderr, "warning: empty bucket [%g, %g)\n", ev_lo, ev_hi);
      } else {
        double mean_score = 0.0;
        const std::string codec =
            extra_string(loaded.extras, "train.mode", "jdc");
        rows.push_back(
            eval_bucket(loaded.model, codec, m, recs, &mean_score));
        std::printf("bucket [%g, %g): %zu pairs, mean input MS-SSIM %.4f\n",
                    ev_lo, ev_hi, recs.size(), mean_score);
      }
      if (ev_out.empty()) {
        write_rows_csv(std::cout, rows);
      } else {
        std::ofstream f(ev_out);
        if (!f) throw jdc::IoError("cannot open " + ev_out);
        write_rows_csv(f, rows);
      }
    } else if (*rd) {
      if (rd_lo.size() != rd_hi.size())
        throw jdc::ConfigError("--bucket-lo/--bucket-hi must align");
      jdc::Manifest m = jdc::load_manifest(rd_manifest);
      std::vector<EvalRow> rows;
      for (const auto& path : rd_models) {
        auto loaded = jdc::load_checkpoint(path);
        const std::string codec =
            extra_string(loaded.extras, "train.mode", "jdc");
        for (size_t b = 0; b < rd_lo.size(); ++b) {
          auto recs = bucket_records(m, rd_lo[b], rd_hi[b]);
          if (recs.empty()) {
            std::fprintf(stderr, "warning: empty bucket [%g, %g)\n", rd_lo[b],
                         rd_hi[b]);
            continue;
          }
          rows.push_back(eval_bucket(loaded.model, codec, m, recs, nullptr));
        }
      }
      std::stable_sort(rows.begin(), rows.end(),
                       [](const EvalRow& a, const EvalRow& b) {
                         return a.codec != b.codec ? a.codec < b.codec
                                                   : a.bpp < b.bpp;
                       });
      {
        std::ofstream f(rd_out + ".csv");
        if (!f) throw jdc::IoError("cannot open " + rd_out + ".csv");
        write_rows_csv(f, rows);
      }
      {
        // gnuplot: one block per codec, blank-line separated
        std::ofstream f(rd_out + ".dat");
        if (!f) throw jdc::IoError("cannot open " + rd_out + ".dat");
        f << "# codec lambda bpp msssim psnr\n";
        std::string last;
        for (const auto& r : rows) {
          if (!last.empty() && r.codec != last) f << "\n\n";
          last = r.codec;
          f << r.codec << " " << r.lambda << " " << r.bpp << " " << r.msssim
            << " " << r.psnr << "\n";
        }
      }
      std::printf("wrote %zu rows to %s.csv / %s.dat\n", rows.size(),
                  rd_out.c_str(), rd_out.c_str());
    } else if (*cm) {
      double enc_total = 0.0;
      if (!cm_layers.empty()) {
        auto layers = layers_from_json(cm_layers);
        auto macs = jdc::count_macs_layers(layers, cm_mp);
        print_layer_table(macs);
        for (const auto& l : macs) enc_total += l.macs();
        std::printf("total: %.4f GMac (%.4f GMac/MP)\n", enc_total * 1e-9,
                    enc_total * 1e-9 / cm_mp);
      } else {
        jdc::CodecConfig cfg;
        cfg.hidden_channels = cm_hidden;
        cfg.latent_channels = cm_latent;
        cfg.decoder_layers = cm_deep ? 8 : 4;
        jdc::MacReport rep = jdc::count_macs(cfg, cm_mp);
        std::printf("encoder:\n");
        print_layer_table(rep.encoder);
        std::printf("decoder:\n");
        print_layer_table(rep.decoder);
        std::printf("encoder total: %.4f GMac/MP\n",
                    rep.encoder_total * 1e-9 / cm_mp);
        std::printf("decoder total: %.4f GMac/MP\n",
                    rep.decoder_total * 1e-9 / cm_mp);
        enc_total = rep.encoder_total;
      }
      if (!cm_reference.empty()) {
        auto ref_layers = layers_from_json(cm_reference);
        auto ref_macs = jdc::count_macs_layers(ref_layers, cm_mp);
        double ref_total = 0.0;
        for (const auto& l : ref_macs) ref_total += l.macs();
        std::printf("reference denoiser: %.4f GMac/MP\n",
                    ref_total * 1e-9 / cm_mp);
        std::printf(
            "encoder/denoiser ratio: %.4f (approximate: the reference "
            "config is a reconstruction, not an exact architecture)\n",
            enc_total / ref_total);
      }
    } else if (*ex) {
      if (ex_adapter != "jpeg-gm")
        throw jdc::ConfigError("unknown adapter: " + ex_adapter);
      if (std::system("gm version > /dev/null 2>&1") != 0) {
        std::fprintf(stderr,
                     "notice: GraphicsMagick (gm) not found; skipping "
                     "external codec benchmark\n");
        return 0;
      }
      jdc::Manifest m = jdc::load_manifest(ex_manifest);
      auto recs = bucket_records(m, ex_lo, ex_hi);
      if (recs.empty())
        std::fprintf(stderr, "warning: empty bucket [%g, %g)\n", ex_lo, ex_hi);
      std::vector<EvalRow> rows;
      const std::string tmp_jpg = "/tmp/jdc_ext.jpg";
      const std::string tmp_ppm = "/tmp/jdc_ext.ppm";
      for (int q : ex_q) {
        double sum_bpp = 0, sum_ms = 0, sum_psnr = 0;
        for (const auto* r : recs) {
          const std::string noisy = m.resolve(*r->noisy_path);
          jdc::ImageF32 clean = jdc::load_image(m.resolve(r->clean_path));
          std::ostringstream enc_cmd, dec_cmd;
          enc_cmd << "gm convert " << noisy << " -quality " << q << " "
                  << tmp_jpg;
          dec_cmd << "gm convert " << tmp_jpg << " " << tmp_ppm;
          if (std::system(enc_cmd.str().c_str()) != 0 ||
              std::system(dec_cmd.str().c_str()) != 0)
            throw jdc::IoError("external codec invocation failed");
          jdc::ImageF32 rec = jdc::load_image(tmp_ppm);
          sum_bpp += jdc::bpp(std::filesystem::file_size(tmp_jpg), rec.width,
                              rec.height);
          sum_ms += jdc::ms_ssim(rec, clean);
          sum_psnr += jdc::psnr(rec, clean);
        }
        if (!recs.empty()) {
          const double n = double(recs.size());
          rows.push_back({"jpeg-gm", double(q), sum_bpp / n, sum_ms / n,
                          sum_psnr / n});
        }
      }
      if (ex_out.empty()) {
        write_rows_csv(std::cout, rows);
      } else {
        std::ofstream f(ex_out);
        if (!f) throw jdc::IoError("cannot open " + ex_out);
        write_rows_csv(f, rows);
      }
    }
  } catch (const jdc::DecodeError& e) {
    std::fprintf(stderr, "decode error: %s\n", e.what());
    return kExitDecode;
  } catch (const jdc::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return 0;
}
