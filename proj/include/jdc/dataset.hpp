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

// Dataset machinery: scene-grouped noisy-clean pair manifests (JSON lines),
// per-crop MS-SSIM scoring, threshold/ISO filtering, supervision-mode batch
// composition, signal-dependent synthetic noise, and a procedural scene
// generator standing in for tripod-captured pair datasets at desk scale.

#ifndef JDC_DATASET_HPP_
#define JDC_DATASET_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jdc/common.hpp"
#include "jdc/image.hpp"
#include "jdc/metrics.hpp"

namespace jdc {

// Crops whose pair score falls below this are treated as misaligned captures
// and dropped regardless of the training threshold.
constexpr double kAlignmentFloor = 0.3;

struct CropScore {
  int x0 = 0;
  int y0 = 0;
  int size = 0;
  double ms_ssim = 0.0;
};

struct PairRecord {
  std::string scene_id;
  std::string clean_path;                 // relative to the manifest dir
  std::optional<std::string> noisy_path;  // absent for clean-only records
  std::optional<int> iso;
  std::vector<CropScore> crop_scores;
  bool flagged = false;  // pair members disagree on dimensions

  bool is_pair() const { return noisy_path.has_value(); }
  bool scored() const { return !crop_scores.empty(); }
};

struct Manifest {
  std::string dir;  // directory the record paths are relative to
  std::vector<PairRecord> records;

  std::string resolve(const std::string& rel) const {
    return (std::filesystem::path(dir) / rel).string();
  }
};

// --- JSON-lines serialization ----------------------------------------------

inline nlohmann::ordered_json record_to_json(const PairRecord& r) {
  nlohmann::ordered_json j;
  j["scene"] = r.scene_id;
  j["clean"] = r.clean_path;
  if (r.noisy_path) j["noisy"] = *r.noisy_path;
  if (r.iso) j["iso"] = *r.iso;
  if (!r.crop_scores.empty()) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : r.crop_scores)
      arr.push_back({c.x0, c.y0, c.size, c.ms_ssim});
    j["crop_scores"] = arr;
  }
  if (r.flagged) j["flagged"] = true;
  return j;
}

inline PairRecord record_from_json(const nlohmann::json& j) {
  PairRecord r;
  r.scene_id = j.at("scene").get<std::string>();
  r.clean_path = j.at("clean").get<std::string>();
  if (j.contains("noisy")) r.noisy_path = j["noisy"].get<std::string>();
  if (j.contains("iso")) r.iso = j["iso"].get<int>();
  if (j.contains("crop_scores"))
    for (const auto& c : j["crop_scores"])
      r.crop_scores.push_back({c.at(0).get<int>(), c.at(1).get<int>(),
                               c.at(2).get<int>(), c.at(3).get<double>()});
  if (j.contains("flagged")) r.flagged = j["flagged"].get<bool>();
  return r;
}

inline Manifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest " + path);
  Manifest m;
  m.dir = std::filesystem::path(path).parent_path().string();
  if (m.dir.empty()) m.dir = ".";
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      m.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("manifest " + path + " line " + std::to_string(lineno) +
                    ": " + e.what());
    }
  }
  return m;
}

inline void save_manifest(const Manifest& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write manifest " + path);
  for (const auto& r : m.records) f << record_to_json(r).dump() << "\n";
  if (!f) throw IoError("write failed: " + path);
}

// --- Scoring and filtering -------------------------------------------------

// Scores every non-overlapping crop_size grid cell of each pair record with
// MS-SSIM(noisy crop, clean crop). Pairs with mismatched dims are flagged,
// not scored. Record order is preserved; output is deterministic.
inline Manifest score_pairs(const Manifest& in, int crop_size) {
  Manifest out = in;
  for (auto& r : out.records) {
    if (!r.is_pair()) continue;
    const ImageF32 clean = load_image(out.resolve(r.clean_path));
    const ImageF32 noisy = load_image(out.resolve(*r.noisy_path));
    if (!clean.same_dims(noisy)) {
      r.flagged = true;
      r.crop_scores.clear();
      continue;
    }
    r.crop_scores.clear();
    for (int y0 = 0; y0 + crop_size <= clean.height; y0 += crop_size)
      for (int x0 = 0; x0 + crop_size <= clean.width; x0 += crop_size) {
        const CropSpec spec{x0, y0, crop_size};
        const double s =
            ms_ssim(extract_crop(noisy, spec), extract_crop(clean, spec));
        r.crop_scores.push_back({x0, y0, crop_size, s});
      }
  }
  return out;
}

// A usable training crop: a (noisy, clean) pair plus its window and score.
struct NoisyCrop {
  std::string noisy_path;  // resolved
  std::string clean_path;  // resolved
  CropSpec spec;
  double score = 0.0;
};

struct FilterResult {
  std::vector<NoisyCrop> crops;
  size_t total_crops = 0;
  int below_alignment_floor = 0;
};

// Crops with score >= tau (inclusive, per the threshold convention). Crops
// under the alignment floor are excluded and counted separately.
inline FilterResult filter_by_threshold(const Manifest& m, double tau) {
  FilterResult out;
  bool any_scored = false;
  for (const auto& r : m.records) {
    if (!r.is_pair() || r.flagged) continue;
    if (r.scored()) any_scored = true;
    for (const auto& c : r.crop_scores) {
      ++out.total_crops;
      if (c.ms_ssim < kAlignmentFloor) {
        ++out.below_alignment_floor;
        continue;
      }
      if (c.ms_ssim >= tau)
        out.crops.push_back({m.resolve(*r.noisy_path), m.resolve(r.clean_path),
                             {c.x0, c.y0, c.size}, c.ms_ssim});
    }
  }
  if (!any_scored)
    throw ConfigError("filter_by_threshold: manifest has no scored pairs");
  return out;
}

struct IsoFilterResult {
  std::vector<PairRecord> kept;
  int skipped_unknown_iso = 0;
  int skipped_high_iso = 0;
};

// Keeps records with iso <= max_iso; unknown ISO is excluded (conservative).
inline IsoFilterResult iso_filter(const std::vector<PairRecord>& records,
                                  int max_iso) {
  IsoFilterResult out;
  for (const auto& r : records) {
    if (!r.iso) {
      ++out.skipped_unknown_iso;
    } else if (*r.iso > max_iso) {
      ++out.skipped_high_iso;
    } else {
      out.kept.push_back(r);
    }
  }
  return out;
}

// --- Synthetic noise ---------------------------------------------------------

// Signal-dependent noise: x -> clamp01(x + n), n ~ Normal(0, a*x + b).
// Gaussian approximation of the Poissonian-Gaussian model.
inline ImageF32 add_poisson_gauss_noise(const ImageF32& img, double a, double b,
                                        std::mt19937_64& rng) {
  if (a < 0 || b < 0)
    throw ConfigError("add_poisson_gauss_noise: a, b must be >= 0");
  ImageF32 out = img;
  if (a == 0.0 && b == 0.0) return out;
  std::normal_distribution<double> unit(0.0, 1.0);
  for (auto& v : out.data) {
    const double var = a * double(v) + b;
    const double n = var > 0 ? std::sqrt(var) * unit(rng) : 0.0;
    v = float(std::clamp(double(v) + n, 0.0, 1.0));
  }
  return out;
}

// --- Universal-denoiser pairing ---------------------------------------------

struct UdManifestResult {
  Manifest manifest;
  std::vector<std::string> warnings;
};

// Pairs every input image (treated as noisy) with the denoiser output of the
// same filename stem. Inputs without a counterpart are skipped with a warning.
inline UdManifestResult build_ud_manifest(const std::string& input_dir,
                                          const std::string& denoised_dir) {
  namespace fs = std::filesystem;
  UdManifestResult out;
  out.manifest.dir = input_dir;
  std::map<std::string, fs::path> denoised;
  for (const auto& e : fs::directory_iterator(denoised_dir))
    if (e.is_regular_file()) denoised[e.path().stem().string()] = e.path();
  std::vector<fs::path> inputs;
  for (const auto& e : fs::directory_iterator(input_dir))
    if (e.is_regular_file()) inputs.push_back(e.path());
  std::sort(inputs.begin(), inputs.end());
  for (const auto& in : inputs) {
    auto it = denoised.find(in.stem().string());
    if (it == denoised.end()) {
      out.warnings.push_back("no denoised counterpart for " + in.string());
      continue;
    }
    PairRecord r;
    r.scene_id = in.stem().string();
    // "clean" is the denoiser output; the original input plays the noisy role
    r.clean_path = fs::relative(it->second, input_dir).string();
    r.noisy_path = fs::relative(in, input_dir).string();
    out.manifest.records.push_back(std::move(r));
  }
  return out;
}

// --- Batch composition -------------------------------------------------------

struct SupervisionMode {
  enum class Kind { kJdcN, kJdcCN, kJdcCn, kJdcUD, kTestolina, kCompressionOnly };
  Kind kind = Kind::kCompressionOnly;
  double tau = 0.0;  // JDC-Cn threshold
  double noise_a = 0.0, noise_b = 0.0;  // Testolina

  static SupervisionMode jdc_n() { return {Kind::kJdcN, 0, 0, 0}; }
  static SupervisionMode jdc_cn() { return {Kind::kJdcCN, 0, 0, 0}; }
  static SupervisionMode jdc_cn_tau(double tau) {
    if (tau <= 0.0 || tau >= 1.0)
      throw ConfigError("JDC-Cn: tau must be in (0,1)");
    return {Kind::kJdcCn, tau, 0, 0};
  }
  static SupervisionMode jdc_ud() { return {Kind::kJdcUD, 0, 0, 0}; }
  static SupervisionMode testolina(double a, double b) {
    if (a <= 0.0 || b <= 0.0) throw ConfigError("Testolina: a, b must be > 0");
    return {Kind::kTestolina, 0, a, b};
  }
  static SupervisionMode compression_only() {
    return {Kind::kCompressionOnly, 0, 0, 0};
  }

  std::string name() const {
    switch (kind) {
      case Kind::kJdcN: return "JDC-N";
      case Kind::kJdcCN: return "JDC-CN";
      case Kind::kJdcCn: return "JDC-Cn." + std::to_string(tau).substr(2, 1);
      case Kind::kJdcUD: return "JDC-UD";
      case Kind::kTestolina: return "Testolina";
      case Kind::kCompressionOnly: return "CompressionOnly";
    }
    return "?";
  }
};

enum class Provenance { kNoisyPaired, kCleanPaired, kSynthetic, kUd };

struct TrainBatch {
  std::vector<ImageF32> inputs;
  std::vector<ImageF32> targets;
  std::vector<Provenance> tags;
  std::vector<double> scores;  // recorded crop score, -1 when not applicable
};

// Eligible source pools for one supervision mode, with a load cache.
class DataPools {
 public:
  std::vector<NoisyCrop> noisy_crops;       // paired, threshold-filtered
  std::vector<std::string> clean_images;    // resolved paths
  std::vector<NoisyCrop> ud_crops;          // input/denoised pairs (unscored)

  const ImageF32& image(const std::string& path) {
    auto it = cache_.find(path);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(path, load_image(path)).first->second;
  }

 private:
  std::map<std::string, ImageF32> cache_;
};

// Builds the pools a supervision mode needs from a scored manifest.
// max_clean_iso mirrors the clean-set ISO rule; clean-only records without
// ISO metadata are excluded.
inline DataPools build_pools(const Manifest& m, const SupervisionMode& mode,
                             int crop_size, int max_clean_iso = 200) {
  DataPools pools;
  using K = SupervisionMode::Kind;

  if (mode.kind == K::kJdcN || mode.kind == K::kJdcCN ||
      mode.kind == K::kJdcCn) {
    const double tau = mode.kind == K::kJdcCn ? mode.tau : 0.0;
    pools.noisy_crops = filter_by_threshold(m, tau).crops;
  }
  if (mode.kind != K::kJdcN && mode.kind != K::kJdcUD) {
    std::vector<PairRecord> clean_only;
    for (const auto& r : m.records)
      if (!r.is_pair()) clean_only.push_back(r);
    for (const auto& r : iso_filter(clean_only, max_clean_iso).kept)
      pools.clean_images.push_back(m.resolve(r.clean_path));
  }
  if (mode.kind == K::kJdcUD) {
    for (const auto& r : m.records) {
      if (!r.is_pair()) continue;
      pools.ud_crops.push_back({m.resolve(*r.noisy_path),
                                m.resolve(r.clean_path),
                                {0, 0, crop_size},
                                -1.0});
    }
  }
  (void)crop_size;
  return pools;
}

// One batch per the paper's composition: 4 noisy-input elements + 1
// clean-input element for the paired modes; see the per-mode cases below.
inline TrainBatch sample_batch(const SupervisionMode& mode, DataPools& pools,
                               int crop_size, std::mt19937_64& rng) {
  using K = SupervisionMode::Kind;
  TrainBatch batch;

  auto pick_crop = [&rng, crop_size](const ImageF32& img) {
    if (img.width < crop_size || img.height < crop_size)
      throw ConfigError("sample_batch: image smaller than crop size");
    std::uniform_int_distribution<int> dx(0, img.width - crop_size);
    std::uniform_int_distribution<int> dy(0, img.height - crop_size);
    const int x0 = dx(rng), y0 = dy(rng);
    return CropSpec{x0, y0, crop_size};
  };

  auto add_noisy_paired = [&](const std::vector<NoisyCrop>& pool,
                              Provenance tag) {
    if (pool.empty())
      throw ConfigError("sample_batch: empty pool for " + mode.name() +
                        (tag == Provenance::kUd ? " (ud pairs)"
                                                : " (noisy crops)"));
    std::uniform_int_distribution<size_t> d(0, pool.size() - 1);
    const NoisyCrop& nc = pool[d(rng)];
    const ImageF32& noisy = pools.image(nc.noisy_path);
    const ImageF32& clean = pools.image(nc.clean_path);
    CropSpec spec = nc.spec;
    if (tag == Provenance::kUd) spec = pick_crop(noisy);
    batch.inputs.push_back(extract_crop(noisy, spec));
    batch.targets.push_back(extract_crop(clean, spec));
    batch.tags.push_back(tag);
    batch.scores.push_back(nc.score);
  };

  auto add_clean = [&](Provenance tag, bool synth_noise) {
    if (pools.clean_images.empty())
      throw ConfigError("sample_batch: empty clean pool for " + mode.name());
    std::uniform_int_distribution<size_t> d(0, pools.clean_images.size() - 1);
    const ImageF32& img = pools.image(pools.clean_images[d(rng)]);
    const CropSpec spec = pick_crop(img);
    ImageF32 clean = extract_crop(img, spec);
    if (synth_noise) {
      batch.inputs.push_back(
          add_poisson_gauss_noise(clean, mode.noise_a, mode.noise_b, rng));
    } else {
      batch.inputs.push_back(clean);
    }
    batch.targets.push_back(std::move(clean));
    batch.tags.push_back(tag);
    batch.scores.push_back(-1.0);
  };

  switch (mode.kind) {
    case K::kJdcN:
      for (int i = 0; i < 5; ++i)
        add_noisy_paired(pools.noisy_crops, Provenance::kNoisyPaired);
      break;
    case K::kJdcCN:
    case K::kJdcCn:
      for (int i = 0; i < 4; ++i)
        add_noisy_paired(pools.noisy_crops, Provenance::kNoisyPaired);
      add_clean(Provenance::kCleanPaired, false);
      break;
    case K::kJdcUD:
      for (int i = 0; i < 5; ++i)
        add_noisy_paired(pools.ud_crops, Provenance::kUd);
      break;
    case K::kTestolina:
      for (int i = 0; i < 5; ++i) add_clean(Provenance::kSynthetic, true);
      break;
    case K::kCompressionOnly:
      for (int i = 0; i < 5; ++i) add_clean(Provenance::kCleanPaired, false);
      break;
  }
  return batch;
}

// --- Synthetic scene generator ----------------------------------------------

namespace scenedetail {

// Procedural clean scene: oriented gradient base, low-frequency sinusoid
// texture, and a handful of soft-edged shapes.
inline ImageF32 make_scene(int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u01(0.0f, 1.0f);
  ImageF32 img(3, size, size);
  float g0[3], g1[3];
  for (int c = 0; c < 3; ++c) {
    g0[c] = u01(rng);
    g1[c] = u01(rng);
  }
  const float angle = u01(rng) * 6.2831853f;
  const float dx = std::cos(angle), dy = std::sin(angle);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const float t = 0.5f + 0.5f * (dx * (float(x) / size - 0.5f) +
                                     dy * (float(y) / size - 0.5f)) * 2.0f;
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = g0[c] + (g1[c] - g0[c]) * std::clamp(t, 0.0f, 1.0f);
    }
  // sinusoid texture
  const float fx = 1.0f + u01(rng) * 4.0f, fy = 1.0f + u01(rng) * 4.0f;
  const float amp = 0.04f + 0.06f * u01(rng);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const float s = amp * std::sin(6.2831853f * fx * x / size) *
                      std::cos(6.2831853f * fy * y / size);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) += s;
    }
  // soft shapes
  std::uniform_int_distribution<int> nshapes(3, 8);
  const int count = nshapes(rng);
  for (int i = 0; i < count; ++i) {
    const float cx = u01(rng) * size, cy = u01(rng) * size;
    const float r = (0.05f + 0.2f * u01(rng)) * size;
    float col[3];
    for (int c = 0; c < 3; ++c) col[c] = u01(rng);
    const bool rect = u01(rng) < 0.5f;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        float d;
        if (rect) {
          d = std::max(std::abs(x - cx), std::abs(y - cy)) - r;
        } else {
          d = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy)) - r;
        }
        const float alpha = std::clamp(0.5f - d / 2.0f, 0.0f, 1.0f) * 0.85f;
        if (alpha <= 0) continue;
        for (int c = 0; c < 3; ++c)
          img.at(c, y, x) = img.at(c, y, x) * (1 - alpha) + col[c] * alpha;
      }
  }
  for (auto& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

}  // namespace scenedetail

struct NoiseLevel {
  double a = 0.0;
  double b = 0.0;
  int iso = 0;  // nominal ISO recorded on the pair record
};

// Writes n_scenes clean images plus one noisy version per level, a clean-only
// record per scene (iso 100), and one pair record per (scene, level).
inline Manifest make_synthetic_scene_set(int n_scenes, int size,
                                         const std::vector<NoiseLevel>& levels,
                                         std::mt19937_64& rng,
                                         const std::string& out_dir) {
  if (size % 16 != 0)
    throw ConfigError("make_synthetic_scene_set: size must be a multiple of 16");
  std::filesystem::create_directories(out_dir);
  Manifest m;
  m.dir = out_dir;
  for (int i = 0; i < n_scenes; ++i) {
    const std::string scene = "scene" + std::to_string(i);
    const ImageF32 clean = scenedetail::make_scene(size, rng);
    const std::string clean_name = scene + "_clean.ppm";
    save_image(clean, m.resolve(clean_name));
    PairRecord clean_rec;
    clean_rec.scene_id = scene;
    clean_rec.clean_path = clean_name;
    clean_rec.iso = 100;
    m.records.push_back(clean_rec);
    for (size_t l = 0; l < levels.size(); ++l) {
      const ImageF32 noisy =
          add_poisson_gauss_noise(clean, levels[l].a, levels[l].b, rng);
      const std::string noisy_name =
          scene + "_noisy" + std::to_string(l) + ".ppm";
      save_image(noisy, m.resolve(noisy_name));
      PairRecord r;
      r.scene_id = scene;
      r.clean_path = clean_name;
      r.noisy_path = noisy_name;
      r.iso = levels[l].iso;
      m.records.push_back(std::move(r));
    }
  }
  save_manifest(m, (std::filesystem::path(out_dir) / "manifest.jsonl").string());
  return m;
}

}  // namespace jdc

#endif  // JDC_DATASET_HPP_
