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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <string>

#include "jdc/dataset.hpp"

using jdc::ImageF32;
using jdc::Manifest;
using jdc::PairRecord;
using jdc::SupervisionMode;

namespace {

namespace fs = std::filesystem;

std::string fresh_dir(const std::string& name) {
  const std::string d = (fs::temp_directory_path() / name).string();
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// scene set shared by the pool/batch tests; built once
const Manifest& scored_set() {
  static Manifest scored = [] {
    std::mt19937_64 rng(71);
    const std::string dir = fresh_dir("jdc_ds_scenes");
    Manifest m = jdc::make_synthetic_scene_set(
        6, 64, {{0.0005, 0.001, 800}, {0.01, 0.02, 6400}}, rng, dir);
    return jdc::score_pairs(m, 32);
  }();
  return scored;
}

}  // namespace

TEST_CASE("manifest JSON-lines round trip") {
  const std::string dir = fresh_dir("jdc_ds_manifest");
  Manifest m;
  m.dir = dir;
  PairRecord a;
  a.scene_id = "s0";
  a.clean_path = "c.ppm";
  a.noisy_path = "n.ppm";
  a.iso = 3200;
  a.crop_scores = {{0, 0, 32, 0.91}, {32, 0, 32, 0.85}};
  m.records.push_back(a);
  PairRecord b;
  b.scene_id = "s1";
  b.clean_path = "c2.ppm";
  b.flagged = true;
  m.records.push_back(b);

  const std::string path = dir + "/m.jsonl";
  jdc::save_manifest(m, path);
  Manifest back = jdc::load_manifest(path);
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[0].scene_id == "s0");
  CHECK(*back.records[0].noisy_path == "n.ppm");
  CHECK(*back.records[0].iso == 3200);
  REQUIRE(back.records[0].crop_scores.size() == 2);
  CHECK(back.records[0].crop_scores[1].ms_ssim == doctest::Approx(0.85));
  CHECK(back.records[0].crop_scores[1].x0 == 32);
  CHECK(!back.records[1].is_pair());
  CHECK(back.records[1].flagged);
}

TEST_CASE("score_pairs: identical pair scores 1, heavy noise scores lower") {
  const std::string dir = fresh_dir("jdc_ds_score");
  std::mt19937_64 rng(3);
  ImageF32 clean = jdc::scenedetail::make_scene(64, rng);
  jdc::save_image(clean, dir + "/c.ppm");
  jdc::save_image(clean, dir + "/same.ppm");
  ImageF32 noisy = jdc::add_poisson_gauss_noise(clean, 0.02, 0.03, rng);
  jdc::save_image(noisy, dir + "/n.ppm");

  Manifest m;
  m.dir = dir;
  PairRecord same;
  same.scene_id = "a";
  same.clean_path = "c.ppm";
  same.noisy_path = "same.ppm";
  m.records.push_back(same);
  PairRecord noise;
  noise.scene_id = "b";
  noise.clean_path = "c.ppm";
  noise.noisy_path = "n.ppm";
  m.records.push_back(noise);

  Manifest scored = jdc::score_pairs(m, 32);
  REQUIRE(scored.records[0].scored());
  REQUIRE(scored.records[1].scored());
  // 64x64 with 32-crops -> a 2x2 grid
  CHECK(scored.records[0].crop_scores.size() == 4);
  for (const auto& c : scored.records[0].crop_scores)
    CHECK(c.ms_ssim == doctest::Approx(1.0));
  for (const auto& c : scored.records[1].crop_scores)
    CHECK(c.ms_ssim < 0.999);
}

TEST_CASE("score_pairs flags dimension mismatches instead of scoring") {
  const std::string dir = fresh_dir("jdc_ds_flag");
  std::mt19937_64 rng(5);
  ImageF32 clean = jdc::scenedetail::make_scene(64, rng);
  ImageF32 small(3, 32, 32);
  jdc::save_image(clean, dir + "/c.ppm");
  jdc::save_image(small, dir + "/n.ppm");
  Manifest m;
  m.dir = dir;
  PairRecord r;
  r.scene_id = "x";
  r.clean_path = "c.ppm";
  r.noisy_path = "n.ppm";
  m.records.push_back(r);
  Manifest scored = jdc::score_pairs(m, 32);
  CHECK(scored.records[0].flagged);
  CHECK(!scored.records[0].scored());
}

TEST_CASE("threshold filtering is monotonically nested over tau") {
  const Manifest& m = scored_set();
  const double taus[5] = {0.5, 0.6, 0.7, 0.8, 0.9};
  size_t prev = SIZE_MAX;
  for (double tau : taus) {
    auto res = jdc::filter_by_threshold(m, tau);
    CHECK(res.crops.size() <= prev);
    for (const auto& c : res.crops) CHECK(c.score >= tau);
    // nesting: every crop kept at tau is kept at every smaller tau
    prev = res.crops.size();
  }
  // inclusive threshold and the unscored-manifest guard
  Manifest unscored;
  unscored.dir = m.dir;
  PairRecord r;
  r.scene_id = "u";
  r.clean_path = "c.ppm";
  r.noisy_path = "n.ppm";
  unscored.records.push_back(r);
  CHECK_THROWS_AS(jdc::filter_by_threshold(unscored, 0.5), jdc::ConfigError);
}

TEST_CASE("iso filter keeps low ISO and drops unknown conservatively") {
  std::vector<PairRecord> recs(3);
  recs[0].iso = 100;
  recs[1].iso = 6400;
  // recs[2].iso unset
  auto res = jdc::iso_filter(recs, 200);
  CHECK(res.kept.size() == 1);
  CHECK(*res.kept[0].iso == 100);
  CHECK(res.skipped_high_iso == 1);
  CHECK(res.skipped_unknown_iso == 1);
}

TEST_CASE("poisson-gauss noise variance tracks a*x+b") {
  // Monte-Carlo oracle on a constant image
  ImageF32 img(3, 64, 64);
  std::fill(img.data.begin(), img.data.end(), 0.5f);
  std::mt19937_64 rng(9);
  const double a = 0.02, b = 0.005;
  ImageF32 noisy = jdc::add_poisson_gauss_noise(img, a, b, rng);
  double mean = 0.0, var = 0.0;
  for (float v : noisy.data) mean += v;
  mean /= double(noisy.data.size());
  for (float v : noisy.data) var += (v - mean) * (v - mean);
  var /= double(noisy.data.size());
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(var == doctest::Approx(a * 0.5 + b).epsilon(0.06));

  // zero noise is the identity
  std::mt19937_64 rng2(9);
  ImageF32 same = jdc::add_poisson_gauss_noise(img, 0.0, 0.0, rng2);
  CHECK(same.data == img.data);
}

TEST_CASE("ud manifest pairs files by stem") {
  const std::string in_dir = fresh_dir("jdc_ds_ud_in");
  const std::string dn_dir = fresh_dir("jdc_ds_ud_dn");
  ImageF32 img(3, 16, 16);
  jdc::save_image(img, in_dir + "/a.ppm");
  jdc::save_image(img, in_dir + "/b.ppm");
  jdc::save_image(img, in_dir + "/c.ppm");
  jdc::save_image(img, dn_dir + "/a.ppm");
  jdc::save_image(img, dn_dir + "/b.ppm");
  // c has no denoised counterpart
  auto res = jdc::build_ud_manifest(in_dir, dn_dir);
  CHECK(res.manifest.records.size() == 2);
  CHECK(res.warnings.size() == 1);
  std::set<std::string> scenes;
  for (const auto& r : res.manifest.records) {
    scenes.insert(r.scene_id);
    CHECK(r.is_pair());
  }
  CHECK(scenes == std::set<std::string>{"a", "b"});
}

TEST_CASE("batch composition: 4 noisy + 1 clean with clean targets") {
  const Manifest& m = scored_set();
  std::mt19937_64 rng(13);

  SUBCASE("JDC-CN") {
    auto mode = SupervisionMode::jdc_cn();
    auto pools = jdc::build_pools(m, mode, 32, 200);
    for (int i = 0; i < 10; ++i) {
      auto batch = jdc::sample_batch(mode, pools, 32, rng);
      REQUIRE(batch.inputs.size() == 5);
      int noisy = 0, clean = 0;
      for (auto tag : batch.tags) {
        if (tag == jdc::Provenance::kNoisyPaired) ++noisy;
        if (tag == jdc::Provenance::kCleanPaired) ++clean;
      }
      CHECK(noisy == 4);
      CHECK(clean == 1);
    }
  }
  SUBCASE("JDC-Cn(0.8) samples only crops scoring >= 0.8") {
    auto mode = SupervisionMode::jdc_cn_tau(0.8);
    auto pools = jdc::build_pools(m, mode, 32, 200);
    for (int i = 0; i < 10; ++i) {
      auto batch = jdc::sample_batch(mode, pools, 32, rng);
      for (size_t e = 0; e < batch.tags.size(); ++e)
        if (batch.tags[e] == jdc::Provenance::kNoisyPaired)
          CHECK(batch.scores[e] >= 0.8);
    }
  }
  SUBCASE("CompressionOnly uses clean input == target") {
    auto mode = SupervisionMode::compression_only();
    auto pools = jdc::build_pools(m, mode, 32, 200);
    auto batch = jdc::sample_batch(mode, pools, 32, rng);
    REQUIRE(batch.inputs.size() == 5);
    for (size_t e = 0; e < batch.inputs.size(); ++e)
      CHECK(batch.inputs[e].data == batch.targets[e].data);
  }
  SUBCASE("Testolina synthesizes noisy inputs over clean targets") {
    auto mode = SupervisionMode::testolina(0.04, 0.0016);
    auto pools = jdc::build_pools(m, mode, 32, 200);
    auto batch = jdc::sample_batch(mode, pools, 32, rng);
    for (size_t e = 0; e < batch.inputs.size(); ++e) {
      CHECK(batch.tags[e] == jdc::Provenance::kSynthetic);
      CHECK(batch.inputs[e].data != batch.targets[e].data);
    }
  }
}

TEST_CASE("targets are never noisy captures") {
  // structural check across modes: every target either comes from the clean
  // member or equals the clean crop
  const Manifest& m = scored_set();
  std::mt19937_64 rng(17);
  for (auto mode : {SupervisionMode::jdc_cn(), SupervisionMode::jdc_cn_tau(0.5),
                    SupervisionMode::jdc_n()}) {
    auto pools = jdc::build_pools(m, mode, 32, 200);
    auto batch = jdc::sample_batch(mode, pools, 32, rng);
    for (size_t e = 0; e < batch.inputs.size(); ++e) {
      if (batch.tags[e] != jdc::Provenance::kNoisyPaired) continue;
      // noisy-input elements must still have a cleaner target than input
      CHECK(batch.inputs[e].data != batch.targets[e].data);
    }
  }
}

TEST_CASE("synthetic scene set is deterministic and well-formed") {
  const std::string d1 = fresh_dir("jdc_ds_det1");
  const std::string d2 = fresh_dir("jdc_ds_det2");
  std::mt19937_64 r1(42), r2(42);
  Manifest m1 = jdc::make_synthetic_scene_set(2, 32, {{0.001, 0.002, 1600}}, r1, d1);
  Manifest m2 = jdc::make_synthetic_scene_set(2, 32, {{0.001, 0.002, 1600}}, r2, d2);
  REQUIRE(m1.records.size() == 4);  // clean-only + pair, per scene
  for (const auto& r : m1.records)
    CHECK(fs::exists(m1.resolve(r.clean_path)));
  ImageF32 a = jdc::load_image(m1.resolve(*m1.records[1].noisy_path));
  ImageF32 b = jdc::load_image(m2.resolve(*m2.records[1].noisy_path));
  CHECK(a.data == b.data);
  std::mt19937_64 r3(42);
  CHECK_THROWS_AS(jdc::make_synthetic_scene_set(1, 30, {}, r3, d1),
                  jdc::ConfigError);
}
