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

#include <random>
#include <vector>

#include "jdc/bitstream.hpp"
#include "jdc/metrics.hpp"

using jdc::CodecModel;
using jdc::ImageF32;

namespace {

jdc::CodecConfig tiny_cfg() {
  jdc::CodecConfig cfg;
  cfg.hidden_channels = 4;
  cfg.latent_channels = 4;
  return cfg;
}

ImageF32 random_image(int h, int w, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  ImageF32 img(3, h, w);
  for (auto& v : img.data) v = d(rng);
  return img;
}

}  // namespace

TEST_CASE("header serializes and parses losslessly") {
  jdc::JdcFile f;
  f.header.model_hash = 0x0123456789ABCDEFull;
  f.header.orig_w = 30;
  f.header.orig_h = 31;
  f.header.padded_w = 32;
  f.header.padded_h = 32;
  f.header.latent_c = 4;
  f.header.latent_h = 2;
  f.header.latent_w = 2;
  f.header.prior = 3;
  f.payload = {1, 2, 3, 4, 5};
  auto bytes = jdc::serialize_jdc(f);
  // little-endian spot checks: magic then version
  CHECK(bytes[0] == 'J');
  CHECK(bytes[3] == 'B');
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 0xEF);  // low byte of the hash first

  jdc::JdcFile back = jdc::parse_jdc(bytes);
  CHECK(back.header.model_hash == f.header.model_hash);
  CHECK(back.header.orig_w == 30);
  CHECK(back.header.orig_h == 31);
  CHECK(back.header.latent_c == 4);
  CHECK(back.header.prior == 3);
  CHECK(back.payload == f.payload);

  bytes[0] = 'X';
  CHECK_THROWS_AS(jdc::parse_jdc(bytes), jdc::DecodeError);
}

TEST_CASE("round trip preserves original dimensions (30x30 pads to 32)") {
  CodecModel m = jdc::make_model(tiny_cfg(), 3);
  ImageF32 img = random_image(30, 30, 7);
  jdc::CompressStats stats;
  auto bytes = jdc::compress(m, img, &stats);
  jdc::JdcFile f = jdc::parse_jdc(bytes);
  CHECK(f.header.orig_w == 30);
  CHECK(f.header.orig_h == 30);
  CHECK(f.header.padded_w == 32);
  CHECK(f.header.padded_h == 32);
  CHECK(f.header.latent_h == 2);
  CHECK(stats.file_bytes == bytes.size());

  ImageF32 rec = jdc::decompress(m, bytes);
  CHECK(rec.width == 30);
  CHECK(rec.height == 30);
  for (float v : rec.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("compression is deterministic") {
  CodecModel m = jdc::make_model(tiny_cfg(), 5);
  ImageF32 img = random_image(48, 64, 9);
  CHECK(jdc::compress(m, img) == jdc::compress(m, img));
}

TEST_CASE("latents survive transport losslessly") {
  // oracle: re-run the encoder side and compare against an rc_decode of the
  // payload using the same tables
  CodecModel m = jdc::make_model(tiny_cfg(), 11);
  ImageF32 img = random_image(32, 32, 13);
  auto bytes = jdc::compress(m, img);
  jdc::JdcFile f = jdc::parse_jdc(bytes);

  jdc::Tape t;
  jdc::ParamBinding bind(t);
  jdc::NodeId x = t.leaf({1, 3, 32, 32}, img.data);
  jdc::NodeId z = jdc::encode_analysis(t, x, m, bind);
  auto q = jdc::quantize_values(t.val(z));

  jdc::DensityEval d = jdc::DensityEval::from(m.priors[f.header.prior]);
  jdc::CdfTable table = jdc::build_cdf_tables(d);
  std::vector<const jdc::ChannelCdf*> tabs;
  const jdc::Shape zs = t.shape(z);
  for (int c = 0; c < zs.c; ++c)
    for (int p = 0; p < zs.h * zs.w; ++p)
      tabs.push_back(&table.channels[size_t(c)]);
  jdc::Bitstream bs;
  bs.bytes = f.payload;
  auto symbols = jdc::rc_decode(bs, tabs, q.size());
  REQUIRE(symbols.size() == q.size());
  for (size_t i = 0; i < q.size(); ++i) CHECK(float(symbols[i]) == q[i]);
}

TEST_CASE("wrong model is refused before any decoding") {
  CodecModel a = jdc::make_model(tiny_cfg(), 17);
  CodecModel b = jdc::make_model(tiny_cfg(), 18);
  ImageF32 img = random_image(32, 32, 19);
  auto bytes = jdc::compress(a, img);
  CHECK_THROWS_AS(jdc::decompress(b, bytes), jdc::ModelMismatch);
  CHECK_NOTHROW(jdc::decompress(a, bytes));
}

TEST_CASE("truncated or corrupted streams raise DecodeError") {
  CodecModel m = jdc::make_model(tiny_cfg(), 21);
  ImageF32 img = random_image(32, 48, 23);
  auto bytes = jdc::compress(m, img);

  auto cut = bytes;
  cut.pop_back();
  CHECK_THROWS_AS(jdc::decompress(m, cut), jdc::DecodeError);

  auto header_only = std::vector<uint8_t>(bytes.begin(), bytes.begin() + 10);
  CHECK_THROWS_AS(jdc::parse_jdc(header_only), jdc::DecodeError);

  auto bad_dims = bytes;
  bad_dims[14] = 77;  // orig_w low byte -> inconsistent with padded dims
  CHECK_THROWS_AS(jdc::decompress(m, bad_dims), jdc::DecodeError);
}

TEST_CASE("reported bpp matches the file size") {
  CodecModel m = jdc::make_model(tiny_cfg(), 25);
  ImageF32 img = random_image(30, 30, 27);
  jdc::CompressStats stats;
  auto bytes = jdc::compress(m, img, &stats);
  CHECK(jdc::bpp(stats.file_bytes, 30, 30) ==
        doctest::Approx(double(bytes.size()) * 8.0 / 900.0));
}
