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

// End-to-end exercises of the jdc binary (exit codes, file outputs).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

const std::string kCli = JDC_CLI_PATH;
const std::string kConfigs = JDC_CONFIG_DIR;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string capture(const std::string& args) {
  const std::string out =
      (fs::temp_directory_path() / "jdc_cli_capture.txt").string();
  std::system((kCli + " " + args + " > " + out + " 2>&1").c_str());
  std::ifstream f(out);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

std::string fresh_dir(const std::string& name) {
  const std::string d = (fs::temp_directory_path() / name).string();
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<char> file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  return std::vector<char>(std::istreambuf_iterator<char>(f), {});
}

// one tiny shared pipeline: dataset -> scored manifest -> trained model
struct Pipeline {
  std::string data;
  std::string run;
  std::string manifest;
  std::string ckpt;
};

const Pipeline& pipeline() {
  static Pipeline p = [] {
    Pipeline q;
    q.data = fresh_dir("jdc_cli_data");
    q.run = fresh_dir("jdc_cli_run");
    REQUIRE(run("make-synthetic --out " + q.data +
                " --scenes 4 --size 32 --seed 11") == 0);
    REQUIRE(run("score-pairs --manifest " + q.data +
                "/manifest.jsonl --out " + q.data + "/scored.jsonl --crop 32") ==
            0);
    q.manifest = q.data + "/scored.jsonl";
    REQUIRE(run("train --manifest " + q.manifest + " --out " + q.run +
                " --mode compression-only --scale 2e-8 --crop 32 --hidden 4"
                " --latent 4 --seed 3") == 0);
    q.ckpt = q.run + "/ckpt_lambda256.jdcm";
    REQUIRE(fs::exists(q.ckpt));
    return q;
  }();
  return p;
}

}  // namespace

TEST_CASE("help exits 0, bad usage exits 2") {
  CHECK(run("--help") == 0);
  CHECK(run("compress --help") == 0);
  CHECK(run("") == 2);
  CHECK(run("bogus-subcommand") == 2);
  CHECK(run("compress --model x") == 2);  // missing required flags
}

TEST_CASE("missing data exits 3") {
  CHECK(run("score-pairs --manifest /nonexistent.jsonl --out /tmp/x.jsonl") ==
        3);
  const auto& p = pipeline();
  CHECK(run("compress --model " + p.ckpt +
            " --input /nonexistent.ppm --output /tmp/x.jdc") == 3);
  CHECK(run("compress --model /nonexistent.jdcm --input " + p.data +
            "/scene0_clean.ppm --output /tmp/x.jdc") == 3);
}

TEST_CASE("filter reports kept crops") {
  const auto& p = pipeline();
  const std::string out = capture("filter --manifest " + p.manifest +
                                  " --tau 0.5");
  CHECK(out.find("kept") != std::string::npos);
  CHECK(run("filter --manifest " + p.manifest + " --tau 0.5") == 0);
}

TEST_CASE("compress/decompress round trip through files") {
  const auto& p = pipeline();
  const std::string img = p.data + "/scene0_clean.ppm";
  const std::string jdc1 = p.run + "/a.jdc";
  const std::string jdc2 = p.run + "/b.jdc";
  REQUIRE(run("compress --model " + p.ckpt + " --input " + img + " --output " +
              jdc1) == 0);
  REQUIRE(run("compress --model " + p.ckpt + " --input " + img + " --output " +
              jdc2) == 0);
  CHECK(file_bytes(jdc1) == file_bytes(jdc2));  // deterministic

  const std::string rec = p.run + "/rec.ppm";
  REQUIRE(run("decompress --model " + p.ckpt + " --input " + jdc1 +
              " --output " + rec) == 0);
  CHECK(fs::exists(rec));

  // bpp report is 8*bytes/pixels against the original dims
  const std::string out = capture("compress --model " + p.ckpt + " --input " +
                                  img + " --output " + jdc1);
  const double expect = double(fs::file_size(jdc1)) * 8.0 / (32.0 * 32.0);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f bpp", expect);
  CHECK(out.find(buf) != std::string::npos);
}

TEST_CASE("decode failures exit 4 and write no image") {
  const auto& p = pipeline();
  const std::string img = p.data + "/scene0_clean.ppm";
  const std::string good = p.run + "/good.jdc";
  REQUIRE(run("compress --model " + p.ckpt + " --input " + img + " --output " +
              good) == 0);

  // truncate by one byte
  auto bytes = file_bytes(good);
  const std::string cut = p.run + "/cut.jdc";
  std::ofstream(cut, std::ios::binary)
      .write(bytes.data(), long(bytes.size()) - 1);
  const std::string out_img = p.run + "/should_not_exist.ppm";
  CHECK(run("decompress --model " + p.ckpt + " --input " + cut + " --output " +
            out_img) == 4);
  CHECK(!fs::exists(out_img));

  // wrong model
  const std::string other = p.run + "/ckpt_lambda512.jdcm";
  CHECK(run("decompress --model " + other + " --input " + good + " --output " +
            out_img) == 4);
  CHECK(!fs::exists(out_img));
}

TEST_CASE("eval and rd-curve emit the shared CSV schema") {
  const auto& p = pipeline();
  const std::string csv = p.run + "/eval.csv";
  REQUIRE(run("eval --model " + p.ckpt + " --manifest " + p.manifest +
              " --bucket-lo 0.0 --bucket-hi 1.0 --out " + csv) == 0);
  std::ifstream f(csv);
  std::string header;
  std::getline(f, header);
  CHECK(header == "codec,lambda,bpp,msssim,psnr");
  std::string row;
  CHECK(std::getline(f, row));
  CHECK(row.find("CompressionOnly") == 0);

  // empty bucket -> warning, empty csv body, still exit 0
  const std::string empty_csv = p.run + "/empty.csv";
  CHECK(run("eval --model " + p.ckpt + " --manifest " + p.manifest +
            " --bucket-lo 1.0 --bucket-hi 1.0 --out " + empty_csv) == 0);
  std::ifstream ef(empty_csv);
  std::string h2, extra;
  std::getline(ef, h2);
  CHECK(h2 == "codec,lambda,bpp,msssim,psnr");
  CHECK(!std::getline(ef, extra));

  const std::string prefix = p.run + "/rd";
  REQUIRE(run("rd-curve --models " + p.run + "/ckpt_lambda4096.jdcm " + p.run +
              "/ckpt_lambda256.jdcm --manifest " + p.manifest +
              " --bucket-lo 0.0 --bucket-hi 1.0 --out " + prefix) == 0);
  CHECK(fs::exists(prefix + ".csv"));
  CHECK(fs::exists(prefix + ".dat"));
  // rows sorted ascending in bpp within a codec
  std::ifstream rf(prefix + ".csv");
  std::getline(rf, header);
  double prev = -1.0;
  while (std::getline(rf, row)) {
    const auto c1 = row.find(',');
    const auto c2 = row.find(',', c1 + 1);
    const auto c3 = row.find(',', c2 + 1);
    const double bpp = std::stod(row.substr(c2 + 1, c3 - c2 - 1));
    CHECK(bpp >= prev);
    prev = bpp;
  }
}

TEST_CASE("count-macs prints totals and the reference ratio") {
  const std::string out = capture("count-macs --layers " + kConfigs +
                                  "/encoder_full.json --reference " + kConfigs +
                                  "/unet_reference.json");
  CHECK(out.find("GMac/MP") != std::string::npos);
  CHECK(out.find("ratio") != std::string::npos);
  CHECK(out.find("approximate") != std::string::npos);
  CHECK(run("count-macs --hidden 8 --latent 8") == 0);
}

TEST_CASE("external codec adapter degrades gracefully") {
  const auto& p = pipeline();
  // whether or not GraphicsMagick is installed, exit code must be 0
  CHECK(run("external --manifest " + p.manifest +
            " --bucket-lo 0.0 --bucket-hi 1.0 --qualities 30 90") == 0);
  CHECK(run("external --adapter nope --manifest " + p.manifest) == 3);
}

TEST_CASE("train rejects bad mode arguments via exit 3") {
  const auto& p = pipeline();
  CHECK(run("train --manifest " + p.manifest + " --out /tmp/jdc_cli_bad"
            " --mode jdc-cn-tau --tau 1.5 --scale 1e-8") == 3);
  CHECK(run("train --manifest " + p.manifest + " --out /tmp/jdc_cli_bad"
            " --mode nosuch --scale 1e-8") == 3);
}
