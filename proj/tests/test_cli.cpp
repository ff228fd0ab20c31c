// Copyright 2026 The SOG Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "fixtures.hpp"
#include "sog/cli.hpp"

namespace sog {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

#ifndef SOG_CLI_PATH
#error "SOG_CLI_PATH must name the built command-line binary"
#endif

// Runs the real binary; returns its exit status.
int run_binary(const std::string& args) {
  const std::string cmd = std::string(SOG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// In-process run with captured streams.
int run(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "sog");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run_cli(int(argv.size()), argv.data(), o, e);
  if (out) *out = o.str() + e.str();
  return code;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> tree(const std::string& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path().string());
  return files;
}

// Shared small dataset and model for the read-side commands.
class CliFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    ASSERT_EQ(run({"gen", "--out", data(), "--count", "6", "--seed", "7"}), 0);
    ASSERT_EQ(run({"train", "--data", data(), "--out", model(), "--epochs", "2", "--seed", "1"}), 0);
  }
  static void TearDownTestSuite() { delete dir_; }
  static std::string data() { return *dir_ / "data"; }
  static std::string model() { return *dir_ / "model.json"; }
  static std::string scene() { return data() + "/" + scene_dir_name(2); }
  static TempDir* dir_;
};
TempDir* CliFixture::dir_ = nullptr;

TEST_F(CliFixture, GenIsByteIdenticalAcrossRunsAndJobs) {
  TempDir d("gen");
  ASSERT_EQ(run({"gen", "--out", d / "a", "--count", "6", "--seed", "7", "--jobs", "3"}), 0);
  ASSERT_EQ(run({"gen", "--out", d / "b", "--count", "6", "--seed", "7", "--jobs", "2"}), 0);
  const auto a = tree(d / "a");
  EXPECT_EQ(a, tree(d / "b"));
  EXPECT_EQ(a, tree(data()));
  EXPECT_TRUE(a.contains("manifest.json"));
}

TEST_F(CliFixture, GenRoundTripsThroughReader) {
  const Dataset ds = read_dataset(data());
  ASSERT_EQ(ds.records.size(), 6u);
  const auto fresh = make_dataset(ds.config, 6, 7);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(ds.records[i].scene.id_map, fresh[i].scene.id_map);
    EXPECT_EQ(ds.records[i].logits.patch_logits, fresh[i].logits.patch_logits);
    EXPECT_EQ(ds.records[i].detections.size(), fresh[i].detections.size());
  }
}

TEST_F(CliFixture, TrainIsByteIdenticalAndReportsEveryEpoch) {
  TempDir d("train");
  for (const char* name : {"m1.json", "m2.json"})
    ASSERT_EQ(run({"train", "--data", data(), "--out", d / name, "--epochs", "3", "--seed", "4",
                   "--jobs", "3", "--eval-data", data(), "--checkpoint-every", "2"}),
              0);
  EXPECT_EQ(slurp(d / "m1.json"), slurp(d / "m2.json"));
  EXPECT_EQ(slurp(d / "m1.json.report.json"), slurp(d / "m2.json.report.json"));
  const auto rep = read_json_file(d / "m1.json.report.json");
  ASSERT_EQ(rep["epochs"].size(), 3u);
  EXPECT_FALSE(rep["epochs"][2]["eval_oa"].is_null());
  EXPECT_FALSE(rep.contains("wall_seconds"));
  EXPECT_TRUE(fs::exists(d / "m1.json.epoch2"));
  EXPECT_NO_THROW(load_model(d / "m1.json.epoch2"));
}

TEST_F(CliFixture, EvalIsByteIdenticalAcrossJobs) {
  TempDir d("eval");
  ASSERT_EQ(run({"eval", "--data", data(), "--model", model(), "--report", d / "a.json"}), 0);
  ASSERT_EQ(run({"eval", "--data", data(), "--model", model(), "--report", d / "b.json", "--jobs", "4"}), 0);
  EXPECT_EQ(slurp(d / "a.json"), slurp(d / "b.json"));
  const auto j = read_json_file(d / "a.json");
  for (const char* k : {"mean_oa", "pq_sog", "pq_heuristic", "pq_prior"}) EXPECT_TRUE(j.contains(k)) << k;
}

TEST_F(CliFixture, FuseIsByteIdenticalForEveryMode) {
  TempDir d("fuse");
  { std::ofstream(d / "priors.json") << R"([["thing_0", "thing_1"], ["thing_2", "thing_3"]])"; }
  for (const std::string mode : {"sog", "heuristic", "prior"})
    for (const char* tag : {"a", "b"}) {
      std::vector<std::string> args{"fuse", "--scene", scene(), "--mode", mode, "--out",
                                    d / (mode + tag)};
      if (mode == "sog") args.insert(args.end(), {"--model", model()});
      if (mode == "prior") args.insert(args.end(), {"--priors", d / "priors.json"});
      ASSERT_EQ(run(args), 0) << mode;
    }
  for (const std::string mode : {"sog", "heuristic", "prior"})
    for (const char* ext : {".pgm", ".json", ".ppm"})
      EXPECT_EQ(slurp(d / (mode + "a" + ext)), slurp(d / (mode + "b" + ext))) << mode << ext;
}

TEST_F(CliFixture, FuseWithZeroedFinalLayerIsZeroOverlapPipeline) {
  TempDir d("zero");
  LoadedModel lm = load_model(model());
  lm.model.params.value("w_fc").fill(0.0);
  lm.model.params.value("b_fc").fill(0.0);
  save_model(d / "zero.json", lm.model, lm.head);
  ASSERT_EQ(run({"fuse", "--scene", scene(), "--model", d / "zero.json", "--out", d / "got"}), 0);

  const SceneRecord rec = read_scene_dir(scene());
  FusionConfig fc;
  fc.head = lm.head.head;
  fc.k = lm.head.k;
  const auto in = fusion_input(rec.scene, rec.logits);
  const auto kept = nms_like(confidence_filter(rec.detections, fc.p_min), fc.nms_threshold,
                             in.height, in.width);
  const std::size_t n = kept.size();
  cli::write_panoptic(d / "want", sog_fuse_with_overlap(kept, Tensor({n, n}), in, fc));
  for (const char* ext : {".pgm", ".json", ".ppm"})
    EXPECT_EQ(slurp(d / ("got" + std::string(ext))), slurp(d / ("want" + std::string(ext))));
}

TEST_F(CliFixture, ExportWritesHeatmapsAndTensors) {
  TempDir d("export");
  ASSERT_EQ(run({"export", "--scene", scene(), "--model", model(), "--out", d / "x"}), 0);
  const SceneRecord rec = read_scene_dir(scene());
  const Tensor rs = read_tensor(d / "x_Rstar.sogt");
  EXPECT_EQ(rs, scene_rstar(rec.scene));
  const Tensor o = read_tensor(d / "x_O.sogt");
  EXPECT_EQ(o, scene_overlap(load_model(model()).model, rec.scene));
  const auto img = detail::read_pnm(d / "x_R.ppm", "P6");
  EXPECT_EQ(img.w, rec.scene.size() * 16);
  std::vector<Mask> amodal;
  for (const auto& inst : rec.scene.instances) amodal.push_back(inst.amodal);
  const Tensor r = sym_relation(amodal);
  for (std::size_t i = 0; i < r.dim(0); ++i)
    for (std::size_t j = 0; j < r.dim(1); ++j) {
      const std::size_t px = (i * 16 + 8) * img.w + j * 16 + 8;
      EXPECT_EQ(img.bytes[img.data_offset + 3 * px], r.at(i, j) == 1.0 ? 255 : 0);
    }
}

TEST_F(CliFixture, SelfCheckPasses) {
  TempDir d("self");
  std::string out;
  EXPECT_EQ(run({"train", "--data", data(), "--out", d / "m.json", "--epochs", "1", "--self-check"}, &out), 0);
  EXPECT_NE(out.find("self-check"), std::string::npos);
}

// ---------------------------------------------------------------------------

TEST_F(CliFixture, ExitCodes) {
  EXPECT_EQ(run_binary("--help"), 0);
  EXPECT_EQ(run_binary(""), 1);
  EXPECT_EQ(run_binary("gen --out /tmp/x --count 2 --bogus"), 1);
  EXPECT_EQ(run_binary("frobnicate"), 1);
  EXPECT_EQ(run_binary("train --data " + data() + " --out /tmp/m --mode nonsense"), 1);
  EXPECT_EQ(run_binary("train --data " + data() + " --out /tmp/m --epochs 0"), 1);
  EXPECT_EQ(run_binary("fuse --scene " + scene() + " --mode sog --out /tmp/f"), 1);
  EXPECT_EQ(run_binary("eval --data /nonexistent/dir --model " + model() + " --report /tmp/r"), 2);
  TempDir d("codes");
  { std::ofstream(d / "bad.json") << "{not json"; }
  EXPECT_EQ(run_binary("eval --data " + data() + " --model " + (d / "bad.json") + " --report " +
                       (d / "r.json")),
            2);
  EXPECT_EQ(run_binary("train --data " + data() + " --out " + (d / "m.json") +
                       " --epochs 2 --lr 1e200 --grad-clip 0"),
            3);
}

TEST(Priors, ParsesThingNames) {
  TempDir d("priors");
  { std::ofstream(d / "p.json") << R"([["thing_3", "thing_0"]])"; }
  const auto p = cli::read_priors(d / "p.json", 4);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0], (std::pair<std::size_t, std::size_t>{3, 0}));
  EXPECT_THROW(cli::parse_thing_name("thing_4", 4), ParseError);
  EXPECT_THROW(cli::parse_thing_name("person", 4), ParseError);
  EXPECT_THROW(cli::parse_thing_name("thing_", 4), ParseError);
  { std::ofstream(d / "self.json") << R"([["thing_1", "thing_1"]])"; }
  EXPECT_THROW(cli::read_priors(d / "self.json", 4), ParseError);
  { std::ofstream(d / "obj.json") << R"({"a": 1})"; }
  EXPECT_THROW(cli::read_priors(d / "obj.json", 4), ParseError);
}

}  // namespace
}  // namespace sog
