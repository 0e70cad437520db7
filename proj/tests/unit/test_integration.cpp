// Copyright (c) 2026, The phrasegen Authors. All rights reserved.
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


#include <fstream>
#include <sstream>

#include "doctest_torch.hpp"

#include "phrasegen/common.hpp"
#include "phrasegen/pipeline.hpp"
#include "phrasegen/training.hpp"
#include "scratch.hpp"
#include "tiny_run.hpp"

using namespace phrasegen;
using phrasegen::testing::run_cli;
using phrasegen::testing::with_run;
namespace fs = std::filesystem;

namespace {

/// Dataset plus pretrained conditioning shared by every case in this suite.
struct TinyRun {
  testing::ScratchDir dir{"integration"};
  std::vector<std::string> global;
  fs::path pretrained;

  TinyRun() {
    global = testing::tiny_dataset(dir.path());
    pretrained = dir / "pretrained";
    REQUIRE(run_cli(with_run(global, pretrained, {"pretrain-text"})).code == 0);
    REQUIRE(run_cli(with_run(global, pretrained, {"pretrain-damsm"})).code == 0);
  }

  Config config() const {
    return load_config_file((dir / "tiny.json").string(), Config::desk());
  }

  /// Fresh run directory holding copies of the pretrained checkpoints.
  fs::path fresh_run(const std::string& name) const {
    const auto run = dir / name;
    fs::create_directories(run);
    fs::copy_file(RunPaths{pretrained}.text_encoder(), RunPaths{run}.text_encoder());
    fs::copy_file(RunPaths{pretrained}.phrase_damsm(), RunPaths{run}.phrase_damsm());
    return run;
  }
};

TinyRun& tiny() {
  static TinyRun run;
  return run;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

double max_parameter_difference(torch::nn::Module& a, torch::nn::Module& b) {
  auto pa = a.named_parameters();
  auto pb = b.named_parameters();
  double worst = 0.0;
  for (const auto& p : pa) worst = std::max(worst, (p.value() - pb[p.key()]).abs().max().item<double>());
  return worst;
}

}  // namespace

TEST_SUITE("integration") {
  TEST_CASE("train, generate and evaluate end to end") {
    auto& t = tiny();
    const auto run = t.fresh_run("e2e");
    auto train = run_cli(with_run(t.global, run, {"train"}));
    REQUIRE_MESSAGE(train.code == 0, train.err);
    CHECK(fs::exists(RunPaths{run}.latest()));
    CHECK(fs::exists(RunPaths{run}.step_checkpoint(2)));
    CHECK(fs::exists(RunPaths{run}.manifest("train")));
    const auto records = read_jsonl(RunPaths{run}.metrics());
    REQUIRE(records.size() == 4);
    for (const auto& r : records) {
      CHECK(std::isfinite(r["g_total"].get<double>()));
      CHECK(std::isfinite(r["d_total"].get<double>()));
    }

    const auto names = synthetic_category_names(5);
    const std::vector<std::string> gen{"generate", "--objects", names[0] + "," + names[2] + "," + names[3],
                                       "--caption", "a shape above another shape", "--seed", "11"};
    auto a = gen;
    a.insert(a.end(), {"--out", (t.dir / "gen_a").string()});
    auto b = gen;
    b.insert(b.end(), {"--out", (t.dir / "gen_b").string()});
    REQUIRE(run_cli(with_run(t.global, run, a)).code == 0);
    REQUIRE(run_cli(with_run(t.global, run, b)).code == 0);
    int compared = 0;
    for (const auto& e : fs::directory_iterator(t.dir / "gen_a")) {
      if (e.path().extension() != ".png") continue;
      CHECK(file_bytes(e.path()) == file_bytes(t.dir / "gen_b" / e.path().filename()));
      ++compared;
    }
    CHECK(compared >= 2);

    auto bad = run_cli(with_run(t.global, run, {"generate", "--objects", "dragon,circle", "--caption", "x"}));
    CHECK(bad.code == 1);
    CHECK(bad.err.find("error[data]") != std::string::npos);

    auto eval = run_cli(with_run(t.global, run, {"evaluate", "--n-images", "4", "--grid", "1"}));
    REQUIRE_MESSAGE(eval.code == 0, eval.err);
    CHECK(fs::exists(run / "eval_test.json"));
    CHECK(fs::exists(run / "samples_test.png"));
    const auto report = nlohmann::json::parse(file_bytes(run / "eval_test.json"));
    CHECK(report.contains("fid"));
    CHECK(report.contains("inception_score"));
  }

  TEST_CASE("resuming reproduces uninterrupted training") {
    auto& t = tiny();
    const auto straight = t.fresh_run("straight");
    const auto resumed = t.fresh_run("resumed");
    REQUIRE(run_cli(with_run(t.global, straight, {"train"})).code == 0);
    REQUIRE(run_cli(with_run(t.global, resumed, {"train", "--max-steps", "2"})).code == 0);
    REQUIRE(run_cli(with_run(t.global, resumed, {"train", "--resume"})).code == 0);
    CHECK(read_jsonl(RunPaths{resumed}.metrics()).size() == 4);

    const auto data_dir = t.dir / "data";
    Trainer a(t.config(), data_dir, straight);
    Trainer b(t.config(), data_dir, resumed);
    a.load_checkpoint(RunPaths{straight}.latest());
    b.load_checkpoint(RunPaths{resumed}.latest());
    CHECK(a.completed_steps() == 4);
    CHECK(b.completed_steps() == 4);
    CHECK(max_parameter_difference(*a.generator(), *b.generator()) < 1e-4);
    CHECK(max_parameter_difference(*a.discriminators(), *b.discriminators()) < 1e-4);
  }

  TEST_CASE("adversarial steps leave the conditioning untouched") {
    auto& t = tiny();
    Trainer trainer(t.config(), t.dir / "data", t.fresh_run("frozen"));
    auto& frozen = trainer.conditioning();
    const auto text = parameter_checksum(*frozen.scene->text);
    const auto ire = parameter_checksum(*frozen.scene->ire);
    const auto ige = parameter_checksum(*frozen.scene->ige);
    const auto region = parameter_checksum(*frozen.region);
    const auto trunk = frozen.backbones.vgg->checksum();
    const auto gen = parameter_checksum(*trainer.generator());
    for (std::int64_t s = 0; s < 2; ++s) trainer.step(s);
    CHECK(parameter_checksum(*frozen.scene->text) == text);
    CHECK(parameter_checksum(*frozen.scene->ire) == ire);
    CHECK(parameter_checksum(*frozen.scene->ige) == ige);
    CHECK(parameter_checksum(*frozen.region) == region);
    CHECK(frozen.backbones.vgg->checksum() == trunk);
    CHECK(parameter_checksum(*trainer.generator()) != gen);
  }
}
