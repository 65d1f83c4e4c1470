// Copyright 2026 The hatformer Authors
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

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "hatformer/service/api.hpp"
#include "support/run_fixture.hpp"

namespace hatformer {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Output {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Output run(const std::string& args) {
  static const auto err_path = testing::scratch_dir("cli_stderr") / "stderr.txt";
  const std::string cmd = std::string(HATFORMER_CLI) + " " + args + " 2>" + err_path.string();
  Output o;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return o;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) o.out.append(buf, n);
  const int status = ::pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.err = slurp(err_path);
  return o;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

const fs::path kFixtures = fs::path(HATFORMER_TEST_FIXTURES) / "cli";

TEST(Cli, HelpOnEverySubcommand) {
  for (const char* sub : {"", "corpus", "backgrounds", "syngen", "blockproc", "tokenizer", "tokenizer train",
                          "tokenizer encode", "tokenizer decode", "tokenizer ratio", "score", "train", "recognize",
                          "serve"}) {
    const auto o = run(std::string(sub) + " --help");
    EXPECT_EQ(o.code, 0) << sub;
    EXPECT_NE(o.out.find("Usage"), std::string::npos) << sub;
  }
}

TEST(Cli, UsageErrorsExitTwoWithJson) {
  for (const char* args : {"", "score --no-such-flag", "frobnicate", "corpus --lang fr --out x", "train --stage 3"}) {
    const auto o = run(args);
    EXPECT_EQ(o.code, 2) << args;
    const auto j = json::parse(o.err);
    EXPECT_EQ(j["error"]["kind"], "usage") << args;
  }
}

TEST(Cli, RuntimeErrorsExitOne) {
  const auto dir = testing::scratch_dir("cli_runtime");
  std::ofstream(dir / "a.txt") << "x\ny\n";
  std::ofstream(dir / "b.txt") << "x\n";
  const auto o = run("score --ref " + q(dir / "a.txt") + " --pred " + q(dir / "b.txt"));
  EXPECT_EQ(o.code, 1);
  EXPECT_EQ(json::parse(o.err)["error"]["kind"], "validation_error");
  fs::remove_all(dir);
}

TEST(Cli, ScoreIdenticalFilesIsZero) {
  const auto dir = testing::scratch_dir("cli_identical");
  std::ofstream(dir / "ref.txt") << "قَالَ الرجل\nإلى المدينة\n\nكتاب\n";
  const auto o = run("score --ref " + q(dir / "ref.txt") + " --pred " + q(dir / "ref.txt"));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto j = json::parse(o.out);
  EXPECT_EQ(j["cer"], 0.0);
  EXPECT_EQ(j["errors"], 0);
  EXPECT_EQ(j["lines"], 4);
  fs::remove_all(dir);
}

// The command line and the HTTP handler must agree on every policy.
TEST(Cli, ScoreMatchesApiForAllPolicies) {
  const auto dir = testing::make_run_dir("cli_policies");
  service::RunStore store(dir);
  service::Api api(store);
  const char* flags[] = {"--collapse-ws", "--remove-diacritics", "--replace-nc", "--replace-wc"};
  const char* keys[] = {"collapse_whitespace", "remove_diacritics", "replace_without_context", "replace_with_context"};
  for (int mask = 0; mask < 16; ++mask) {
    std::string args = "score --records " + q(dir / "eval.jsonl");
    json policy = json::object();
    for (int b = 0; b < 4; ++b) {
      policy[keys[b]] = static_cast<bool>(mask & (1 << b));
      if (mask & (1 << b)) args += std::string(" ") + flags[b];
    }
    const auto o = run(args);
    ASSERT_EQ(o.code, 0) << o.err;
    const auto cli = json::parse(o.out);
    const auto web = json::parse(api.cer(json{{"policy", policy}}.dump()).body);
    EXPECT_EQ(cli["errors"], web["errors"]) << mask;
    EXPECT_EQ(cli["ref_chars"], web["ref_chars"]) << mask;
    EXPECT_EQ(cli["cer"].get<double>(), web["cer"].get<double>()) << mask;
  }
  fs::remove_all(dir);
}

TEST(Cli, RecognizeGolden) {
  const auto o = run("recognize --checkpoint " + q(kFixtures / "model.bin") + " --image " + q(kFixtures / "line.png") +
                     " --beam 3 --max-len 48");
  ASSERT_EQ(o.code, 0) << o.err;
  const auto j = json::parse(o.out);
  const auto golden = json::parse(slurp(kFixtures / "expected.json"));
  EXPECT_EQ(j["tokens"], golden["tokens"]);
  EXPECT_EQ(j["text"], golden["text"]);
  EXPECT_TRUE(j["finished"].get<bool>());
}

TEST(Cli, BlockprocRoundTrip) {
  const auto dir = testing::scratch_dir("cli_blockproc");
  const auto line = load_png(kFixtures / "line.png");
  auto o = run("blockproc --in " + q(kFixtures / "line.png") + " --out " + q(dir / "canvas.png"));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto meta = json::parse(slurp(dir / "canvas.json"));
  EXPECT_EQ(meta["schema"], "hatformer.canvas/1");
  o = run("blockproc --unpack --in " + q(dir / "canvas.png") + " --out " + q(dir / "strip.png"));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto back = load_png(dir / "strip.png");
  // The library round trip is exact; the PNG step quantizes to 8 bits.
  const auto expect = block_unpack(block_pack(line));
  ASSERT_EQ(back.width, expect.width);
  ASSERT_EQ(back.height, expect.height);
  for (std::size_t i = 0; i < back.pixels.size(); ++i) {
    ASSERT_NEAR(back.pixels[i], expect.pixels[i], 0.5f / 255.0f + 1e-6f) << i;
  }
  fs::remove_all(dir);
}

TEST(Cli, TokenizerEncodeDecode) {
  const auto text = "قَالَ الرجل";
  auto o = run("tokenizer encode --table " + q(kFixtures / "tokenizer.json") + " --text '" + text + "'");
  ASSERT_EQ(o.code, 0) << o.err;
  const auto encoded = json::parse(o.out);
  std::string ids;
  for (const auto& id : encoded["ids"]) ids += std::to_string(id.get<int>()) + ",";
  o = run("tokenizer decode --table " + q(kFixtures / "tokenizer.json") + " --ids " + ids);
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(json::parse(o.out)["text"], text);
  EXPECT_EQ(run("tokenizer decode --table " + q(kFixtures / "tokenizer.json") + " --ids 1,x").code, 1);
}

TEST(Cli, SyngenIsReproducible) {
  const auto dir = testing::scratch_dir("cli_syngen");
  for (const char* sub : {"a", "b"}) {
    const auto o = run("syngen --seed 3 --count 6 --max-words 3 --out " + q(dir / sub));
    ASSERT_EQ(o.code, 0) << o.err;
  }
  EXPECT_EQ(slurp(dir / "a" / "manifest.jsonl"), slurp(dir / "b" / "manifest.jsonl"));
  for (const auto& e : fs::directory_iterator(dir / "a" / "images")) {
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / "images" / e.path().filename()));
  }
  fs::remove_all(dir);
}

TEST(Cli, TrainRejectsMismatchedTokenizer) {
  const auto dir = testing::scratch_dir("cli_train");
  std::ofstream(dir / "cfg.json") << R"({"model": {"vocab_size": 300}})";
  ASSERT_EQ(run("syngen --seed 3 --count 4 --max-words 2 --out " + q(dir / "data")).code, 0);
  const auto o = run("train --stage 2 --data " + q(dir / "data" / "manifest.jsonl") + " --tokenizer " +
                     q(kFixtures / "tokenizer.json") + " --config " + q(dir / "cfg.json") + " --out " +
                     q(dir / "run"));
  EXPECT_EQ(o.code, 1);
  EXPECT_EQ(json::parse(o.err)["error"]["kind"], "config_error");
  fs::remove_all(dir);
}

}  // namespace
}  // namespace hatformer
