// Copyright 2026 The bornprior Authors
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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "bornprior/config.hpp"
#include "bornprior/errors.hpp"

namespace {

using namespace bornprior;
namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("bornprior_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct CliResult {
  int code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
  const auto log = dir / "cli.log";
  const std::string cmd = std::string(BORNPRIOR_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = slurp(log);
  return r;
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j) {
  const auto p = dir / "config.in.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

nlohmann::json toy_run(const fs::path& out) {
  return {{"version", 1},
          {"seed", 11},
          {"epochs", 1},
          {"batch_size", 10},
          {"preset", "toy"},
          {"out_dir", out.string()},
          {"dataset", {{"limit", 200}}},
          {"prior", {{"kind", "qcbm"}, {"n_bits", 4}, {"layers", 1}}},
          {"schedule", {{"update_every_batches", 5}, {"prior_shots", 100}, {"resample_pool_shots", 200}}},
          {"eval", {{"inception_samples", 0}, {"grid_images", 4}}}};
}

TEST(Config, MinimalDocumentKeepsDefaults) {
  const auto c = parse_run_config(R"({"version": 1})");
  const RunConfig d;
  EXPECT_EQ(dump_run_config(c), dump_run_config(d));
  EXPECT_EQ(c.batch_size, 50);
  EXPECT_EQ(c.schedule.update_every_batches, 100);
  EXPECT_EQ(c.schedule.freeze_after_epochs, 10);
  EXPECT_EQ(c.schedule.prior_shots, 1000);
  EXPECT_DOUBLE_EQ(c.gan.generator_lr, 2e-4);
  EXPECT_DOUBLE_EQ(c.prior.spsa.a, 0.05);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsUnknownKeysAtAnyDepth) {
  EXPECT_THROW(parse_run_config(R"({"version": 1, "sed": 3})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"version": 1, "prior": {"kinds": "rbm"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"version": 1, "schedule": {"update_every": 5}})"), ConfigError);
}

TEST(Config, RequiresSupportedVersion) {
  EXPECT_THROW(parse_run_config(R"({"seed": 1})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"version": 2})"), ConfigError);
  EXPECT_THROW(parse_run_config("not json"), ConfigError);
}

TEST(Config, RejectsWrongTypesAndEnums) {
  EXPECT_THROW(parse_run_config(R"({"version": 1, "epochs": "three"})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"version": 1, "prior": {"kind": "boltzmann"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"version": 1, "preset": "huge"})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"version": 1, "prior": 4})"), ConfigError);
}

TEST(Config, DumpParseRoundTrip) {
  RunConfig c;
  c.seed = 77;
  c.epochs = 3;
  c.preset = Preset::toy;
  c.prior.kind = PriorKind::rbm;
  c.prior.n_bits = 6;
  c.prior.rbm.hidden = 3;
  c.schedule.update_every_batches = 600;
  c.backend.kind = BackendKind::noisy_shots;
  c.backend.noise.p2 = 0.02;
  c.eval.inception_samples = 123;
  c.stability.steps_per_update = {2, 3};
  const auto text = dump_run_config(c);
  EXPECT_EQ(dump_run_config(parse_run_config(text)), text);
}

TEST(Config, ValidationCatchesBadValues) {
  auto c = parse_run_config(R"({"version": 1, "epochs": 0})");
  EXPECT_THROW(c.validate(), ConfigError);
  c = parse_run_config(R"({"version": 1, "prior": {"n_bits": 0}})");
  EXPECT_THROW(c.validate(), ConfigError);
  c = parse_run_config(R"({"version": 1, "qcbm_task": {"oracle": "magic"}})");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, TrainingConfigFollowsPreset) {
  RunConfig c;
  c.preset = Preset::toy;
  c.prior.kind = PriorKind::qcbm_trained;
  c.prior.n_bits = 3;
  const auto t = c.training_config();
  EXPECT_EQ(t.gan.prior_dim, 6);
  EXPECT_EQ(t.gan.image_shape, (nn::Shape{1, 4, 4}));
  EXPECT_EQ(preset_downsample(Preset::desk), 2);
}

TEST(Cli, HelpListsSubcommandsAndFlags) {
  const auto dir = scratch("help");
  auto r = run_cli("--help", dir);
  EXPECT_EQ(r.code, 0);
  for (const char* s : {"train-qcbm", "train-gan", "train-aan", "eval-is", "stability"})
    EXPECT_NE(r.output.find(s), std::string::npos) << s;
  r = run_cli("train-aan --help", dir);
  for (const char* s : {"--config", "--seed", "--out", "--epochs", "--preset"})
    EXPECT_NE(r.output.find(s), std::string::npos) << s;
  EXPECT_NE(run_cli("", dir).code, 0);
  EXPECT_NE(run_cli("train-aan --preset huge", dir).code, 0);
}

TEST(Cli, MissingDatasetFails) {
  const auto dir = scratch("missing");
  auto j = toy_run(dir / "out");
  j["dataset"] = {{"images", (dir / "nope.idx").string()}, {"labels", (dir / "nope2.idx").string()}};
  const auto r = run_cli("train-gan --quiet --config " + write_config(dir, j).string(), dir);
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(fs::exists(dir / "out" / "metrics.jsonl"));
}

TEST(Cli, ZeroPriorWidthIsConfigError) {
  const auto dir = scratch("zero");
  auto j = toy_run(dir / "out");
  j["prior"]["n_bits"] = 0;
  EXPECT_EQ(run_cli("train-gan --quiet --config " + write_config(dir, j).string(), dir).code, 2);
}

TEST(Cli, TrainQcbmWritesReport) {
  const auto dir = scratch("qcbm");
  const nlohmann::json j{{"version", 1},
                         {"prior", {{"layers", 2}, {"topology", "linear"}}},
                         {"qcbm_task", {{"steps", 20}}}};
  const auto r =
      run_cli("train-qcbm --seed 3 --out " + (dir / "out").string() + " --config " + write_config(dir, j).string(), dir);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto report = nlohmann::json::parse(slurp(dir / "out" / "qcbm_report.json"));
  EXPECT_EQ(report["n_qubits"], 4);
  EXPECT_EQ(report["parameters"], param_count(AnsatzSpec{4, 2, Topology::linear, BasisMode::none}));
  EXPECT_EQ(report["steps"], 20);
  EXPECT_TRUE(fs::exists(dir / "out" / "qcbm_curve.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "out" / "config.json"));
}

TEST(Cli, TrainRunsAreReproducible) {
  const auto dir = scratch("repro");
  const auto cfg = write_config(dir, toy_run(dir / "unused"));
  for (const char* run : {"a", "b"}) {
    const auto r = run_cli("train-aan --quiet --config " + cfg.string() + " --out " + (dir / run).string(), dir);
    ASSERT_EQ(r.code, 0) << r.output;
  }
  EXPECT_EQ(slurp(dir / "a" / "metrics.jsonl"), slurp(dir / "b" / "metrics.jsonl"));
  EXPECT_EQ(slurp(dir / "a" / "prior_events.jsonl"), slurp(dir / "b" / "prior_events.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "a" / "grid_epoch1.pgm"));
  const auto resolved = load_run_config(dir / "a" / "config.json");
  EXPECT_EQ(resolved.out_dir, dir / "a");
  EXPECT_EQ(resolved.prior.n_bits, 4);
}

TEST(Cli, EvalIsRejectsZeroSamples) {
  const auto dir = scratch("evalis");
  const auto r = run_cli("eval-is --samples 0 --real --classifier x.bpnn --out " + dir.string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("sample"), std::string::npos);
}

}  // namespace
