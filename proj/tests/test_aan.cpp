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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "bornprior/aan.hpp"
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

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::ifstream is(p);
  for (std::string line; std::getline(is, line);)
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

ImageDataset toy_images(int count) {
  ImageDataset d;
  d.count = count;
  d.height = 2;
  d.width = 2;
  const double patterns[3][4] = {{1, -1, 1, -1}, {-1, -1, 1, 1}, {0.5, 0.5, -0.5, -0.5}};
  for (int i = 0; i < count; ++i) {
    d.labels.push_back(i % 3);
    for (double v : patterns[i % 3]) d.pixels.push_back(v);
  }
  return d;
}

PriorConfig qcbm_prior(PriorKind kind, int n) {
  PriorConfig p;
  p.kind = kind;
  p.n_bits = n;
  p.layers = 2;
  p.topology = Topology::linear;
  return p;
}

TrainingConfig toy_training(const PriorConfig& prior, const fs::path& out) {
  TrainingConfig t;
  t.prior = prior;
  t.gan = gan_preset(Preset::toy, prior.sample_width(), {1, 2, 2});
  t.schedule.update_every_batches = 100;
  t.schedule.freeze_after_epochs = 10;
  t.schedule.prior_shots = 200;
  t.schedule.resample_pool_shots = 500;
  t.eval.inception_samples = 0;
  t.eval.grid_images = 4;
  t.batch_size = 2;
  t.epochs = 1;
  t.seed = 5;
  t.out_dir = out;
  t.checkpoints = false;
  return t;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("bornprior_aan_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Latent, BinarizeThreshold) {
  nn::Tensor a({2, 3}, std::vector<double>{0.5, 0.5000001, 0.1, 0.9, 0.0, 1.0});
  const auto b = binarize_latent(a);
  ASSERT_EQ(b.width(), 3);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b.row_string(0), "010");
  EXPECT_EQ(b.row_string(1), "101");
  EXPECT_THROW(binarize_latent(nn::Tensor({2, 1, 3})), ConfigError);
  EXPECT_THROW(binarize_latent(nn::Tensor({1, 1}, std::vector<double>{std::nan("")})), ConfigError);
}

TEST(Latent, ExtractionUsesEvalModeLatentLayer) {
  const auto cfg = gan_preset(Preset::desk, 8);
  auto gan = init_gan(cfg, 3);
  nn::Tensor images({4, 1, 14, 14});
  Rng rng(1);
  for (auto& v : images.values()) v = uniform01(rng) * 2 - 1;
  // Give batchnorm non-trivial running statistics first.
  gan.discriminator.forward(images, nn::Mode::train);
  const auto before = gan.discriminator.state();
  const auto z = extract_latent(cfg, gan.discriminator, images);
  EXPECT_EQ(z.shape(), (nn::Shape{4, 8}));
  for (double v : z.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_EQ(gan.discriminator.state(), before);
  EXPECT_EQ(extract_latent(cfg, gan.discriminator, images), z);
  // Same activations as the eval forward of the prefix network.
  const auto full = gan.discriminator.forward(images, nn::Mode::eval);
  EXPECT_EQ(full.cache.layers[cfg.latent_layer()].output, z);
  auto other = gan_preset(Preset::desk, 4);
  EXPECT_THROW(extract_latent(other, gan.discriminator, images), ConfigError);
}

TEST(PriorModel, WidthsAndWarmStartEntropy) {
  const BackendSpec exact;
  PriorModel q(qcbm_prior(PriorKind::qcbm, 8), exact, 1);
  EXPECT_EQ(q.width(), 8);
  EXPECT_NEAR(q.exact_entropy_bits(), 8.0, 1e-9);
  PriorModel o(qcbm_prior(PriorKind::qcbm_orthogonal, 8), exact, 1);
  EXPECT_EQ(o.width(), 16);
  EXPECT_NEAR(o.exact_entropy_bits(), 16.0, 1e-9);
  PriorModel t(qcbm_prior(PriorKind::qcbm_trained, 8), exact, 1);
  EXPECT_EQ(t.parameters().size(), 31u);
  EXPECT_EQ(t.sample(10, 2).width(), 16);
  PriorConfig rc;
  rc.kind = PriorKind::rbm;
  rc.n_bits = 8;
  PriorModel r(rc, exact, 1);
  EXPECT_EQ(r.rbm_params().n_hidden, 8);
  EXPECT_GT(r.exact_entropy_bits(), 7.99);
  PriorConfig bc;
  bc.kind = PriorKind::bernoulli_fixed;
  bc.n_bits = 16;
  PriorModel b(bc, exact, 1);
  EXPECT_TRUE(b.parameters().empty());
  EXPECT_EQ(b.exact_entropy_bits(), 16.0);
}

TEST(PriorUpdate, FrozenPriorIsRejectedAndUnchanged) {
  PriorModel p(qcbm_prior(PriorKind::qcbm_trained, 3), BackendSpec{}, 1);
  EmpiricalDistribution latent(6);
  latent.add(5, 10);
  p.freeze();
  const auto before = p.parameters();
  EXPECT_EQ(prior_update(p, latent, ScheduleConfig{}, 1), UpdateStatus::rejected_frozen);
  EXPECT_EQ(p.parameters(), before);
  EXPECT_EQ(p.spsa_iteration(), 0);
}

TEST(PriorUpdate, BernoulliIsNoop) {
  PriorConfig c;
  c.kind = PriorKind::bernoulli_fixed;
  c.n_bits = 4;
  PriorModel p(c, BackendSpec{}, 1);
  EXPECT_EQ(prior_update(p, EmpiricalDistribution(4), ScheduleConfig{}, 1), UpdateStatus::noop);
}

TEST(PriorUpdate, UniformLatentBarelyMovesWarmStart) {
  for (auto kind : {PriorKind::qcbm, PriorKind::qcbm_orthogonal, PriorKind::qcbm_trained}) {
    PriorModel p(qcbm_prior(kind, 4), BackendSpec{}, 1);
    EmpiricalDistribution latent(p.width());
    for (std::uint64_t i = 0; i < (std::uint64_t{1} << p.width()); ++i) latent.add(i, 3);
    for (int u = 0; u < 10; ++u) {
      const double before = p.exact_nll(latent);
      ASSERT_EQ(prior_update(p, latent, ScheduleConfig{}, static_cast<std::uint64_t>(u)), UpdateStatus::applied);
      EXPECT_LT(std::abs(p.exact_nll(latent) - before), 0.05);
    }
  }
}

TEST(PriorUpdate, DeltaLatentConcentratesQcbm) {
  PriorModel p(qcbm_prior(PriorKind::qcbm, 4), BackendSpec{}, 2);
  EmpiricalDistribution latent(4);
  const auto target = string_to_index("1011");
  latent.add(target, 100);
  double last = p.exact_distribution()[target];
  EXPECT_NEAR(last, 1.0 / 16, 1e-12);
  for (int u = 0; u < 400; ++u) {
    prior_update(p, latent, ScheduleConfig{}, static_cast<std::uint64_t>(u));
    if ((u + 1) % 50 == 0) {
      const double now = p.exact_distribution()[target];
      EXPECT_GT(now, last) << u;
      last = now;
    }
    // Default gains are slow: roughly 0.37 after 200 updates.
    if (u + 1 == 200) EXPECT_GT(p.exact_distribution()[target], 0.3);
  }
  EXPECT_EQ(p.spsa_iteration(), 400);
  EXPECT_GT(p.exact_distribution()[target], 0.5);
}

TEST(PriorUpdate, RbmRunsCdSteps) {
  PriorConfig c;
  c.kind = PriorKind::rbm;
  c.n_bits = 4;
  PriorModel p(c, BackendSpec{}, 1);
  EmpiricalDistribution latent(4);
  latent.add(string_to_index("1100"), 50);
  ScheduleConfig s;
  s.steps_per_update = 5;
  const auto before = p.parameters();
  EXPECT_EQ(prior_update(p, latent, s, 1), UpdateStatus::applied);
  EXPECT_NE(p.parameters(), before);
  EXPECT_THROW(prior_update(p, EmpiricalDistribution(5), s, 1), ConfigError);
}

TEST(PriorSnapshot, JsonRoundTrip) {
  PriorModel p(qcbm_prior(PriorKind::qcbm_trained, 3), BackendSpec{}, 1);
  EmpiricalDistribution latent(6);
  latent.add(7, 4);
  prior_update(p, latent, ScheduleConfig{}, 3);
  p.freeze();
  const auto q = prior_from_json(prior_to_json(p), BackendSpec{});
  EXPECT_EQ(q.parameters(), p.parameters());
  EXPECT_TRUE(q.frozen());
  EXPECT_EQ(q.kind(), PriorKind::qcbm_trained);
  EXPECT_THROW(prior_from_json("{\"kind\": \"qcbm\"}", BackendSpec{}), ConfigError);
}

TEST(RunTraining, CadenceOfSixEventsOnSixHundredBatches) {
  const auto out = scratch("cadence");
  const auto cfg = toy_training(qcbm_prior(PriorKind::qcbm, 2), out);
  const auto s = run_training(cfg, toy_images(1200), nullptr);
  EXPECT_EQ(s.batches_per_epoch, 600);
  EXPECT_EQ(s.update_events, 6);
  EXPECT_EQ(s.update_batches, (std::vector<std::int64_t>{100, 200, 300, 400, 500, 600}));
  const auto events = read_jsonl(out / "prior_events.jsonl");
  ASSERT_EQ(events.size(), 7u);
  EXPECT_EQ(events[0]["event"], "init");
  EXPECT_NEAR(events[0]["exact_entropy_bits"].get<double>(), 2.0, 1e-12);
  for (std::size_t i = 1; i < events.size(); ++i) {
    EXPECT_EQ(events[i]["event"], "update");
    EXPECT_EQ(events[i]["status"], "applied");
  }
  EXPECT_EQ(read_jsonl(out / "metrics.jsonl").size(), 600u);
  EXPECT_TRUE(fs::exists(out / "grid_epoch0.pgm"));
  EXPECT_TRUE(fs::exists(out / "grid_epoch1.pgm"));
  fs::remove_all(out);
}

TEST(RunTraining, HardwareCadenceAndFreeze) {
  const auto out = scratch("freeze");
  auto cfg = toy_training(qcbm_prior(PriorKind::qcbm_orthogonal, 1), out);
  cfg.schedule.update_every_batches = 600;
  cfg.schedule.freeze_after_epochs = 2;
  cfg.epochs = 4;
  cfg.checkpoints = true;
  const auto s = run_training(cfg, toy_images(1200), nullptr);
  EXPECT_EQ(s.update_events, 2);  // floor(2 * 600 / 600)
  EXPECT_EQ(s.update_batches, (std::vector<std::int64_t>{600, 1200}));
  EXPECT_EQ(s.freeze_epoch, 2);
  EXPECT_EQ(s.prior_parameters_at_freeze, s.final_prior_parameters);
  const auto events = read_jsonl(out / "prior_events.jsonl");
  EXPECT_EQ(events.back()["event"], "freeze");
  EXPECT_EQ(events.back()["epoch"], 2);
  for (int e = 1; e <= 4; ++e) {
    EXPECT_TRUE(fs::exists(out / "checkpoints" / ("generator_epoch" + std::to_string(e) + ".bpnn")));
    EXPECT_TRUE(fs::exists(out / "checkpoints" / ("prior_epoch" + std::to_string(e) + ".json")));
  }
  const auto snap = prior_from_json(slurp(out / "checkpoints" / "prior_epoch4.json"), BackendSpec{});
  EXPECT_TRUE(snap.frozen());
  EXPECT_EQ(snap.parameters(), s.final_prior_parameters);
  fs::remove_all(out);
}

TEST(RunTraining, CadenceCountMatchesFloorFormula) {
  for (int every : {7, 50, 130}) {
    const auto out = scratch("floor");
    auto cfg = toy_training(qcbm_prior(PriorKind::qcbm, 2), out);
    cfg.schedule.update_every_batches = every;
    cfg.schedule.freeze_after_epochs = 1;
    cfg.epochs = 2;
    cfg.eval.grid_images = 0;
    const auto s = run_training(cfg, toy_images(301), nullptr);
    EXPECT_EQ(s.batches_per_epoch, 150);
    EXPECT_EQ(s.update_events, 150 / every) << every;
    fs::remove_all(out);
  }
}

TEST(RunTraining, BernoulliIgnoresPriorModelFields) {
  const auto a_dir = scratch("bern_a");
  const auto b_dir = scratch("bern_b");
  PriorConfig pa;
  pa.kind = PriorKind::bernoulli_fixed;
  pa.n_bits = 4;
  PriorConfig pb = pa;
  pb.layers = 5;
  pb.topology = Topology::linear;
  pb.spsa.a = 0.9;
  pb.rbm.chains = 3;
  pb.latent_source = LatentSource::real_and_fake;
  auto ca = toy_training(pa, a_dir);
  auto cb = toy_training(pb, b_dir);
  cb.schedule.steps_per_update = 5;
  cb.schedule.prior_shots = 17;
  cb.backend.kind = BackendKind::noisy_shots;
  const auto sa = run_training(ca, toy_images(400), nullptr);
  const auto sb = run_training(cb, toy_images(400), nullptr);
  EXPECT_EQ(slurp(a_dir / "metrics.jsonl"), slurp(b_dir / "metrics.jsonl"));
  EXPECT_EQ(sa.update_events, 2);
  for (const auto& e : read_jsonl(a_dir / "prior_events.jsonl"))
    if (e["event"] == "update") EXPECT_EQ(e["status"], "noop");
  fs::remove_all(a_dir);
  fs::remove_all(b_dir);
}

TEST(RunTraining, PoolThreadDoesNotChangeResults) {
  const auto a_dir = scratch("inline");
  const auto b_dir = scratch("threaded");
  auto ca = toy_training(qcbm_prior(PriorKind::qcbm_trained, 2), a_dir);
  auto cb = toy_training(qcbm_prior(PriorKind::qcbm_trained, 2), b_dir);
  ca.schedule.update_every_batches = 30;
  cb.schedule.update_every_batches = 30;
  cb.pool_thread = true;
  run_training(ca, toy_images(400), nullptr);
  run_training(cb, toy_images(400), nullptr);
  EXPECT_EQ(slurp(a_dir / "metrics.jsonl"), slurp(b_dir / "metrics.jsonl"));
  EXPECT_EQ(slurp(a_dir / "prior_events.jsonl"), slurp(b_dir / "prior_events.jsonl"));
  fs::remove_all(a_dir);
  fs::remove_all(b_dir);
}

TEST(RunTraining, RbmPriorAccepted) {
  const auto out = scratch("rbm");
  PriorConfig p;
  p.kind = PriorKind::rbm;
  p.n_bits = 3;
  p.rbm.chains = 10;
  p.rbm.burn_in = 10;
  auto cfg = toy_training(p, out);
  cfg.schedule.update_every_batches = 50;
  const auto s = run_training(cfg, toy_images(400), nullptr);
  EXPECT_EQ(s.update_events, 4);
  EXPECT_EQ(s.entropy.size(), 5u);
  for (const auto& e : s.entropy) {
    EXPECT_GE(e.exact_bits, 0.0);
    EXPECT_LE(e.exact_bits, 3.0 + 1e-9);
  }
  fs::remove_all(out);
}

TEST(RunTraining, ConfigErrorsBeforeAnyStep) {
  const auto out = scratch("errors");
  auto cfg = toy_training(qcbm_prior(PriorKind::qcbm_trained, 2), out);
  cfg.gan = gan_preset(Preset::toy, 2, {1, 2, 2});  // prior width is 4
  EXPECT_THROW(run_training(cfg, toy_images(100), nullptr), ConfigError);
  cfg = toy_training(qcbm_prior(PriorKind::qcbm, 2), out);
  ImageDataset wrong = toy_images(100);
  wrong.height = 1;
  wrong.width = 4;
  EXPECT_THROW(run_training(cfg, wrong, nullptr), ConfigError);
  cfg.batch_size = 200;
  EXPECT_THROW(run_training(cfg, toy_images(100), nullptr), ConfigError);
  EXPECT_FALSE(fs::exists(out / "metrics.jsonl"));
  fs::remove_all(out);
}

}  // namespace
