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

#include "bornprior/backend.hpp"
#include "bornprior/errors.hpp"
#include "pool_stress.hpp"

namespace {

using namespace bornprior;
using pool_stress::decode;
using pool_stress::encoding_producer;
using pool_stress::kChunkRows;

Circuit test_circuit() {
  return Circuit{4,
                 {GateOp::rx(0, 1.1), GateOp::rx(1, 0.4), GateOp::xx(0, 2, 0.9), GateOp::rz(2, 0.3),
                  GateOp::rx(3, 2.2), GateOp::xx(1, 3, 1.3), GateOp::rx(2, 0.7), GateOp::xx(0, 1, 0.5)}};
}

double tv_distance(const std::vector<double>& p, const EmpiricalDistribution& q) {
  double d = 0;
  for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p[i] - q.frequency(i));
  return d / 2;
}

TEST(Backend, ShotsMatchesExactDistribution) {
  const auto c = test_circuit();
  const auto p = born_probabilities(simulate(c));
  SamplerBackend exact({BackendKind::exact, {}, {}});
  SamplerBackend shots({BackendKind::shots, {}, {}});
  const auto e = EmpiricalDistribution::from_batch(exact.draw(c, 1000000, 1));
  const auto s = EmpiricalDistribution::from_batch(shots.draw(c, 1000000, 2));
  EXPECT_LT(tv_distance(p, e), 0.01);
  EXPECT_LT(tv_distance(p, s), 0.01);
  EXPECT_EQ(shots.draw(c, 100, 5), shots.draw(c, 100, 5));
}

TEST(Backend, NoiselessNoisyBackendReducesToExact) {
  const auto c = test_circuit();
  const auto p = born_probabilities(simulate(c));
  SamplerBackend clean({BackendKind::noisy_shots, NoiseModel{0.0, 0.0, 0.0}, {}});
  const auto n = EmpiricalDistribution::from_batch(clean.draw(c, 100000, 3));
  for (std::size_t i = 0; i < p.size(); ++i)
    EXPECT_LE(std::abs(n.frequency(i) - p[i]), 5 * std::sqrt(p[i] * (1 - p[i]) / 1e5) + 1e-12);
}

TEST(Backend, ReadoutFlipRate) {
  Circuit c{1, {}};
  SamplerBackend b({BackendKind::noisy_shots, NoiseModel{0.0, 0.0, 0.05}, {}});
  const auto d = EmpiricalDistribution::from_batch(b.draw(c, 100000, 4));
  EXPECT_LE(std::abs(d.frequency(1) - 0.05), 5 * std::sqrt(0.05 * 0.95 / 1e5));
}

TEST(Backend, TwoQubitNoiseIsMonotone) {
  const auto c = test_circuit();
  const auto p = born_probabilities(simulate(c));
  std::vector<double> tv;
  for (double p2 : {0.0, 0.02, 0.04}) {
    SamplerBackend b({BackendKind::noisy_shots, NoiseModel{0.0, p2, 0.0}, {}});
    tv.push_back(tv_distance(p, EmpiricalDistribution::from_batch(b.draw(c, 200000, 6))));
  }
  EXPECT_LT(tv[0], tv[1]);
  EXPECT_LT(tv[1], tv[2]);
}

TEST(Backend, DefaultNoiseModelAndValidation) {
  const NoiseModel n;
  EXPECT_DOUBLE_EQ(n.p1, 0.0065);
  EXPECT_DOUBLE_EQ(n.p2, 0.0398);
  EXPECT_DOUBLE_EQ(n.readout, 0.007);
  EXPECT_THROW(SamplerBackend({BackendKind::noisy_shots, NoiseModel{-0.1, 0, 0}, {}}), ConfigError);
  SamplerBackend b({BackendKind::exact, {}, {}});
  EXPECT_THROW(b.draw(test_circuit(), 0, 1), ConfigError);
  EXPECT_THROW(parse_backend_kind("ionq"), ConfigError);
}

TEST(Backend, ReplayServesRecordedRowsInOrder) {
  const auto dir = std::filesystem::temp_directory_path() / "bornprior_replay";
  std::filesystem::create_directories(dir);
  const auto path = dir / "shots.txt";
  const auto c = test_circuit();
  const auto first = sample(simulate(c), 30, 1);
  auto rotated = sample(simulate(c), 20, 2);
  rotated.set_basis(Basis::post_rotated);
  const auto second = sample(simulate(c), 10, 3);
  write_replay(path, first, 0);
  write_replay(path, rotated, 0, true);
  write_replay(path, second, 1, true);

  SamplerBackend b({BackendKind::replay, {}, path});
  EXPECT_EQ(b.draw(c, 25, 99), first.slice(0, 25));
  auto mixed = first.slice(25, 5);
  mixed.append(second.slice(0, 5));
  EXPECT_EQ(b.draw(c, 10, 99), mixed);
  const auto rot = b.draw(c, 20, 99, Basis::post_rotated);
  EXPECT_EQ(rot.basis(), Basis::post_rotated);
  EXPECT_EQ(rot.slice(0, 20).data().size(), rotated.data().size());
  EXPECT_TRUE(std::equal(rot.data().begin(), rot.data().end(), rotated.data().begin()));
  EXPECT_THROW(b.draw(c, 6, 99), StateError);

  SamplerBackend fresh({BackendKind::replay, {}, path});
  EXPECT_THROW(fresh.draw(Circuit{3, {}}, 1, 0), ConfigError);

  {
    std::ofstream bad(dir / "bad.txt");
    bad << "0101\n";
  }
  EXPECT_THROW(SamplerBackend({BackendKind::replay, {}, dir / "bad.txt"}), ConfigError);
  {
    std::ofstream bad(dir / "bad2.txt");
    bad << "# basis=computational width=4\n010\n";
  }
  EXPECT_THROW(SamplerBackend({BackendKind::replay, {}, dir / "bad2.txt"}), ConfigError);
  EXPECT_THROW(SamplerBackend({BackendKind::replay, {}, dir / "none.txt"}), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Backend, MultibasisDrawMatchesDirectSampling) {
  AnsatzSpec spec;
  spec.n_qubits = 3;
  spec.basis_mode = BasisMode::trained;
  auto params = warm_start(spec);
  params.entangling_angles[0] = 0.4;
  params.basis_angles[1] = 0.3;
  SamplerBackend b({BackendKind::exact, {}, {}});
  EXPECT_EQ(draw_multibasis(b, spec, params, 200, 7), sample_multibasis(spec, params, 200, 7));
}

TEST(SamplePool, InlineFifoAndGenerationFence) {
  SamplePool pool(32, 256);
  EXPECT_THROW(pool.take(1), StateError);
  pool.advance(encoding_producer());
  EXPECT_EQ(pool.generation(), 1u);
  const auto a = pool.take(100);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto d = decode(a.index(i));
    EXPECT_EQ(d.generation, 1u);
    EXPECT_EQ(d.chunk * kChunkRows + d.offset, i);
  }
  EXPECT_EQ(pool.buffered(), 28u);
  pool.advance(encoding_producer());
  EXPECT_EQ(pool.discarded(), 28u);
  const auto b = pool.take(10);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(decode(b.index(i)).generation, 2u);
  EXPECT_EQ(decode(b.index(0)).chunk, 0u);
}

TEST(SamplePool, FailFastPolicy) {
  SamplePool pool(32, 64, TakePolicy::fail_fast);
  pool.advance(encoding_producer());
  EXPECT_THROW(pool.take(1), StateError);
  pool.refill(100);
  EXPECT_EQ(pool.buffered(), 128u);
  EXPECT_EQ(pool.take(128).size(), 128u);
  EXPECT_THROW(pool.take(1), StateError);
}

TEST(SamplePool, ProducerErrorsSurface) {
  SamplePool pool(32, 64);
  pool.advance([](std::uint64_t, std::uint64_t) -> SampleBatch { throw StateError("device offline"); });
  EXPECT_THROW(pool.take(1), StateError);
  pool.advance([](std::uint64_t, std::uint64_t) { return SampleBatch(5); });
  EXPECT_THROW(pool.take(1), StateError);
  EXPECT_THROW(SamplePool(0, 1), ConfigError);
}

TEST(SamplePool, BackgroundThreadServesIdenticalSequence) {
  SamplePool inline_pool(32, 200);
  SamplePool threaded(32, 200);
  inline_pool.advance(encoding_producer());
  threaded.advance(encoding_producer());
  threaded.start();
  EXPECT_TRUE(threaded.running());
  for (int step = 0; step < 200; ++step) {
    const std::size_t n = 1 + static_cast<std::size_t>(step % 37);
    ASSERT_EQ(inline_pool.take(n), threaded.take(n));
    if (step % 50 == 49) {
      threaded.stop();
      inline_pool.advance(encoding_producer());
      threaded.advance(encoding_producer());
      threaded.start();
    }
  }
  threaded.stop();
  EXPECT_FALSE(threaded.running());
}

TEST(SamplePool, ConcurrentStressHasNoCrossGenerationRows) {
  const auto t = pool_stress::run(100000, 3);
  EXPECT_EQ(t.cross_generation, 0u);
  EXPECT_EQ(t.order_breaks, 0u);
  EXPECT_GT(t.rows, 0u);
  EXPECT_GT(t.advances, 0u);
  RecordProperty("aborted_takes", static_cast<int>(t.aborted));
}

}  // namespace
