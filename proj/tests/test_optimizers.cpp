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

#include <atomic>
#include <cmath>
#include <cstdlib>

#include "bornprior/errors.hpp"
#include "bornprior/optimizers.hpp"
#include "bornprior/random.hpp"

namespace {

using namespace bornprior;

TEST(Spsa, GainSchedules) {
  SpsaGains g;
  EXPECT_DOUBLE_EQ(g.step_size(0), 0.05 / std::pow(11.0, 0.602));
  EXPECT_DOUBLE_EQ(g.step_size(9), 0.05 / std::pow(20.0, 0.602));
  EXPECT_DOUBLE_EQ(g.perturbation(0), 0.1);
  EXPECT_DOUBLE_EQ(g.perturbation(3), 0.1 / std::pow(4.0, 0.101));
  for (int k = 0; k < 100; ++k) {
    EXPECT_GT(g.step_size(k), g.step_size(k + 1));
    EXPECT_GT(g.perturbation(k), g.perturbation(k + 1));
  }
  SpsaGains bad = g;
  bad.alpha = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = g;
  bad.c = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Spsa, RademacherEntries) {
  const auto d = rademacher(10000, 3);
  double sum = 0;
  for (double x : d) {
    EXPECT_TRUE(x == 1.0 || x == -1.0);
    sum += x;
  }
  EXPECT_LT(std::abs(sum), 5 * std::sqrt(10000.0));
  EXPECT_EQ(rademacher(50, 8), rademacher(50, 8));
  EXPECT_NE(rademacher(50, 8), rademacher(50, 9));
}

TEST(Spsa, ExactlyTwoOracleCallsPerStep) {
  std::atomic<int> calls{0};
  LossOracle f = [&](std::span<const double> x, std::uint64_t) {
    ++calls;
    return x[0] * x[0];
  };
  std::vector<double> p{1.0, 2.0, 3.0};
  p = spsa_step(f, p, 0, SpsaGains{}, 1);
  EXPECT_EQ(calls.load(), 2);
  EXPECT_THROW(spsa_step(f, p, -1, SpsaGains{}, 1), ConfigError);
}

TEST(Spsa, GradientEstimateOnLinearFunction) {
  // For f(x) = g.x the estimate is (g.delta) / delta_i; it equals g exactly when
  // averaged over all sign patterns.
  const std::vector<double> g{0.5, -1.5, 2.0};
  LossOracle f = [&](std::span<const double> x, std::uint64_t) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += g[i] * x[i];
    return s;
  };
  const std::vector<double> x{0.1, 0.2, 0.3};
  std::vector<double> mean(3, 0.0);
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<double> delta(3);
    for (int i = 0; i < 3; ++i) delta[static_cast<std::size_t>(i)] = (mask >> i) & 1 ? 1.0 : -1.0;
    const auto est = spsa_gradient(f, x, delta, 0.1, 0);
    double gd = 0;
    for (int i = 0; i < 3; ++i) gd += g[static_cast<std::size_t>(i)] * delta[static_cast<std::size_t>(i)];
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(est.gradient[static_cast<std::size_t>(i)], gd / delta[static_cast<std::size_t>(i)], 1e-12);
      mean[static_cast<std::size_t>(i)] += est.gradient[static_cast<std::size_t>(i)] / 8.0;
    }
  }
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(mean[static_cast<std::size_t>(i)], g[static_cast<std::size_t>(i)], 1e-12);
}

TEST(Spsa, ConvergesOnQuadratic) {
  LossOracle f = [](std::span<const double> x, std::uint64_t) {
    double s = 0;
    for (double v : x) s += (v - 1.0) * (v - 1.0);
    return s;
  };
  SpsaGains gains;
  gains.a = 0.5;
  std::vector<double> p(6, 0.0);
  const double start = f(p, 0);
  for (int k = 0; k < 500; ++k) p = spsa_step(f, p, k, gains, derive_seed(4, "k", {static_cast<std::uint64_t>(k)}));
  EXPECT_LT(f(p, 0), 0.01 * start);
}

TEST(Spsa, StepDeterministicAndThreadIndependent) {
  LossOracle f = [](std::span<const double> x, std::uint64_t seed) {
    Rng rng(seed);
    return x[0] * x[0] + 0.5 * x[1] + 0.01 * uniform01(rng);
  };
  const std::vector<double> p{0.4, -0.2};
  ::setenv("BORNPRIOR_THREADS", "1", 1);
  const auto a = spsa_step(f, p, 3, SpsaGains{}, 77);
  ::setenv("BORNPRIOR_THREADS", "4", 1);
  const auto b = spsa_step(f, p, 3, SpsaGains{}, 77);
  ::unsetenv("BORNPRIOR_THREADS");
  EXPECT_EQ(a, b);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  AdamConfig cfg;
  std::vector<double> p{1.0, -1.0, 0.5};
  AdamState st(3, cfg);
  const std::vector<double> g{3.0, -0.01, 1e3};
  adam_step(st, p, g);
  EXPECT_NEAR(p[0], 1.0 - cfg.learning_rate, 1e-9);
  EXPECT_NEAR(p[1], -1.0 + cfg.learning_rate, 1e-9);
  EXPECT_NEAR(p[2], 0.5 - cfg.learning_rate, 1e-9);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, MatchesHandComputedRecursion) {
  AdamConfig cfg{0.01, 0.5, 0.9, 1e-8};
  AdamState st(1, cfg);
  std::vector<double> p{2.0};
  double m = 0, v = 0, x = 2.0;
  for (int t = 1; t <= 20; ++t) {
    const double g = 2 * x - std::sin(t);
    m = 0.5 * m + 0.5 * g;
    v = 0.9 * v + 0.1 * g * g;
    x -= 0.01 * (m / (1 - std::pow(0.5, t))) / (std::sqrt(v / (1 - std::pow(0.9, t))) + 1e-8);
    const std::vector<double> grad{2 * p[0] - std::sin(t)};
    adam_step(st, p, grad);
    EXPECT_NEAR(p[0], x, 1e-14);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  AdamState st(2, AdamConfig{});
  std::vector<double> p{0.3, 0.7};
  adam_step(st, p, std::vector<double>{0.0, 0.0});
  EXPECT_EQ(p, (std::vector<double>{0.3, 0.7}));
}

TEST(Adam, ShapeMismatchRejected) {
  AdamState st(2, AdamConfig{});
  std::vector<double> p{0.3, 0.7, 0.1};
  EXPECT_THROW(adam_step(st, p, std::vector<double>{0.0, 0.0, 0.0}), ConfigError);
}

TEST(Sgd, Step) {
  std::vector<double> p{1.0, 2.0};
  sgd_step(p, std::vector<double>{1.0, -2.0}, 0.1);
  EXPECT_DOUBLE_EQ(p[0], 0.9);
  EXPECT_DOUBLE_EQ(p[1], 2.2);
  EXPECT_THROW(sgd_step(p, std::vector<double>{1.0}, 0.1), ConfigError);
}

}  // namespace
