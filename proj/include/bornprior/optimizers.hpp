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

#ifndef BORNPRIOR_OPTIMIZERS_HPP
#define BORNPRIOR_OPTIMIZERS_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace bornprior {

/// Gain sequences a_k = a / (k + 1 + A)^alpha and c_k = c / (k + 1)^gamma.
struct SpsaGains {
  double a = 0.05;
  double c = 0.1;
  double stability = 10.0;  // A
  double alpha = 0.602;
  double gamma = 0.101;

  void validate() const;
  double step_size(int k) const;
  double perturbation(int k) const;
};

/// Noisy objective. The seed lets stochastic oracles stay pure, so the two
/// evaluations of one step may run concurrently.
using LossOracle = std::function<double(std::span<const double> params, std::uint64_t seed)>;

struct SpsaEstimate {
  std::vector<double> gradient;
  std::vector<double> delta;  // Rademacher perturbation
  double loss_plus = 0.0;
  double loss_minus = 0.0;
};

/// Two-sided simultaneous-perturbation estimate with the given perturbation
/// vector (entries +-1) and scale. Exactly two oracle calls.
SpsaEstimate spsa_gradient(const LossOracle& oracle, std::span<const double> params, std::span<const double> delta,
                           double scale, std::uint64_t seed);

/// One SPSA iteration k >= 0; returns the updated parameters.
std::vector<double> spsa_step(const LossOracle& oracle, std::span<const double> params, int k,
                              const SpsaGains& gains, std::uint64_t seed);

/// Rademacher +-1 vector drawn from `seed`.
std::vector<double> rademacher(std::size_t n, std::uint64_t seed);

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamState() = default;
  AdamState(std::size_t n, AdamConfig config) : m(n, 0.0), v(n, 0.0), cfg(config) {}

  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  AdamConfig cfg;
};

/// Bias-corrected Adam update applied in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

/// params <- params - step_size * grads.
void sgd_step(std::span<double> params, std::span<const double> grads, double step_size);

}  // namespace bornprior

#endif
