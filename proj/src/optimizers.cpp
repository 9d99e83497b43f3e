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

#include "bornprior/optimizers.hpp"

#include <cmath>
#include <future>

#include "bornprior/errors.hpp"
#include "bornprior/random.hpp"
#include "bornprior/threads.hpp"

namespace bornprior {

void SpsaGains::validate() const {
  if (!(a > 0.0) || !(c > 0.0)) throw ConfigError("SPSA gains a and c must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0) || !(gamma > 0.0 && gamma <= 1.0)) {
    throw ConfigError("SPSA exponents must lie in (0, 1]");
  }
  if (stability < 0.0) throw ConfigError("SPSA stability constant must be >= 0");
}

double SpsaGains::step_size(int k) const { return a / std::pow(k + 1 + stability, alpha); }

double SpsaGains::perturbation(int k) const { return c / std::pow(k + 1, gamma); }

std::vector<double> rademacher(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> d(n);
  for (double& x : d) x = (rng() >> 63) ? 1.0 : -1.0;
  return d;
}

SpsaEstimate spsa_gradient(const LossOracle& oracle, std::span<const double> params, std::span<const double> delta,
                           double scale, std::uint64_t seed) {
  if (delta.size() != params.size()) throw ConfigError("perturbation length mismatch");
  std::vector<double> plus(params.begin(), params.end());
  std::vector<double> minus(params.begin(), params.end());
  for (std::size_t i = 0; i < params.size(); ++i) {
    plus[i] += scale * delta[i];
    minus[i] -= scale * delta[i];
  }
  const std::uint64_t seed_plus = derive_seed(seed, "spsa+");
  const std::uint64_t seed_minus = derive_seed(seed, "spsa-");
  SpsaEstimate est;
  if (thread_budget() > 1) {
    auto fut = std::async(std::launch::async, [&] { return oracle(plus, seed_plus); });
    est.loss_minus = oracle(minus, seed_minus);
    est.loss_plus = fut.get();
  } else {
    est.loss_plus = oracle(plus, seed_plus);
    est.loss_minus = oracle(minus, seed_minus);
  }
  const double diff = est.loss_plus - est.loss_minus;
  est.gradient.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) est.gradient[i] = diff / (2.0 * scale * delta[i]);
  est.delta.assign(delta.begin(), delta.end());
  return est;
}

std::vector<double> spsa_step(const LossOracle& oracle, std::span<const double> params, int k,
                              const SpsaGains& gains, std::uint64_t seed) {
  if (k < 0) throw ConfigError("SPSA iteration index must be >= 0");
  gains.validate();
  const auto delta = rademacher(params.size(), derive_seed(seed, "delta"));
  const auto est = spsa_gradient(oracle, params, delta, gains.perturbation(k), derive_seed(seed, "eval"));
  const double ak = gains.step_size(k);
  std::vector<double> out(params.begin(), params.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= ak * est.gradient[i];
  return out;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ConfigError("Adam: parameter, gradient and moment shapes disagree");
  }
  const auto& cfg = state.cfg;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

void sgd_step(std::span<double> params, std::span<const double> grads, double step_size) {
  if (params.size() != grads.size()) throw ConfigError("SGD: parameter and gradient shapes disagree");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= step_size * grads[i];
}

}  // namespace bornprior
