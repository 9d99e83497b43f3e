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

#ifndef BORNPRIOR_RBM_HPP
#define BORNPRIOR_RBM_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "bornprior/bits.hpp"
#include "bornprior/random.hpp"

namespace bornprior {

/// Binary RBM with energy E(v, h) = -b.v - c.h - v^T W h.
struct RbmParams {
  int n_visible = 0;
  int n_hidden = 0;
  std::vector<double> weights;  // n_visible x n_hidden, row-major
  std::vector<double> visible_bias;
  std::vector<double> hidden_bias;

  static RbmParams zeros(int n_visible, int n_hidden);
  /// Weights ~ N(0, stddev^2), zero biases.
  static RbmParams random(int n_visible, int n_hidden, double stddev, std::uint64_t seed);

  double weight(int i, int j) const { return weights[static_cast<std::size_t>(i * n_hidden + j)]; }
  void validate() const;

  std::vector<double> flatten() const;  // weights, visible bias, hidden bias
  static RbmParams unflatten(int n_visible, int n_hidden, std::span<const double> flat);
  bool operator==(const RbmParams&) const = default;
};

double energy(const RbmParams& params, std::span<const std::uint8_t> visible, std::span<const std::uint8_t> hidden);
/// F(v) = -b.v - sum_j softplus(c_j + (v^T W)_j), so q(v) = exp(-F(v)) / Z.
double free_energy(const RbmParams& params, std::span<const std::uint8_t> visible);
/// ln Z by summing exp(-F(v)) over all visible states.
double log_partition_function(const RbmParams& params);

inline constexpr int kMaxRbmEnumerationUnits = 20;

/// Exact marginal q(v) over all 2^n_visible states (n_visible + n_hidden <= 20).
std::vector<double> exact_visible_distribution(const RbmParams& params);

/// P(h_j = 1 | v) and P(v_i = 1 | h).
std::vector<double> hidden_probabilities(const RbmParams& params, std::span<const std::uint8_t> visible);
std::vector<double> visible_probabilities(const RbmParams& params, std::span<const std::uint8_t> hidden);

/// One block Gibbs sweep v -> h -> v'.
std::vector<std::uint8_t> gibbs_step(const RbmParams& params, std::span<const std::uint8_t> visible, Rng& rng);
std::vector<std::uint8_t> gibbs_step(const RbmParams& params, std::span<const std::uint8_t> visible,
                                     std::uint64_t seed);

/// Samples from `chains` free-running chains started at uniformly random
/// states; each chain is burned in, then contributes consecutive states.
SampleBatch rbm_sample(const RbmParams& params, std::size_t count, std::size_t chains, int burn_in,
                       std::uint64_t seed);

/// CD-k gradient of the negative log-likelihood (flattened layout), averaged over the batch.
std::vector<double> cd_gradient(const RbmParams& params, const SampleBatch& data, int k, Rng& rng);

/// One CD-k update applied with plain SGD.
void cd_update(RbmParams& params, const SampleBatch& data, int k, double step_size, std::uint64_t seed);

}  // namespace bornprior

#endif
