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

#include "bornprior/rbm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bornprior/errors.hpp"
#include "bornprior/optimizers.hpp"

namespace bornprior {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void check_visible(const RbmParams& p, std::span<const std::uint8_t> v) {
  if (static_cast<int>(v.size()) != p.n_visible) throw ConfigError("visible vector length mismatch");
}

}  // namespace

RbmParams RbmParams::zeros(int n_visible, int n_hidden) {
  if (n_visible < 1 || n_hidden < 1) throw ConfigError("RBM layer sizes must be >= 1");
  RbmParams p;
  p.n_visible = n_visible;
  p.n_hidden = n_hidden;
  p.weights.assign(static_cast<std::size_t>(n_visible * n_hidden), 0.0);
  p.visible_bias.assign(static_cast<std::size_t>(n_visible), 0.0);
  p.hidden_bias.assign(static_cast<std::size_t>(n_hidden), 0.0);
  return p;
}

RbmParams RbmParams::random(int n_visible, int n_hidden, double stddev, std::uint64_t seed) {
  RbmParams p = zeros(n_visible, n_hidden);
  Rng rng(seed);
  for (double& w : p.weights) w = stddev * standard_normal(rng);
  return p;
}

void RbmParams::validate() const {
  if (n_visible < 1 || n_hidden < 1) throw ConfigError("RBM layer sizes must be >= 1");
  if (weights.size() != static_cast<std::size_t>(n_visible * n_hidden) ||
      visible_bias.size() != static_cast<std::size_t>(n_visible) ||
      hidden_bias.size() != static_cast<std::size_t>(n_hidden)) {
    throw ConfigError("RBM parameter shapes are inconsistent");
  }
}

std::vector<double> RbmParams::flatten() const {
  std::vector<double> flat(weights);
  flat.insert(flat.end(), visible_bias.begin(), visible_bias.end());
  flat.insert(flat.end(), hidden_bias.begin(), hidden_bias.end());
  return flat;
}

RbmParams RbmParams::unflatten(int n_visible, int n_hidden, std::span<const double> flat) {
  RbmParams p = zeros(n_visible, n_hidden);
  const std::size_t nw = p.weights.size();
  if (flat.size() != nw + p.visible_bias.size() + p.hidden_bias.size()) {
    throw ConfigError("flat RBM parameter vector has wrong length");
  }
  std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(nw), p.weights.begin());
  std::copy(flat.begin() + static_cast<std::ptrdiff_t>(nw),
            flat.begin() + static_cast<std::ptrdiff_t>(nw + p.visible_bias.size()), p.visible_bias.begin());
  std::copy(flat.begin() + static_cast<std::ptrdiff_t>(nw + p.visible_bias.size()), flat.end(),
            p.hidden_bias.begin());
  return p;
}

double energy(const RbmParams& p, std::span<const std::uint8_t> v, std::span<const std::uint8_t> h) {
  check_visible(p, v);
  if (static_cast<int>(h.size()) != p.n_hidden) throw ConfigError("hidden vector length mismatch");
  double e = 0.0;
  for (int i = 0; i < p.n_visible; ++i) e -= p.visible_bias[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
  for (int j = 0; j < p.n_hidden; ++j) e -= p.hidden_bias[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(j)];
  for (int i = 0; i < p.n_visible; ++i) {
    if (!v[static_cast<std::size_t>(i)]) continue;
    for (int j = 0; j < p.n_hidden; ++j) {
      if (h[static_cast<std::size_t>(j)]) e -= p.weight(i, j);
    }
  }
  return e;
}

double free_energy(const RbmParams& p, std::span<const std::uint8_t> v) {
  check_visible(p, v);
  double f = 0.0;
  for (int i = 0; i < p.n_visible; ++i) f -= p.visible_bias[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
  for (int j = 0; j < p.n_hidden; ++j) {
    double act = p.hidden_bias[static_cast<std::size_t>(j)];
    for (int i = 0; i < p.n_visible; ++i) {
      if (v[static_cast<std::size_t>(i)]) act += p.weight(i, j);
    }
    f -= softplus(act);
  }
  return f;
}

namespace {

std::vector<double> negative_free_energies(const RbmParams& p) {
  p.validate();
  if (p.n_visible + p.n_hidden > kMaxRbmEnumerationUnits) {
    throw ConfigError("RBM too large for exact enumeration (n_visible + n_hidden > 20)");
  }
  const std::size_t states = std::size_t{1} << p.n_visible;
  std::vector<double> neg_f(states);
  std::vector<std::uint8_t> v(static_cast<std::size_t>(p.n_visible));
  for (std::size_t s = 0; s < states; ++s) {
    index_to_bits(s, v);
    neg_f[s] = -free_energy(p, v);
  }
  return neg_f;
}

double log_sum_exp(const std::vector<double>& x) {
  const double mx = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double xi : x) s += std::exp(xi - mx);
  return mx + std::log(s);
}

}  // namespace

double log_partition_function(const RbmParams& p) { return log_sum_exp(negative_free_energies(p)); }

std::vector<double> exact_visible_distribution(const RbmParams& p) {
  auto neg_f = negative_free_energies(p);
  const double log_z = log_sum_exp(neg_f);
  for (double& x : neg_f) x = std::exp(x - log_z);
  return neg_f;
}

std::vector<double> hidden_probabilities(const RbmParams& p, std::span<const std::uint8_t> v) {
  check_visible(p, v);
  std::vector<double> out(p.hidden_bias);
  for (int i = 0; i < p.n_visible; ++i) {
    if (!v[static_cast<std::size_t>(i)]) continue;
    for (int j = 0; j < p.n_hidden; ++j) out[static_cast<std::size_t>(j)] += p.weight(i, j);
  }
  for (double& x : out) x = sigmoid(x);
  return out;
}

std::vector<double> visible_probabilities(const RbmParams& p, std::span<const std::uint8_t> h) {
  if (static_cast<int>(h.size()) != p.n_hidden) throw ConfigError("hidden vector length mismatch");
  std::vector<double> out(p.visible_bias);
  for (int i = 0; i < p.n_visible; ++i) {
    double act = out[static_cast<std::size_t>(i)];
    for (int j = 0; j < p.n_hidden; ++j) {
      if (h[static_cast<std::size_t>(j)]) act += p.weight(i, j);
    }
    out[static_cast<std::size_t>(i)] = sigmoid(act);
  }
  return out;
}

namespace {

std::vector<std::uint8_t> bernoulli(const std::vector<double>& probs, Rng& rng) {
  std::vector<std::uint8_t> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = uniform01(rng) < probs[i] ? 1 : 0;
  return out;
}

}  // namespace

std::vector<std::uint8_t> gibbs_step(const RbmParams& p, std::span<const std::uint8_t> v, Rng& rng) {
  const auto h = bernoulli(hidden_probabilities(p, v), rng);
  return bernoulli(visible_probabilities(p, h), rng);
}

std::vector<std::uint8_t> gibbs_step(const RbmParams& p, std::span<const std::uint8_t> v, std::uint64_t seed) {
  Rng rng(seed);
  return gibbs_step(p, v, rng);
}

SampleBatch rbm_sample(const RbmParams& p, std::size_t count, std::size_t chains, int burn_in, std::uint64_t seed) {
  p.validate();
  if (chains == 0) throw ConfigError("need at least one Gibbs chain");
  if (burn_in < 0) throw ConfigError("burn-in must be >= 0");
  Rng rng(seed);
  std::vector<std::vector<std::uint8_t>> state(chains, std::vector<std::uint8_t>(static_cast<std::size_t>(p.n_visible)));
  for (auto& v : state)
    for (auto& b : v) b = static_cast<std::uint8_t>(rng() >> 63);
  for (int t = 0; t < burn_in; ++t)
    for (auto& v : state) v = gibbs_step(p, v, rng);
  SampleBatch out(p.n_visible);
  out.reserve(count);
  while (out.size() < count) {
    for (auto& v : state) {
      if (out.size() == count) break;
      v = gibbs_step(p, v, rng);
      out.push_back(v);
    }
  }
  return out;
}

std::vector<double> cd_gradient(const RbmParams& p, const SampleBatch& data, int k, Rng& rng) {
  p.validate();
  if (k < 1) throw ConfigError("CD-k needs k >= 1");
  if (data.empty()) throw ConfigError("CD update needs a non-empty data batch");
  if (data.width() != p.n_visible) throw ConfigError("data width does not match visible layer");
  const auto nv = static_cast<std::size_t>(p.n_visible);
  const auto nh = static_cast<std::size_t>(p.n_hidden);
  std::vector<double> grad(nv * nh + nv + nh, 0.0);
  double* gw = grad.data();
  double* gb = gw + nv * nh;
  double* gc = gb + nv;
  for (std::size_t r = 0; r < data.size(); ++r) {
    auto v0 = data.row(r);
    const auto ph0 = hidden_probabilities(p, v0);
    std::vector<std::uint8_t> vk(v0.begin(), v0.end());
    std::vector<double> phk;
    for (int step = 0; step < k; ++step) {
      const auto h = bernoulli(step == 0 ? ph0 : hidden_probabilities(p, vk), rng);
      vk = bernoulli(visible_probabilities(p, h), rng);
    }
    phk = hidden_probabilities(p, vk);
    for (std::size_t i = 0; i < nv; ++i) {
      for (std::size_t j = 0; j < nh; ++j) gw[i * nh + j] -= v0[i] * ph0[j] - vk[i] * phk[j];
      gb[i] -= static_cast<double>(v0[i]) - static_cast<double>(vk[i]);
    }
    for (std::size_t j = 0; j < nh; ++j) gc[j] -= ph0[j] - phk[j];
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  for (double& g : grad) g *= inv;
  return grad;
}

void cd_update(RbmParams& p, const SampleBatch& data, int k, double step_size, std::uint64_t seed) {
  Rng rng(seed);
  const auto grad = cd_gradient(p, data, k, rng);
  auto flat = p.flatten();
  sgd_step(flat, grad, step_size);
  p = RbmParams::unflatten(p.n_visible, p.n_hidden, flat);
}

}  // namespace bornprior
