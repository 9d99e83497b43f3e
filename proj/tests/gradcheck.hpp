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


#ifndef BORNPRIOR_TESTS_GRADCHECK_HPP
#define BORNPRIOR_TESTS_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "bornprior/nn.hpp"
#include "bornprior/random.hpp"

namespace gradcheck {

using namespace bornprior;
using namespace bornprior::nn;

inline Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (auto& v : t.values()) v = scale * standard_normal(rng);
  return t;
}

inline int rand_int(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); }

inline double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4}); }

// Checks d/dtheta sum(w * f(x)) for every parameter and input entry against central differences.
inline double gradient_check(Network& net, Tensor x, Mode mode, Rng& rng) {
  const double h = 1e-5;
  auto fwd = net.forward(x, mode);
  const Tensor w = random_tensor(fwd.output.shape(), rng);
  auto objective = [&](const Tensor& in) {
    const auto out = net.forward(in, mode).output;
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += w[i] * out[i];
    return s;
  };
  net.zero_grad();
  fwd = net.forward(x, mode);
  const Tensor gx = net.backward(fwd.cache, w);
  const auto gp = net.flat_gradients();
  auto params = net.flat_parameters();

  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = objective(x);
    x[i] = keep - h;
    const double down = objective(x);
    x[i] = keep;
    worst = std::max(worst, rel_error(gx[i], (up - down) / (2 * h)));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    net.set_flat_parameters(params);
    const double up = objective(x);
    params[i] = keep - h;
    net.set_flat_parameters(params);
    const double down = objective(x);
    params[i] = keep;
    net.set_flat_parameters(params);
    worst = std::max(worst, rel_error(gp[i], (up - down) / (2 * h)));
  }
  return worst;
}

inline void randomize_parameters(Network& net, Rng& rng) {
  auto p = net.flat_parameters();
  for (auto& v : p) v = 0.5 * standard_normal(rng);
  net.set_flat_parameters(p);
}

// Moves entries away from the leaky ReLU kink so the difference quotient is smooth.
inline void avoid_kink(Tensor& x) {
  for (auto& v : x.values())
    if (std::abs(v) < 1e-2) v = v < 0 ? -0.05 : 0.05;
}

struct Case {
  Shape input;
  std::vector<LayerSpec> specs;
  int batch;
};

inline Case random_case(LayerKind kind, Rng& rng) {
  const int batch = rand_int(rng, 2, 3);
  switch (kind) {
    case LayerKind::dense: return {{rand_int(rng, 1, 6)}, {LayerSpec::dense(rand_int(rng, 1, 5))}, batch};
    case LayerKind::conv2d: {
      const int k = rand_int(rng, 1, 3);
      const int pad = rand_int(rng, 0, 1);
      const int hw = rand_int(rng, k, 6);
      return {{rand_int(rng, 1, 3), hw, rand_int(rng, k, 6)},
              {LayerSpec::conv2d(rand_int(rng, 1, 3), k, rand_int(rng, 1, 2), pad)},
              batch};
    }
    case LayerKind::conv2d_transpose: {
      const int k = rand_int(rng, 1, 4);
      const int stride = rand_int(rng, 1, 2);
      const int pad = k > 1 ? rand_int(rng, 0, 1) : 0;
      return {{rand_int(rng, 1, 3), rand_int(rng, 2, 4), rand_int(rng, 2, 4)},
              {LayerSpec::conv2d_transpose(rand_int(rng, 1, 3), k, stride, pad)},
              batch};
    }
    case LayerKind::batchnorm:
      if (rng() & 1) return {{rand_int(rng, 1, 5)}, {LayerSpec::batchnorm()}, rand_int(rng, 3, 5)};
      return {{rand_int(rng, 1, 3), rand_int(rng, 1, 3), rand_int(rng, 2, 3)}, {LayerSpec::batchnorm()}, batch};
    case LayerKind::leaky_relu: return {{rand_int(rng, 1, 4), rand_int(rng, 1, 3)}, {LayerSpec::leaky_relu(0.2)}, batch};
    case LayerKind::sigmoid: return {{rand_int(rng, 1, 8)}, {LayerSpec::sigmoid()}, batch};
    case LayerKind::tanh: return {{rand_int(rng, 1, 3), 2, 2}, {LayerSpec::tanh()}, batch};
    case LayerKind::flatten: return {{rand_int(rng, 1, 3), rand_int(rng, 1, 3), 2}, {LayerSpec::flatten()}, batch};
    case LayerKind::reshape: {
      const int a = rand_int(rng, 1, 3);
      const int b = rand_int(rng, 1, 3);
      return {{a * b * 2}, {LayerSpec::reshape({a, b, 2})}, batch};
    }
  }
  return {};
}

/// Worst relative error over `trials` random single-layer networks of one kind.
inline double worst_layer_error(LayerKind kind, int trials, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "gradcheck", {static_cast<std::uint64_t>(kind)}));
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const Case c = random_case(kind, rng);
    Network net(c.input, c.specs, rng());
    randomize_parameters(net, rng);
    Shape batched{c.batch};
    batched.insert(batched.end(), c.input.begin(), c.input.end());
    Tensor x = random_tensor(batched, rng);
    if (kind == LayerKind::leaky_relu) avoid_kink(x);
    worst = std::max(worst, gradient_check(net, x, Mode::train, rng));
  }
  return worst;
}

inline const std::vector<LayerKind> kAllLayerKinds{
    LayerKind::dense,   LayerKind::conv2d, LayerKind::conv2d_transpose, LayerKind::batchnorm, LayerKind::leaky_relu,
    LayerKind::sigmoid, LayerKind::tanh,   LayerKind::flatten,          LayerKind::reshape};

}  // namespace gradcheck

#endif
