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


#ifndef BORNPRIOR_GAN_HPP
#define BORNPRIOR_GAN_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "bornprior/bits.hpp"
#include "bornprior/nn.hpp"
#include "bornprior/optimizers.hpp"

namespace bornprior {

enum class GeneratorLoss { minimax, non_saturating };
std::string_view generator_loss_name(GeneratorLoss v);
GeneratorLoss parse_generator_loss(std::string_view s);

enum class Preset { toy, desk, full };
std::string_view preset_name(Preset p);
Preset parse_preset(std::string_view s);

/// Generator maps a [prior_dim] vector to an image; the discriminator maps an
/// image to a score and ends in dense(latent) sigmoid dense(1) sigmoid, the
/// first sigmoid being the latent layer.
struct GanConfig {
  int prior_dim = 16;
  nn::Shape image_shape{1, 14, 14};
  std::vector<nn::LayerSpec> generator;
  std::vector<nn::LayerSpec> discriminator;
  AdamConfig generator_adam;
  AdamConfig discriminator_adam;
  double label_smoothing = 0.1;
  double label_flip_fraction = 0.03;
  GeneratorLoss generator_loss = GeneratorLoss::non_saturating;

  void validate() const;
  /// Index of the latent activation layer inside the discriminator.
  std::size_t latent_layer() const { return discriminator.size() - 3; }
  int latent_width() const;
};

/// Architecture preset. `toy` uses small dense networks on `toy_image` images;
/// `desk` targets 14x14 and `full` 28x28 MNIST.
GanConfig gan_preset(Preset preset, int prior_dim, nn::Shape toy_image = {1, 1, 2});

struct GanState {
  nn::Network generator;
  nn::Network discriminator;
  AdamState generator_opt;
  AdamState discriminator_opt;
  std::int64_t step = 0;
};

GanState init_gan(const GanConfig& config, std::uint64_t seed);

struct StepMetrics {
  std::int64_t step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double real_score_mean = 0.0;
  double fake_score_mean = 0.0;
};

/// Mean binary cross-entropy over the real scores plus the same over the fake
/// scores. Real targets are 1 - smoothing, fake targets 0; a set flip entry
/// swaps that sample's target. Empty masks mean no flips.
double discriminator_loss(std::span<const double> real_scores, std::span<const double> fake_scores,
                          double smoothing, std::span<const std::uint8_t> real_flips = {},
                          std::span<const std::uint8_t> fake_flips = {});

/// minimax: mean ln(1 - D); non_saturating: mean -ln D.
double generator_loss(std::span<const double> fake_scores, GeneratorLoss variant);

/// i.i.d. fair bits.
SampleBatch bernoulli_prior(int n_bits, std::size_t batch, std::uint64_t seed);

/// Generator input [B, width] with bit b mapped to 2 b - 1.
nn::Tensor prior_tensor(const SampleBatch& prior);

/// Each entry set independently with probability `fraction`.
std::vector<std::uint8_t> flip_mask(std::size_t count, double fraction, std::uint64_t seed);

/// One discriminator update on (real, G(prior)) followed by one generator update.
StepMetrics gan_train_step(const GanConfig& config, GanState& state, const nn::Tensor& real_batch,
                           const SampleBatch& prior_batch, std::uint64_t seed);

/// Generator output in eval mode, [B, image_shape...].
nn::Tensor generate(GanState& state, const SampleBatch& prior_batch);

void save_gan(const std::filesystem::path& dir, const GanState& state, int epoch);

}  // namespace bornprior

#endif
