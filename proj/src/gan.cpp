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

#include "bornprior/gan.hpp"

#include <cmath>

#include "bornprior/errors.hpp"
#include "bornprior/random.hpp"
#include "json.hpp"

namespace bornprior {

using nn::LayerKind;
using nn::LayerSpec;

std::string_view generator_loss_name(GeneratorLoss v) {
  return v == GeneratorLoss::minimax ? "minimax" : "non_saturating";
}

GeneratorLoss parse_generator_loss(std::string_view s) {
  if (s == "minimax") return GeneratorLoss::minimax;
  if (s == "non_saturating") return GeneratorLoss::non_saturating;
  throw ConfigError("unknown generator loss: " + std::string(s));
}

std::string_view preset_name(Preset p) {
  switch (p) {
    case Preset::toy: return "toy";
    case Preset::desk: return "desk";
    case Preset::full: return "full";
  }
  return "desk";
}

Preset parse_preset(std::string_view s) {
  for (Preset p : {Preset::toy, Preset::desk, Preset::full})
    if (preset_name(p) == s) return p;
  throw ConfigError("unknown preset: " + std::string(s));
}

int GanConfig::latent_width() const { return discriminator.at(discriminator.size() - 4).units; }

void GanConfig::validate() const {
  if (prior_dim < 1) throw ConfigError("prior_dim must be >= 1");
  if (image_shape.size() != 3) throw ConfigError("image_shape must be [C, H, W]");
  if (!(label_smoothing >= 0.0 && label_smoothing < 0.5)) throw ConfigError("label_smoothing must be in [0, 0.5)");
  if (!(label_flip_fraction >= 0.0 && label_flip_fraction < 0.5)) {
    throw ConfigError("label_flip_fraction must be in [0, 0.5)");
  }
  const auto& d = discriminator;
  if (d.size() < 4 || d[d.size() - 1].kind != LayerKind::sigmoid || d[d.size() - 2] != LayerSpec::dense(1) ||
      d[d.size() - 3].kind != LayerKind::sigmoid || d[d.size() - 4].kind != LayerKind::dense) {
    throw ConfigError("discriminator must end in dense(latent) sigmoid dense(1) sigmoid");
  }
  if (latent_width() != prior_dim) {
    throw ConfigError("discriminator latent width " + std::to_string(latent_width()) + " differs from prior_dim " +
                      std::to_string(prior_dim));
  }
  nn::Network g({prior_dim}, generator, 0);
  if (g.output_shape() != image_shape) {
    throw ConfigError("generator output " + nn::shape_string(g.output_shape()) + " differs from image shape " +
                      nn::shape_string(image_shape));
  }
  nn::Network disc(image_shape, discriminator, 0);
}

GanConfig gan_preset(Preset preset, int prior_dim, nn::Shape toy_image) {
  if (prior_dim < 1) throw ConfigError("prior_dim must be >= 1");
  GanConfig c;
  c.prior_dim = prior_dim;
  const auto lrelu = LayerSpec::leaky_relu();
  const auto bn = LayerSpec::batchnorm();
  switch (preset) {
    case Preset::toy: {
      c.image_shape = toy_image;
      const int pixels = static_cast<int>(nn::shape_size(toy_image));
      c.generator = {LayerSpec::dense(16), lrelu, LayerSpec::dense(pixels), LayerSpec::tanh(),
                     LayerSpec::reshape(toy_image)};
      c.discriminator = {LayerSpec::flatten(), LayerSpec::dense(16), lrelu};
      break;
    }
    case Preset::desk:
      c.image_shape = {1, 14, 14};
      c.generator = {LayerSpec::dense(64 * 7 * 7), lrelu, LayerSpec::reshape({64, 7, 7}),
                     LayerSpec::conv2d_transpose(32, 4, 2, 1), bn, lrelu,
                     LayerSpec::conv2d(16, 3, 1, 1), bn, lrelu,
                     LayerSpec::conv2d(1, 3, 1, 1), LayerSpec::tanh()};
      c.discriminator = {LayerSpec::conv2d(16, 4, 2, 1), bn, lrelu,
                         LayerSpec::conv2d(32, 3, 1, 1), bn, lrelu,
                         LayerSpec::conv2d(64, 3, 2, 1), bn, lrelu, LayerSpec::flatten()};
      break;
    case Preset::full:
      c.image_shape = {1, 28, 28};
      c.generator = {LayerSpec::dense(128 * 7 * 7), lrelu, LayerSpec::reshape({128, 7, 7}),
                     LayerSpec::conv2d_transpose(64, 4, 2, 1), bn, lrelu,
                     LayerSpec::conv2d_transpose(32, 4, 2, 1), bn, lrelu,
                     LayerSpec::conv2d(1, 3, 1, 1), LayerSpec::tanh()};
      c.discriminator = {LayerSpec::conv2d(32, 4, 2, 1), bn, lrelu,
                         LayerSpec::conv2d(64, 4, 2, 1), bn, lrelu,
                         LayerSpec::conv2d(128, 3, 1, 1), bn, lrelu, LayerSpec::flatten()};
      break;
  }
  c.discriminator.push_back(LayerSpec::dense(prior_dim));
  c.discriminator.push_back(LayerSpec::sigmoid());
  c.discriminator.push_back(LayerSpec::dense(1));
  c.discriminator.push_back(LayerSpec::sigmoid());
  return c;
}

GanState init_gan(const GanConfig& config, std::uint64_t seed) {
  config.validate();
  GanState s;
  s.generator = nn::Network({config.prior_dim}, config.generator, derive_seed(seed, "generator-init"));
  s.discriminator = nn::Network(config.image_shape, config.discriminator, derive_seed(seed, "discriminator-init"));
  s.generator_opt = AdamState(s.generator.count_parameters(), config.generator_adam);
  s.discriminator_opt = AdamState(s.discriminator.count_parameters(), config.discriminator_adam);
  return s;
}

namespace {

void check_scores(std::span<const double> scores) {
  for (double s : scores)
    if (!(s > 0.0 && s < 1.0)) throw StateError("discriminator score outside (0, 1): " + std::to_string(s));
}

double bce(double score, double target) { return -(target * std::log(score) + (1.0 - target) * std::log(1.0 - score)); }

double target_for(bool real, bool flipped, double smoothing) {
  return real != flipped ? 1.0 - smoothing : 0.0;
}

bool flipped(std::span<const std::uint8_t> mask, std::size_t i) { return !mask.empty() && mask[i] != 0; }

}  // namespace

double discriminator_loss(std::span<const double> real_scores, std::span<const double> fake_scores,
                          double smoothing, std::span<const std::uint8_t> real_flips,
                          std::span<const std::uint8_t> fake_flips) {
  if (real_scores.empty() || fake_scores.empty()) throw ConfigError("discriminator_loss needs scores");
  if ((!real_flips.empty() && real_flips.size() != real_scores.size()) ||
      (!fake_flips.empty() && fake_flips.size() != fake_scores.size())) {
    throw ConfigError("flip mask length differs from score count");
  }
  check_scores(real_scores);
  check_scores(fake_scores);
  double real = 0.0, fake = 0.0;
  for (std::size_t i = 0; i < real_scores.size(); ++i)
    real += bce(real_scores[i], target_for(true, flipped(real_flips, i), smoothing));
  for (std::size_t i = 0; i < fake_scores.size(); ++i)
    fake += bce(fake_scores[i], target_for(false, flipped(fake_flips, i), smoothing));
  return real / static_cast<double>(real_scores.size()) + fake / static_cast<double>(fake_scores.size());
}

double generator_loss(std::span<const double> fake_scores, GeneratorLoss variant) {
  if (fake_scores.empty()) throw ConfigError("generator_loss needs scores");
  check_scores(fake_scores);
  double s = 0.0;
  for (double d : fake_scores) s += variant == GeneratorLoss::minimax ? std::log(1.0 - d) : -std::log(d);
  return s / static_cast<double>(fake_scores.size());
}

SampleBatch bernoulli_prior(int n_bits, std::size_t batch, std::uint64_t seed) {
  if (n_bits < 1) throw ConfigError("bernoulli_prior needs n_bits >= 1");
  SampleBatch out(n_bits);
  out.reserve(batch);
  Rng rng(seed);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(n_bits));
  for (std::size_t i = 0; i < batch; ++i) {
    for (auto& b : row) b = static_cast<std::uint8_t>(rng() >> 63);
    out.push_back(row);
  }
  return out;
}

nn::Tensor prior_tensor(const SampleBatch& prior) {
  nn::Tensor t({static_cast<int>(prior.size()), prior.width()});
  const auto bits = prior.data();
  for (std::size_t i = 0; i < bits.size(); ++i) t[i] = bits[i] ? 1.0 : -1.0;
  return t;
}

std::vector<std::uint8_t> flip_mask(std::size_t count, double fraction, std::uint64_t seed) {
  std::vector<std::uint8_t> mask(count, 0);
  if (fraction <= 0.0) return mask;
  Rng rng(seed);
  for (auto& m : mask) m = uniform01(rng) < fraction ? 1 : 0;
  return mask;
}

namespace {

void apply_adam(nn::Network& net, AdamState& opt) {
  auto params = net.flat_parameters();
  adam_step(opt, params, net.flat_gradients());
  net.set_flat_parameters(params);
}

std::vector<double> scores_of(const nn::Tensor& out) { return {out.values().begin(), out.values().end()}; }

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

StepMetrics gan_train_step(const GanConfig& config, GanState& state, const nn::Tensor& real_batch,
                           const SampleBatch& prior_batch, std::uint64_t seed) {
  if (prior_batch.width() != config.prior_dim) {
    throw ConfigError("prior batch width " + std::to_string(prior_batch.width()) + " differs from prior_dim " +
                      std::to_string(config.prior_dim));
  }
  if (prior_batch.empty()) throw ConfigError("empty prior batch");
  const std::size_t n_real = static_cast<std::size_t>(real_batch.dim(0));
  const std::size_t n_fake = prior_batch.size();
  const auto real_flips = flip_mask(n_real, config.label_flip_fraction, derive_seed(seed, "flip-real"));
  const auto fake_flips = flip_mask(n_fake, config.label_flip_fraction, derive_seed(seed, "flip-fake"));
  const double smoothing = config.label_smoothing;

  auto g = state.generator.forward(prior_tensor(prior_batch), nn::Mode::train);

  // Discriminator update.
  state.discriminator.zero_grad();
  auto dr = state.discriminator.forward(real_batch, nn::Mode::train);
  const auto real_scores = scores_of(dr.output);
  nn::Tensor grad_real(dr.output.shape());
  for (std::size_t i = 0; i < n_real; ++i) {
    grad_real[i] = (real_scores[i] - target_for(true, real_flips[i] != 0, smoothing)) / static_cast<double>(n_real);
  }
  state.discriminator.backward(dr.cache, grad_real, 1);
  auto df = state.discriminator.forward(g.output, nn::Mode::train);
  const auto fake_scores = scores_of(df.output);
  nn::Tensor grad_fake(df.output.shape());
  for (std::size_t i = 0; i < n_fake; ++i) {
    grad_fake[i] = (fake_scores[i] - target_for(false, fake_flips[i] != 0, smoothing)) / static_cast<double>(n_fake);
  }
  state.discriminator.backward(df.cache, grad_fake, 1);
  StepMetrics m;
  m.d_loss = discriminator_loss(real_scores, fake_scores, smoothing, real_flips, fake_flips);
  m.real_score_mean = mean(real_scores);
  apply_adam(state.discriminator, state.discriminator_opt);

  // Generator update through the updated discriminator.
  auto dg = state.discriminator.forward(g.output, nn::Mode::train);
  const auto gen_scores = scores_of(dg.output);
  m.g_loss = generator_loss(gen_scores, config.generator_loss);
  m.fake_score_mean = mean(gen_scores);
  nn::Tensor grad_gen(dg.output.shape());
  for (std::size_t i = 0; i < n_fake; ++i) {
    const double d = gen_scores[i];
    grad_gen[i] = (config.generator_loss == GeneratorLoss::non_saturating ? d - 1.0 : -d) / static_cast<double>(n_fake);
  }
  const nn::Tensor grad_image = state.discriminator.backward(dg.cache, grad_gen, 1);
  state.generator.zero_grad();
  state.generator.backward(g.cache, grad_image);
  apply_adam(state.generator, state.generator_opt);

  m.step = state.step++;
  return m;
}

nn::Tensor generate(GanState& state, const SampleBatch& prior_batch) {
  return state.generator.forward(prior_tensor(prior_batch), nn::Mode::eval).output;
}

void save_gan(const std::filesystem::path& dir, const GanState& state, int epoch) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta;
  meta["epoch"] = epoch;
  meta["step"] = state.step;
  const std::string suffix = "_epoch" + std::to_string(epoch) + ".bpnn";
  meta["role"] = "generator";
  nn::save_network(dir / ("generator" + suffix), state.generator, meta.dump());
  meta["role"] = "discriminator";
  nn::save_network(dir / ("discriminator" + suffix), state.discriminator, meta.dump());
}

}  // namespace bornprior
