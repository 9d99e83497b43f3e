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

#include "bornprior/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bornprior/errors.hpp"
#include "bornprior/optimizers.hpp"
#include "bornprior/random.hpp"
#include "json.hpp"

namespace bornprior {

double kl_divergence(std::span<const double> p, std::span<const double> q, double epsilon) {
  if (p.size() != q.size()) throw ConfigError("kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / std::max(q[i], epsilon));
  }
  return kl;
}

double inception_score(std::span<const double> posteriors, int classes, int splits) {
  if (classes < 1) throw ConfigError("inception_score needs classes >= 1");
  if (splits < 1) throw ConfigError("inception_score needs splits >= 1");
  if (posteriors.empty() || posteriors.size() % static_cast<std::size_t>(classes) != 0) {
    throw ConfigError("inception_score needs a nonempty [count, classes] posterior matrix");
  }
  const std::size_t k = static_cast<std::size_t>(classes);
  const std::size_t count = posteriors.size() / k;
  if (static_cast<std::size_t>(splits) > count) throw ConfigError("more IS splits than images");
  double total = 0.0;
  for (int s = 0; s < splits; ++s) {
    const std::size_t begin = count * static_cast<std::size_t>(s) / static_cast<std::size_t>(splits);
    const std::size_t end = count * static_cast<std::size_t>(s + 1) / static_cast<std::size_t>(splits);
    std::vector<double> marginal(k, 0.0);
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t c = 0; c < k; ++c) marginal[c] += posteriors[i * k + c];
    for (double& m : marginal) m /= static_cast<double>(end - begin);
    double mean_kl = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean_kl += kl_divergence(posteriors.subspan(i * k, k), marginal);
    total += std::exp(mean_kl / static_cast<double>(end - begin));
  }
  return total / splits;
}

double shannon_entropy(std::span<const double> probabilities) {
  double h = 0.0, mass = 0.0;
  for (double p : probabilities) {
    if (p > 0.0) h -= p * std::log2(p);
    mass += p;
  }
  if (mass <= 0.0) throw ConfigError("entropy of an empty distribution");
  return h;
}

double shannon_entropy(const EmpiricalDistribution& dist) {
  if (dist.total() == 0) throw ConfigError("entropy of an empty distribution");
  double h = 0.0;
  for (const auto& [idx, c] : dist.counts()) {
    const double f = static_cast<double>(c) / static_cast<double>(dist.total());
    h -= f * std::log2(f);
  }
  return h;
}

std::vector<double> softmax_rows(const nn::Tensor& logits) {
  if (logits.rank() != 2) throw ConfigError("softmax expects [B, classes] logits");
  const std::size_t b = static_cast<std::size_t>(logits.dim(0)), k = static_cast<std::size_t>(logits.dim(1));
  std::vector<double> out(b * k);
  for (std::size_t i = 0; i < b; ++i) {
    const double* row = logits.data() + i * k;
    const double top = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += out[i * k + c] = std::exp(row[c] - top);
    for (std::size_t c = 0; c < k; ++c) out[i * k + c] /= z;
  }
  return out;
}

std::vector<nn::LayerSpec> classifier_specs(int height, int width, int classes) {
  using nn::LayerSpec;
  if (height < 1 || width < 1 || classes < 2) throw ConfigError("classifier needs an image and >= 2 classes");
  std::vector<LayerSpec> s{LayerSpec::conv2d(16, 3, 1, 1), LayerSpec::leaky_relu()};
  int h = height, w = width, ch = 16;
  while (h >= 14 && w >= 14 && h % 2 == 0 && w % 2 == 0) {
    ch = std::min(ch * 2, 64);
    s.push_back(LayerSpec::conv2d(ch, 4, 2, 1));
    s.push_back(LayerSpec::leaky_relu());
    h /= 2;
    w /= 2;
  }
  s.push_back(LayerSpec::flatten());
  s.push_back(LayerSpec::dense(64));
  s.push_back(LayerSpec::leaky_relu());
  s.push_back(LayerSpec::dense(classes));
  return s;
}

std::vector<double> classify(ClassifierHandle& classifier, const nn::Tensor& images) {
  constexpr int kChunk = 256;
  const int count = images.dim(0);
  const std::size_t per = images.size() / static_cast<std::size_t>(std::max(count, 1));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count) * static_cast<std::size_t>(classifier.class_count));
  for (int b = 0; b < count; b += kChunk) {
    const int n = std::min(kChunk, count - b);
    nn::Shape shape = images.shape();
    shape[0] = n;
    nn::Tensor chunk(shape, std::vector<double>(images.data() + static_cast<std::size_t>(b) * per,
                                                images.data() + static_cast<std::size_t>(b + n) * per));
    const auto probs = softmax_rows(classifier.network.forward(chunk, nn::Mode::eval).output);
    out.insert(out.end(), probs.begin(), probs.end());
  }
  return out;
}

double accuracy(ClassifierHandle& classifier, const ImageDataset& data) {
  if (!data.labeled() || data.count == 0) throw ConfigError("accuracy needs a labeled, nonempty dataset");
  std::vector<std::size_t> all(static_cast<std::size_t>(data.count));
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto probs = classify(classifier, gather_images(data, all));
  const std::size_t k = static_cast<std::size_t>(classifier.class_count);
  int correct = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto row = probs.begin() + static_cast<std::ptrdiff_t>(i * k);
    if (std::max_element(row, row + static_cast<std::ptrdiff_t>(k)) - row == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.count);
}

ClassifierHandle train_classifier(const ImageDataset& data, const ClassifierConfig& config) {
  if (!data.labeled()) throw ConfigError("train_classifier needs labels");
  if (config.epochs < 1 || config.batch_size < 1) throw ConfigError("classifier epochs and batch_size must be >= 1");
  if (!(config.holdout_fraction > 0.0 && config.holdout_fraction < 1.0)) {
    throw ConfigError("holdout_fraction must be in (0, 1)");
  }
  const int classes = *std::max_element(data.labels.begin(), data.labels.end()) + 1;

  std::vector<std::size_t> order(static_cast<std::size_t>(data.count));
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(config.seed, "holdout"));
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto held = static_cast<std::size_t>(std::ceil(config.holdout_fraction * data.count));
  if (held >= order.size()) throw ConfigError("holdout leaves no training images");
  const std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
  const std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
  const ImageDataset train = subset(data, train_idx);
  const ImageDataset val = subset(data, val_idx);
  const auto batch = static_cast<std::size_t>(std::min<std::size_t>(config.batch_size, train_idx.size()));

  ClassifierHandle h;
  h.class_count = classes;
  h.network = nn::Network({1, data.height, data.width}, classifier_specs(data.height, data.width, classes),
                          derive_seed(config.seed, "classifier-init"), nn::Init::he_normal);
  AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  adam.beta1 = 0.9;
  adam.beta2 = 0.999;
  AdamState opt(h.network.count_parameters(), adam);
  for (int e = 0; e < config.epochs; ++e) {
    for (const auto& idx : epoch_batches(train_idx.size(), batch, derive_seed(config.seed, "classifier-batches"),
                                         static_cast<std::uint64_t>(e))) {
      const auto r = h.network.forward(gather_images(train, idx), nn::Mode::train);
      const auto probs = softmax_rows(r.output);
      nn::Tensor grad(r.output.shape());
      const double inv_b = 1.0 / static_cast<double>(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (int c = 0; c < classes; ++c) {
          const std::size_t k = i * static_cast<std::size_t>(classes) + static_cast<std::size_t>(c);
          grad[k] = (probs[k] - (train.labels[idx[i]] == c ? 1.0 : 0.0)) * inv_b;
        }
      h.network.zero_grad();
      h.network.backward(r.cache, grad);
      auto params = h.network.flat_parameters();
      adam_step(opt, params, h.network.flat_gradients());
      h.network.set_flat_parameters(params);
    }
  }
  h.validation_accuracy = accuracy(h, val);
  h.below_threshold = h.validation_accuracy < config.accuracy_threshold;
  return h;
}

void save_classifier(const std::filesystem::path& path, const ClassifierHandle& classifier) {
  nlohmann::json meta;
  meta["class_count"] = classifier.class_count;
  meta["validation_accuracy"] = classifier.validation_accuracy;
  meta["below_threshold"] = classifier.below_threshold;
  nn::save_network(path, classifier.network, meta.dump());
}

ClassifierHandle load_classifier(const std::filesystem::path& path) {
  auto loaded = nn::load_network(path);
  const auto meta = nlohmann::json::parse(loaded.metadata_json);
  ClassifierHandle h;
  h.network = std::move(loaded.network);
  h.class_count = meta.at("class_count").get<int>();
  h.validation_accuracy = meta.at("validation_accuracy").get<double>();
  h.below_threshold = meta.at("below_threshold").get<bool>();
  return h;
}

}  // namespace bornprior
