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


#ifndef BORNPRIOR_METRICS_HPP
#define BORNPRIOR_METRICS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "bornprior/bits.hpp"
#include "bornprior/data.hpp"
#include "bornprior/nn.hpp"

namespace bornprior {

/// sum_i p_i ln(p_i / max(q_i, epsilon)), with 0 ln 0 = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q, double epsilon = 1e-12);

/// exp(mean_i KL(p(y|x_i) || p(y))) for a row-major [count, classes] posterior matrix.
/// With splits > 1 the rows are cut into contiguous groups and the group scores averaged.
double inception_score(std::span<const double> posteriors, int classes, int splits = 1);

/// Shannon entropy in bits of the observed frequencies.
double shannon_entropy(const EmpiricalDistribution& dist);
double shannon_entropy(std::span<const double> probabilities);

/// Row-wise softmax of a [B, classes] logit tensor.
std::vector<double> softmax_rows(const nn::Tensor& logits);

struct ClassifierConfig {
  int epochs = 10;
  int batch_size = 50;
  double learning_rate = 2e-3;
  double holdout_fraction = 0.1;
  double accuracy_threshold = 0.95;
  std::uint64_t seed = 0;
};

struct ClassifierHandle {
  nn::Network network;  // outputs logits
  int class_count = 0;
  double validation_accuracy = 0.0;
  bool below_threshold = false;
};

/// Convolutional classifier layers for a [1, height, width] input.
std::vector<nn::LayerSpec> classifier_specs(int height, int width, int classes);

/// Trains on a seeded split and records held-out accuracy. Falling below the
/// threshold sets `below_threshold` rather than failing.
ClassifierHandle train_classifier(const ImageDataset& data, const ClassifierConfig& config);

/// Posterior matrix [count, classes] for images [count, 1, H, W], evaluated in chunks.
std::vector<double> classify(ClassifierHandle& classifier, const nn::Tensor& images);
double accuracy(ClassifierHandle& classifier, const ImageDataset& data);

void save_classifier(const std::filesystem::path& path, const ClassifierHandle& classifier);
ClassifierHandle load_classifier(const std::filesystem::path& path);

}  // namespace bornprior

#endif
