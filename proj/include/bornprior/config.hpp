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


#ifndef BORNPRIOR_CONFIG_HPP
#define BORNPRIOR_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bornprior/aan.hpp"
#include "bornprior/data.hpp"
#include "bornprior/gan.hpp"
#include "bornprior/metrics.hpp"

namespace bornprior {

inline constexpr int kConfigVersion = 1;

struct DatasetConfig {
  std::filesystem::path images;  // empty: bundled MNIST subset
  std::filesystem::path labels;
  int limit = 0;                 // 0 keeps every image
};

struct GanSettings {
  double generator_lr = 2e-4;
  double discriminator_lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double label_smoothing = 0.1;
  double label_flip_fraction = 0.03;
  GeneratorLoss generator_loss = GeneratorLoss::non_saturating;
};

/// Standalone QCBM training target for train-qcbm.
struct QcbmTaskConfig {
  std::string target = "bars_and_stripes";  // or "histogram"
  int rows = 2;
  int cols = 2;
  std::filesystem::path histogram;  // lines "<bitstring> <count>"
  int steps = 500;
  std::string oracle = "exact";  // or "shots"
  int report_every = 10;
};

struct StabilityConfig {
  int seeds = 5;
  std::vector<int> steps_per_update{1, 5};
};

struct ClassifierSettings {
  std::filesystem::path path;  // empty: train one into the output directory
  ClassifierConfig train;
};

/// Versioned experiment description. Every section is optional; unknown keys are rejected.
struct RunConfig {
  int version = kConfigVersion;
  std::uint64_t seed = 0;
  int epochs = 1;
  int batch_size = 50;
  std::filesystem::path out_dir = "run";
  Preset preset = Preset::desk;
  bool pool_thread = false;
  DatasetConfig dataset;
  PriorConfig prior;
  GanSettings gan;
  ScheduleConfig schedule;
  BackendSpec backend;
  EvalConfig eval;
  ClassifierSettings classifier;
  QcbmTaskConfig qcbm_task;
  StabilityConfig stability;

  void validate() const;
  /// GAN networks from the preset sized for the prior, plus every training setting.
  TrainingConfig training_config() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& config);

/// Downsampling factor that maps 28x28 MNIST onto the preset's image size.
int preset_downsample(Preset preset);
/// Loads, truncates and downsamples the configured dataset.
ImageDataset load_dataset(const RunConfig& config);
std::filesystem::path default_data_dir();

}  // namespace bornprior

#endif
