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


#ifndef BORNPRIOR_AAN_HPP
#define BORNPRIOR_AAN_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string_view>
#include <vector>

#include "bornprior/backend.hpp"
#include "bornprior/bits.hpp"
#include "bornprior/data.hpp"
#include "bornprior/gan.hpp"
#include "bornprior/metrics.hpp"
#include "bornprior/optimizers.hpp"
#include "bornprior/qcbm.hpp"
#include "bornprior/rbm.hpp"

namespace bornprior {

enum class PriorKind { bernoulli_fixed, qcbm, qcbm_orthogonal, qcbm_trained, rbm };
std::string_view prior_kind_name(PriorKind k);
PriorKind parse_prior_kind(std::string_view s);
bool is_qcbm(PriorKind k);

enum class LatentSource { real, real_and_fake };
std::string_view latent_source_name(LatentSource s);
LatentSource parse_latent_source(std::string_view s);

struct ScheduleConfig {
  int update_every_batches = 100;
  int steps_per_update = 1;
  int freeze_after_epochs = 10;
  int prior_shots = 1000;
  int resample_pool_shots = 10000;

  void validate() const;
};

struct RbmPriorConfig {
  int hidden = 0;  // 0 means n_visible
  double step_size = 0.01;
  int cd_k = 1;
  int chains = 100;
  int burn_in = 100;

  void validate() const;
};

struct PriorConfig {
  PriorKind kind = PriorKind::qcbm_trained;
  int n_bits = 8;  // qubits, RBM visible units or Bernoulli bits
  int layers = 2;
  Topology topology = Topology::all_to_all;
  SpsaGains spsa;
  RbmPriorConfig rbm;
  double nll_epsilon = kDefaultNllEpsilon;
  LatentSource latent_source = LatentSource::real;

  void validate() const;
  AnsatzSpec ansatz() const;
  /// Width of one prior sample: 2 n_bits for the multi-basis kinds, n_bits otherwise.
  int sample_width() const;
};

/// Trainable (or fixed) source of generator inputs.
class PriorModel {
 public:
  PriorModel(const PriorConfig& config, const BackendSpec& backend, std::uint64_t seed);

  PriorKind kind() const { return config_.kind; }
  const PriorConfig& config() const { return config_; }
  int width() const { return config_.sample_width(); }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  const AnsatzSpec& ansatz() const { return ansatz_; }
  const ParamSet& qcbm_params() const { return qcbm_; }
  const RbmParams& rbm_params() const { return rbm_; }
  void set_qcbm_params(ParamSet p);
  void set_rbm_params(RbmParams p);
  /// Flat trainable parameters (empty for bernoulli_fixed).
  std::vector<double> parameters() const;
  int spsa_iteration() const { return spsa_k_; }
  /// Returns the current SPSA iteration index and advances it.
  int next_spsa_iteration() { return spsa_k_++; }

  SampleBatch sample(std::size_t count, std::uint64_t seed) const;
  /// Exact probabilities over all 2^width samples (width <= 20).
  std::vector<double> exact_distribution() const;
  /// Exact Shannon entropy in bits (multi-basis halves are independent, so their entropies add).
  double exact_entropy_bits() const;
  /// Clipped NLL of latent data under the exact model (RBM: exact enumeration).
  double exact_nll(const EmpiricalDistribution& data) const;
  /// Loss the optimizer sees: exact for the exact backend, otherwise estimated from prior_shots samples.
  double oracle_loss(std::span<const double> params, const EmpiricalDistribution& data, int shots,
                     std::uint64_t seed) const;

 private:
  PriorConfig config_;
  AnsatzSpec ansatz_;
  ParamSet qcbm_;
  RbmParams rbm_;
  std::shared_ptr<SamplerBackend> backend_;
  bool frozen_ = false;
  int spsa_k_ = 0;
};

/// JSON snapshot of a prior (configuration and parameters) and its inverse.
std::string prior_to_json(const PriorModel& prior);
PriorModel prior_from_json(const std::string& text, const BackendSpec& backend);

enum class UpdateStatus { applied, noop, rejected_frozen };
std::string_view update_status_name(UpdateStatus s);

/// steps_per_update SPSA steps on the clipped (multi-basis) NLL for QCBM kinds,
/// steps_per_update CD updates for the RBM, nothing for bernoulli_fixed.
/// A frozen prior is left unchanged and reported as rejected.
UpdateStatus prior_update(PriorModel& prior, const EmpiricalDistribution& latent, const ScheduleConfig& schedule,
                          std::uint64_t seed);

/// Activations [B, latent_width] of the discriminator's latent layer in eval mode.
nn::Tensor extract_latent(const GanConfig& config, nn::Network& discriminator, const nn::Tensor& images);
/// bit = 1 iff activation > 0.5.
SampleBatch binarize_latent(const nn::Tensor& activations);

struct EvalConfig {
  int inception_samples = 10000;  // 0 disables the score
  int inception_splits = 1;
  int grid_images = 64;
  bool score_epoch_zero = true;
};

struct TrainingConfig {
  GanConfig gan;
  PriorConfig prior;
  ScheduleConfig schedule;
  BackendSpec backend;
  EvalConfig eval;
  std::uint64_t seed = 0;
  int epochs = 1;
  int batch_size = 50;
  std::filesystem::path out_dir = "run";
  bool pool_thread = false;
  bool checkpoints = true;
  bool verbose = false;

  void validate() const;
};

struct EntropyPoint {
  int event = 0;
  std::int64_t batch = 0;
  int epoch = 0;
  double exact_bits = 0.0;
  double sampled_bits = 0.0;
};

struct RunSummary {
  int batches_per_epoch = 0;
  int update_events = 0;
  int freeze_epoch = -1;
  std::vector<std::int64_t> update_batches;  // global batch count at each event
  std::vector<std::pair<int, double>> inception_scores;  // (epoch, IS)
  std::vector<EntropyPoint> entropy;
  std::vector<double> prior_parameters_at_freeze;
  std::vector<double> final_prior_parameters;
  EmpiricalDistribution final_prior_samples;
};

/// Full AAN loop: GAN steps fed from the prior's sample pool, prior updates on
/// the cadence until the freeze epoch, per-epoch scores, grids and checkpoints.
/// Artifacts under out_dir: metrics.jsonl, prior_events.jsonl, grid_epoch<k>.pgm,
/// checkpoints/.
RunSummary run_training(const TrainingConfig& config, const ImageDataset& data, ClassifierHandle* classifier);

}  // namespace bornprior

#endif
