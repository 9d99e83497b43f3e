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


#ifndef BORNPRIOR_EXPERIMENTS_HPP
#define BORNPRIOR_EXPERIMENTS_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bornprior/aan.hpp"
#include "bornprior/config.hpp"
#include "bornprior/optimizers.hpp"
#include "bornprior/qcbm.hpp"

namespace bornprior {

enum class QcbmOracle { exact, shots };

struct QcbmTrainResult {
  std::vector<double> nll;  // exact clipped NLL at warm start and after every step
  std::vector<double> kl;   // nll minus the target entropy (nats)
  double entropy_floor = 0.0;
  ParamSet params;

  /// Fraction of the warm-start-to-floor gap closed by the final parameters.
  double gap_closure() const;
};

/// SPSA training of a QCBM from warm start on a fixed target. The shots oracle
/// estimates the loss from `shots` multi-basis samples per evaluation; the
/// recorded trajectory always uses the exact loss.
QcbmTrainResult train_qcbm(const AnsatzSpec& spec, const EmpiricalDistribution& target, int steps,
                           const SpsaGains& gains, QcbmOracle oracle, int shots, std::uint64_t seed,
                           double epsilon = kDefaultNllEpsilon);

/// Histogram file: one "<bitstring> <count>" pair per line; '#' starts a comment.
EmpiricalDistribution read_histogram(const std::filesystem::path& path);

struct StabilityRun {
  std::string variant;  // e.g. "qcbm_1step"
  PriorKind kind = PriorKind::qcbm;
  int steps_per_update = 1;
  std::uint64_t seed = 0;
  std::vector<EntropyPoint> entropy;
  double min_sampled_entropy = 0.0;
  double final_exact_entropy = 0.0;
  double final_inception_score = 0.0;  // NaN without a classifier
  EmpiricalDistribution final_samples;
};

struct StabilityReport {
  int prior_bits = 0;
  std::vector<StabilityRun> runs;
  std::string table;  // markdown comparison table
};

/// {QCBM, RBM} x steps_per_update variants x seeds AAN runs with an n-bit
/// single-basis prior. Writes report.json, report.md, per-run subdirectories
/// and worst_<variant>_histogram.pgm for the run of each variant whose sampled
/// prior entropy fell lowest.
StabilityReport run_stability(const RunConfig& config, const ImageDataset& data, ClassifierHandle* classifier);

}  // namespace bornprior

#endif
