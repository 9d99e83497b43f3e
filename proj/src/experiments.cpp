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

#include "bornprior/experiments.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "bornprior/errors.hpp"
#include "bornprior/random.hpp"
#include "json.hpp"

namespace bornprior {

using nlohmann::json;

double QcbmTrainResult::gap_closure() const {
  const double gap = nll.front() - entropy_floor;
  if (gap <= 0.0) return 1.0;
  return (nll.front() - nll.back()) / gap;
}

namespace {

double target_entropy_nats(const EmpiricalDistribution& d) {
  double h = 0.0;
  for (const auto& [idx, c] : d.counts()) {
    const double f = static_cast<double>(c) / static_cast<double>(d.total());
    h -= f * std::log(f);
  }
  return h;
}

}  // namespace

QcbmTrainResult train_qcbm(const AnsatzSpec& spec, const EmpiricalDistribution& target, int steps,
                           const SpsaGains& gains, QcbmOracle oracle, int shots, std::uint64_t seed, double epsilon) {
  spec.validate();
  gains.validate();
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (target.n_bits() != spec.sample_width()) throw ConfigError("target width differs from the model sample width");
  if (oracle == QcbmOracle::shots && shots < 1) throw ConfigError("shots must be >= 1");

  // The floor of the (multi-basis) loss is the entropy of each half the loss compares against.
  QcbmTrainResult r;
  const int n = spec.n_qubits;
  r.entropy_floor = spec.basis_mode == BasisMode::none
                        ? target_entropy_nats(target)
                        : target_entropy_nats(target.marginal(0, n)) + target_entropy_nats(target.marginal(n, n));
  const LossOracle loss = [&](std::span<const double> p, std::uint64_t s) {
    const ParamSet ps = ParamSet::unflatten(spec, p);
    if (oracle == QcbmOracle::exact) return multibasis_nll(spec, ps, target, epsilon);
    const auto hist = EmpiricalDistribution::from_batch(sample_multibasis(spec, ps, static_cast<std::size_t>(shots), s));
    if (spec.basis_mode == BasisMode::none) return clipped_nll(hist, target, epsilon);
    return multibasis_nll(spec, hist.marginal(0, n), hist.marginal(n, n), target, epsilon);
  };

  std::vector<double> flat = warm_start(spec).flatten();
  auto record = [&] {
    const double v = multibasis_nll(spec, ParamSet::unflatten(spec, flat), target, epsilon);
    r.nll.push_back(v);
    r.kl.push_back(v - r.entropy_floor);
  };
  record();
  for (int k = 0; k < steps; ++k) {
    flat = spsa_step(loss, flat, k, gains, derive_seed(seed, "spsa", {static_cast<std::uint64_t>(k)}));
    record();
  }
  r.params = ParamSet::unflatten(spec, flat);
  return r;
}

EmpiricalDistribution read_histogram(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read histogram file: " + path.string());
  EmpiricalDistribution d;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string bits;
    std::uint64_t count = 0;
    if (!(ls >> bits)) continue;
    if (!(ls >> count) || bits.find_first_not_of("01") != std::string::npos) {
      throw ConfigError("malformed histogram line " + std::to_string(line_no));
    }
    if (d.n_bits() == 0) d = EmpiricalDistribution(static_cast<int>(bits.size()));
    if (static_cast<int>(bits.size()) != d.n_bits()) throw ConfigError("histogram widths differ");
    d.add(string_to_index(bits), count);
  }
  if (d.total() == 0) throw ConfigError("histogram file is empty: " + path.string());
  return d;
}

StabilityReport run_stability(const RunConfig& config, const ImageDataset& data, ClassifierHandle* classifier) {
  config.validate();
  StabilityReport report;
  report.prior_bits = config.prior.n_bits;
  const auto root = config.out_dir;
  std::filesystem::create_directories(root);

  for (PriorKind kind : {PriorKind::qcbm, PriorKind::rbm}) {
    for (int steps : config.stability.steps_per_update) {
      const std::string variant =
          std::string(kind == PriorKind::qcbm ? "qcbm" : "rbm") + "_" + std::to_string(steps) + "step";
      for (int s = 0; s < config.stability.seeds; ++s) {
        RunConfig rc = config;
        rc.prior.kind = kind;
        rc.schedule.steps_per_update = steps;
        rc.seed = derive_seed(config.seed, "stability-seed", {static_cast<std::uint64_t>(s)});
        rc.out_dir = root / (variant + "_seed" + std::to_string(s));
        TrainingConfig tc = rc.training_config();
        tc.checkpoints = false;
        const RunSummary sum = run_training(tc, data, classifier);

        StabilityRun run;
        run.variant = variant;
        run.kind = kind;
        run.steps_per_update = steps;
        run.seed = static_cast<std::uint64_t>(s);
        run.entropy = sum.entropy;
        run.min_sampled_entropy = std::numeric_limits<double>::infinity();
        for (const auto& p : sum.entropy) run.min_sampled_entropy = std::min(run.min_sampled_entropy, p.sampled_bits);
        run.final_exact_entropy = sum.entropy.back().exact_bits;
        run.final_inception_score =
            sum.inception_scores.empty() ? std::nan("") : sum.inception_scores.back().second;
        run.final_samples = sum.final_prior_samples;
        report.runs.push_back(std::move(run));
      }
    }
  }

  std::ostringstream md;
  md << std::fixed << std::setprecision(4);
  md << "| variant | seed | min sampled entropy (bits) | final exact entropy (bits) | final IS |\n";
  md << "|---|---|---|---|---|\n";
  for (const auto& r : report.runs) {
    md << "| " << r.variant << " | " << r.seed << " | " << r.min_sampled_entropy << " | " << r.final_exact_entropy
       << " | " << r.final_inception_score << " |\n";
  }
  report.table = md.str();

  json j;
  j["prior_bits"] = report.prior_bits;
  j["runs"] = json::array();
  for (const auto& r : report.runs) {
    json traj = json::array();
    for (const auto& p : r.entropy) {
      traj.push_back({{"event", p.event}, {"batch", p.batch}, {"epoch", p.epoch}, {"exact_bits", p.exact_bits},
                      {"sampled_bits", p.sampled_bits}});
    }
    j["runs"].push_back({{"variant", r.variant},
                         {"seed", r.seed},
                         {"steps_per_update", r.steps_per_update},
                         {"min_sampled_entropy_bits", r.min_sampled_entropy},
                         {"final_exact_entropy_bits", r.final_exact_entropy},
                         {"final_inception_score", std::isnan(r.final_inception_score) ? json(nullptr)
                                                                                        : json(r.final_inception_score)},
                         {"entropy_trajectory", traj}});
  }
  std::ofstream(root / "report.json") << j.dump(2) << '\n';
  std::ofstream(root / "report.md") << report.table;

  for (std::size_t i = 0; i < report.runs.size();) {
    std::size_t end = i, worst = i;
    while (end < report.runs.size() && report.runs[end].variant == report.runs[i].variant) {
      if (report.runs[end].min_sampled_entropy < report.runs[worst].min_sampled_entropy) worst = end;
      ++end;
    }
    const auto& w = report.runs[worst];
    write_pgm_histogram(root / ("worst_" + w.variant + "_histogram.pgm"), w.final_samples.dense());
    i = end;
  }
  return report;
}

}  // namespace bornprior
