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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "bornprior/aan.hpp"
#include "bornprior/config.hpp"
#include "bornprior/data.hpp"
#include "bornprior/errors.hpp"
#include "bornprior/experiments.hpp"
#include "bornprior/gan.hpp"
#include "bornprior/metrics.hpp"
#include "bornprior/random.hpp"
#include "json.hpp"

namespace bp = bornprior;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> epochs;
  std::optional<std::string> preset;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--preset", f.preset, "Network preset")->check(CLI::IsMember({"toy", "desk", "full"}));
  cmd->add_flag("--quiet", f.quiet, "Suppress progress output");
}

bp::RunConfig resolve(const CommonFlags& f) {
  bp::RunConfig c = f.config.empty() ? bp::RunConfig{} : bp::load_run_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out_dir = *f.out;
  if (f.epochs) c.epochs = *f.epochs;
  if (f.preset) c.preset = bp::parse_preset(*f.preset);
  return c;
}

void write_resolved(const bp::RunConfig& c) {
  std::filesystem::create_directories(c.out_dir);
  std::ofstream(c.out_dir / "config.json") << bp::dump_run_config(c) << '\n';
}

std::optional<bp::ClassifierHandle> obtain_classifier(const bp::RunConfig& c, const bp::ImageDataset& data,
                                                      bool verbose) {
  if (c.eval.inception_samples == 0) return std::nullopt;
  if (!c.classifier.path.empty()) return bp::load_classifier(c.classifier.path);
  bp::ClassifierConfig cc = c.classifier.train;
  cc.seed = bp::derive_seed(c.seed, "classifier");
  bp::ClassifierHandle h = bp::train_classifier(data, cc);
  bp::save_classifier(c.out_dir / "classifier.bpnn", h);
  if (verbose) std::cerr << "classifier held-out accuracy " << h.validation_accuracy << '\n';
  if (h.below_threshold) {
    std::cerr << "warning: classifier accuracy " << h.validation_accuracy << " is below the threshold "
              << cc.accuracy_threshold << '\n';
  }
  return h;
}

int cmd_train_qcbm(const CommonFlags& f) {
  bp::RunConfig c = resolve(f);
  c.validate();
  const auto& task = c.qcbm_task;
  bp::EmpiricalDistribution target;
  bp::AnsatzSpec spec;
  spec.layers = c.prior.layers;
  spec.topology = c.prior.topology;
  if (task.target == "bars_and_stripes") {
    target = bp::bars_and_stripes(task.rows, task.cols);
    spec.n_qubits = task.rows * task.cols;
    spec.basis_mode = bp::BasisMode::none;
  } else {
    if (task.histogram.empty()) throw bp::ConfigError("qcbm_task.histogram is required for the histogram target");
    target = bp::read_histogram(task.histogram);
    spec.basis_mode = c.prior.ansatz().basis_mode;
    if (spec.basis_mode != bp::BasisMode::none && target.n_bits() % 2 != 0) {
      throw bp::ConfigError("multi-basis histogram must have an even width");
    }
    spec.n_qubits = spec.basis_mode == bp::BasisMode::none ? target.n_bits() : target.n_bits() / 2;
  }
  write_resolved(c);
  const auto oracle = task.oracle == "exact" ? bp::QcbmOracle::exact : bp::QcbmOracle::shots;
  const auto r = bp::train_qcbm(spec, target, task.steps, c.prior.spsa, oracle, c.schedule.prior_shots, c.seed,
                                c.prior.nll_epsilon);

  std::ofstream curve(c.out_dir / "qcbm_curve.jsonl");
  json summary = json::array();
  double best = r.nll.front();
  for (std::size_t k = 0; k < r.nll.size(); ++k) {
    best = std::min(best, r.nll[k]);
    curve << json{{"step", k}, {"nll", r.nll[k]}, {"kl", r.kl[k]}}.dump() << '\n';
    if (k % static_cast<std::size_t>(task.report_every) == 0 || k + 1 == r.nll.size()) {
      summary.push_back({{"step", k}, {"best_nll", best}});
    }
  }
  json report{{"n_qubits", spec.n_qubits},
              {"layers", spec.layers},
              {"topology", bp::topology_name(spec.topology)},
              {"basis_mode", bp::basis_mode_name(spec.basis_mode)},
              {"parameters", bp::param_count(spec)},
              {"oracle", task.oracle},
              {"steps", task.steps},
              {"warm_start_nll", r.nll.front()},
              {"final_nll", r.nll.back()},
              {"entropy_floor", r.entropy_floor},
              {"gap_closure", r.gap_closure()},
              {"best_nll_summary", summary},
              {"final_parameters", r.params.flatten()}};
  std::ofstream(c.out_dir / "qcbm_report.json") << report.dump(2) << '\n';
  std::printf("warm-start NLL %.6f  final NLL %.6f  floor %.6f  gap closure %.4f\n", r.nll.front(), r.nll.back(),
              r.entropy_floor, r.gap_closure());
  return 0;
}

int run_gan_like(bp::RunConfig c, bool quiet) {
  c.validate();
  const bp::ImageDataset data = bp::load_dataset(c);
  write_resolved(c);
  auto classifier = obtain_classifier(c, data, !quiet);
  bp::TrainingConfig t = c.training_config();
  t.verbose = !quiet;
  const auto s = bp::run_training(t, data, classifier ? &*classifier : nullptr);
  std::printf("%d epochs, %d batches/epoch, %d prior-update events", c.epochs, s.batches_per_epoch, s.update_events);
  if (s.freeze_epoch >= 0) std::printf(", prior frozen at epoch %d", s.freeze_epoch);
  if (!s.inception_scores.empty()) std::printf(", final IS %.4f", s.inception_scores.back().second);
  std::printf("\n");
  return 0;
}

int cmd_train_gan(const CommonFlags& f) {
  bp::RunConfig c = resolve(f);
  c.prior.kind = bp::PriorKind::bernoulli_fixed;
  return run_gan_like(c, f.quiet);
}

int cmd_train_aan(const CommonFlags& f) { return run_gan_like(resolve(f), f.quiet); }

int cmd_stability(const CommonFlags& f) {
  bp::RunConfig c = resolve(f);
  c.validate();
  const bp::ImageDataset data = bp::load_dataset(c);
  write_resolved(c);
  auto classifier = obtain_classifier(c, data, !f.quiet);
  const auto report = bp::run_stability(c, data, classifier ? &*classifier : nullptr);
  std::cout << report.table;
  return 0;
}

int cmd_train_classifier(const CommonFlags& f) {
  bp::RunConfig c = resolve(f);
  c.validate();
  const bp::ImageDataset data = bp::load_dataset(c);
  std::filesystem::create_directories(c.out_dir);
  bp::ClassifierConfig cc = c.classifier.train;
  cc.seed = bp::derive_seed(c.seed, "classifier");
  const auto h = bp::train_classifier(data, cc);
  bp::save_classifier(c.out_dir / "classifier.bpnn", h);
  std::printf("held-out accuracy %.4f%s\n", h.validation_accuracy, h.below_threshold ? " (below threshold)" : "");
  return 0;
}

struct EvalFlags {
  std::string checkpoint;
  std::string prior;
  std::string classifier;
  std::optional<int> samples;
  bool real = false;
};

int cmd_eval_is(const CommonFlags& f, const EvalFlags& e) {
  bp::RunConfig c = resolve(f);
  c.validate();
  const int samples = e.samples.value_or(c.eval.inception_samples);
  if (samples < 1) throw bp::ConfigError("sample count must be >= 1");
  if (e.classifier.empty()) throw bp::ConfigError("--classifier is required");
  bp::ClassifierHandle classifier = bp::load_classifier(e.classifier);
  std::vector<double> posteriors;
  if (e.real) {
    const bp::ImageDataset data = bp::load_dataset(c);
    std::vector<std::size_t> idx(static_cast<std::size_t>(std::min(samples, data.count)));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    posteriors = bp::classify(classifier, bp::gather_images(data, idx));
  } else {
    if (e.checkpoint.empty()) throw bp::ConfigError("--checkpoint or --real is required");
    auto loaded = bp::nn::load_network(e.checkpoint);
    bp::GanState gan;
    gan.generator = std::move(loaded.network);
    const int width = gan.generator.input_shape().at(0);
    std::optional<bp::PriorModel> prior;
    if (!e.prior.empty()) {
      std::ifstream is(e.prior);
      if (!is) throw bp::ConfigError("cannot read prior snapshot: " + e.prior);
      std::stringstream ss;
      ss << is.rdbuf();
      prior.emplace(bp::prior_from_json(ss.str(), c.backend));
      if (prior->width() != width) throw bp::ConfigError("prior width differs from the generator input");
    }
    constexpr int kChunk = 500;
    const std::uint64_t seed = bp::derive_seed(c.seed, "eval-is");
    const bp::SampleBatch z = prior ? prior->sample(static_cast<std::size_t>(samples), seed)
                                    : bp::bernoulli_prior(width, static_cast<std::size_t>(samples), seed);
    for (std::size_t b = 0; b < z.size(); b += kChunk) {
      const auto probs = bp::classify(classifier, bp::generate(gan, z.slice(b, std::min<std::size_t>(kChunk, z.size() - b))));
      posteriors.insert(posteriors.end(), probs.begin(), probs.end());
    }
  }
  const double is = bp::inception_score(posteriors, classifier.class_count, c.eval.inception_splits);
  std::filesystem::create_directories(c.out_dir);
  std::ofstream(c.out_dir / "eval_is.json") << json{{"inception_score", is}, {"samples", posteriors.size() / static_cast<std::size_t>(classifier.class_count)}}.dump(2) << '\n';
  std::printf("inception score %.6f\n", is);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bornprior: quantum-circuit associative adversarial networks"};
  app.require_subcommand(1);
  CommonFlags flags;
  EvalFlags eval;

  auto* qcbm = app.add_subcommand("train-qcbm", "Train a standalone QCBM on Bars-and-Stripes or a histogram file");
  auto* gan = app.add_subcommand("train-gan", "Train the DCGAN baseline with a fixed Bernoulli prior");
  auto* aan = app.add_subcommand("train-aan", "Train a QC-AAN or RBM-AAN");
  auto* is = app.add_subcommand("eval-is", "Inception Score of a generator checkpoint or of dataset images");
  auto* stab = app.add_subcommand("stability", "QCBM vs RBM prior stability comparison");
  auto* cls = app.add_subcommand("train-classifier", "Train the surrogate classifier used for Inception Scores");
  for (auto* cmd : {qcbm, gan, aan, is, stab, cls}) add_common(cmd, flags);
  is->add_option("--checkpoint", eval.checkpoint, "Generator checkpoint (.bpnn)");
  is->add_option("--prior", eval.prior, "Prior snapshot (.json); Bernoulli when omitted");
  is->add_option("--classifier", eval.classifier, "Classifier checkpoint (.bpnn)");
  is->add_option("--samples", eval.samples, "Number of images to score");
  is->add_flag("--real", eval.real, "Score dataset images instead of generated ones");

  CLI11_PARSE(app, argc, argv);
  try {
    if (qcbm->parsed()) return cmd_train_qcbm(flags);
    if (gan->parsed()) return cmd_train_gan(flags);
    if (aan->parsed()) return cmd_train_aan(flags);
    if (is->parsed()) return cmd_eval_is(flags, eval);
    if (stab->parsed()) return cmd_stability(flags);
    if (cls->parsed()) return cmd_train_classifier(flags);
  } catch (const bp::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
