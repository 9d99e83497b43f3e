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

#include "bornprior/aan.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <iostream>

#include "bornprior/errors.hpp"
#include "bornprior/random.hpp"
#include "json.hpp"

namespace bornprior {

using nlohmann::json;

std::string_view prior_kind_name(PriorKind k) {
  switch (k) {
    case PriorKind::bernoulli_fixed: return "bernoulli_fixed";
    case PriorKind::qcbm: return "qcbm";
    case PriorKind::qcbm_orthogonal: return "qcbm_orthogonal";
    case PriorKind::qcbm_trained: return "qcbm_trained";
    case PriorKind::rbm: return "rbm";
  }
  return "qcbm";
}

PriorKind parse_prior_kind(std::string_view s) {
  for (PriorKind k : {PriorKind::bernoulli_fixed, PriorKind::qcbm, PriorKind::qcbm_orthogonal, PriorKind::qcbm_trained,
                      PriorKind::rbm})
    if (prior_kind_name(k) == s) return k;
  throw ConfigError("unknown prior kind: " + std::string(s));
}

bool is_qcbm(PriorKind k) {
  return k == PriorKind::qcbm || k == PriorKind::qcbm_orthogonal || k == PriorKind::qcbm_trained;
}

std::string_view latent_source_name(LatentSource s) { return s == LatentSource::real ? "real" : "real_and_fake"; }

LatentSource parse_latent_source(std::string_view s) {
  if (s == "real") return LatentSource::real;
  if (s == "real_and_fake") return LatentSource::real_and_fake;
  throw ConfigError("unknown latent source: " + std::string(s));
}

void ScheduleConfig::validate() const {
  if (update_every_batches < 1 || steps_per_update < 1 || freeze_after_epochs < 1 || prior_shots < 1 ||
      resample_pool_shots < 1) {
    throw ConfigError("schedule values must all be positive");
  }
}

void RbmPriorConfig::validate() const {
  if (hidden < 0) throw ConfigError("rbm hidden must be >= 0");
  if (!(step_size > 0.0)) throw ConfigError("rbm step_size must be > 0");
  if (cd_k < 1 || chains < 1 || burn_in < 0) throw ConfigError("rbm cd_k, chains >= 1 and burn_in >= 0 required");
}

void PriorConfig::validate() const {
  if (n_bits < 1) throw ConfigError("prior n_bits must be >= 1");
  if (!(nll_epsilon > 0.0)) throw ConfigError("nll_epsilon must be > 0");
  if (is_qcbm(kind)) {
    ansatz().validate();
    spsa.validate();
  }
  if (kind == PriorKind::rbm) rbm.validate();
}

AnsatzSpec PriorConfig::ansatz() const {
  AnsatzSpec a;
  a.n_qubits = n_bits;
  a.layers = layers;
  a.topology = topology;
  a.basis_mode = kind == PriorKind::qcbm_orthogonal ? BasisMode::orthogonal
                 : kind == PriorKind::qcbm_trained  ? BasisMode::trained
                                                    : BasisMode::none;
  return a;
}

int PriorConfig::sample_width() const {
  return kind == PriorKind::qcbm_orthogonal || kind == PriorKind::qcbm_trained ? 2 * n_bits : n_bits;
}

PriorModel::PriorModel(const PriorConfig& config, const BackendSpec& backend, std::uint64_t seed) : config_(config) {
  config_.validate();
  if (is_qcbm(config_.kind)) {
    ansatz_ = config_.ansatz();
    qcbm_ = warm_start(ansatz_);
    backend_ = std::make_shared<SamplerBackend>(backend);
  } else if (config_.kind == PriorKind::rbm) {
    const int hidden = config_.rbm.hidden == 0 ? config_.n_bits : config_.rbm.hidden;
    rbm_ = RbmParams::random(config_.n_bits, hidden, 0.01, derive_seed(seed, "rbm-init"));
  }
}

void PriorModel::set_qcbm_params(ParamSet p) {
  check_params(ansatz_, p);
  qcbm_ = std::move(p);
}

void PriorModel::set_rbm_params(RbmParams p) {
  p.validate();
  if (p.n_visible != rbm_.n_visible || p.n_hidden != rbm_.n_hidden) throw ConfigError("RBM shape changed");
  rbm_ = std::move(p);
}

std::vector<double> PriorModel::parameters() const {
  if (is_qcbm(config_.kind)) return qcbm_.flatten();
  if (config_.kind == PriorKind::rbm) return rbm_.flatten();
  return {};
}

SampleBatch PriorModel::sample(std::size_t count, std::uint64_t seed) const {
  if (is_qcbm(config_.kind)) return draw_multibasis(*backend_, ansatz_, qcbm_, count, seed);
  if (config_.kind == PriorKind::rbm) {
    return rbm_sample(rbm_, count, static_cast<std::size_t>(config_.rbm.chains), config_.rbm.burn_in, seed);
  }
  return bernoulli_prior(config_.n_bits, count, seed);
}

std::vector<double> PriorModel::exact_distribution() const {
  const int w = width();
  if (w > 20) throw ConfigError("exact prior distribution limited to 20 bits");
  if (config_.kind == PriorKind::rbm) return exact_visible_distribution(rbm_);
  if (!is_qcbm(config_.kind)) return std::vector<double>(std::size_t{1} << w, std::ldexp(1.0, -w));
  const auto pc = model_distribution(ansatz_, qcbm_, Basis::computational);
  if (ansatz_.basis_mode == BasisMode::none) return pc;
  const auto pp = model_distribution(ansatz_, qcbm_, Basis::post_rotated);
  std::vector<double> out(pc.size() * pp.size());
  for (std::size_t a = 0; a < pc.size(); ++a)
    for (std::size_t b = 0; b < pp.size(); ++b) out[a * pp.size() + b] = pc[a] * pp[b];
  return out;
}

double PriorModel::exact_entropy_bits() const {
  if (is_qcbm(config_.kind)) {
    double h = shannon_entropy(model_distribution(ansatz_, qcbm_, Basis::computational));
    if (ansatz_.basis_mode != BasisMode::none) h += shannon_entropy(model_distribution(ansatz_, qcbm_, Basis::post_rotated));
    return h;
  }
  if (config_.kind == PriorKind::rbm) return shannon_entropy(exact_visible_distribution(rbm_));
  return static_cast<double>(config_.n_bits);
}

double PriorModel::exact_nll(const EmpiricalDistribution& data) const {
  if (data.n_bits() != width()) throw ConfigError("latent data width differs from prior width");
  if (is_qcbm(config_.kind)) return multibasis_nll(ansatz_, qcbm_, data, config_.nll_epsilon);
  return clipped_nll(exact_distribution(), data, config_.nll_epsilon);
}

double PriorModel::oracle_loss(std::span<const double> params, const EmpiricalDistribution& data, int shots,
                               std::uint64_t seed) const {
  if (!is_qcbm(config_.kind)) throw ConfigError("oracle_loss applies to QCBM priors");
  const ParamSet p = ParamSet::unflatten(ansatz_, params);
  if (backend_->kind() == BackendKind::exact) return multibasis_nll(ansatz_, p, data, config_.nll_epsilon);
  const auto hist = EmpiricalDistribution::from_batch(
      draw_multibasis(*backend_, ansatz_, p, static_cast<std::size_t>(shots), seed));
  if (ansatz_.basis_mode == BasisMode::none) return clipped_nll(hist, data, config_.nll_epsilon);
  const int n = ansatz_.n_qubits;
  return multibasis_nll(ansatz_, hist.marginal(0, n), hist.marginal(n, n), data, config_.nll_epsilon);
}

std::string prior_to_json(const PriorModel& prior) {
  const auto& c = prior.config();
  json j{{"kind", prior_kind_name(c.kind)},
         {"n_bits", c.n_bits},
         {"layers", c.layers},
         {"topology", topology_name(c.topology)},
         {"frozen", prior.frozen()},
         {"parameters", prior.parameters()}};
  if (c.kind == PriorKind::rbm) j["hidden"] = prior.rbm_params().n_hidden;
  return j.dump(2);
}

PriorModel prior_from_json(const std::string& text, const BackendSpec& backend) {
  try {
    const json j = json::parse(text);
    PriorConfig c;
    c.kind = parse_prior_kind(j.at("kind").get<std::string>());
    c.n_bits = j.at("n_bits").get<int>();
    c.layers = j.at("layers").get<int>();
    c.topology = parse_topology(j.at("topology").get<std::string>());
    if (j.contains("hidden")) c.rbm.hidden = j.at("hidden").get<int>();
    PriorModel p(c, backend, 0);
    const auto flat = j.at("parameters").get<std::vector<double>>();
    if (is_qcbm(c.kind)) p.set_qcbm_params(ParamSet::unflatten(p.ansatz(), flat));
    if (c.kind == PriorKind::rbm) p.set_rbm_params(RbmParams::unflatten(c.n_bits, p.rbm_params().n_hidden, flat));
    if (j.at("frozen").get<bool>()) p.freeze();
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed prior snapshot: ") + e.what());
  }
}

std::string_view update_status_name(UpdateStatus s) {
  switch (s) {
    case UpdateStatus::applied: return "applied";
    case UpdateStatus::noop: return "noop";
    case UpdateStatus::rejected_frozen: return "rejected_frozen";
  }
  return "noop";
}

UpdateStatus prior_update(PriorModel& prior, const EmpiricalDistribution& latent, const ScheduleConfig& schedule,
                          std::uint64_t seed) {
  if (prior.frozen()) return UpdateStatus::rejected_frozen;
  if (prior.kind() == PriorKind::bernoulli_fixed) return UpdateStatus::noop;
  schedule.validate();
  if (latent.n_bits() != prior.width()) throw ConfigError("latent data width differs from prior width");
  if (latent.total() == 0) throw ConfigError("latent histogram is empty");
  if (prior.kind() == PriorKind::rbm) {
    SampleBatch rows(latent.n_bits());
    for (const auto& [idx, c] : latent.counts())
      for (std::uint64_t i = 0; i < c; ++i) rows.push_index(idx);
    RbmParams p = prior.rbm_params();
    const auto& rc = prior.config().rbm;
    for (int s = 0; s < schedule.steps_per_update; ++s) {
      cd_update(p, rows, rc.cd_k, rc.step_size, derive_seed(seed, "cd", {static_cast<std::uint64_t>(s)}));
    }
    prior.set_rbm_params(std::move(p));
    return UpdateStatus::applied;
  }
  const LossOracle oracle = [&](std::span<const double> params, std::uint64_t s) {
    return prior.oracle_loss(params, latent, schedule.prior_shots, s);
  };
  std::vector<double> flat = prior.qcbm_params().flatten();
  for (int s = 0; s < schedule.steps_per_update; ++s) {
    const int k = prior.next_spsa_iteration();
    flat = spsa_step(oracle, flat, k, prior.config().spsa, derive_seed(seed, "spsa", {static_cast<std::uint64_t>(k)}));
  }
  prior.set_qcbm_params(ParamSet::unflatten(prior.ansatz(), flat));
  return UpdateStatus::applied;
}

nn::Tensor extract_latent(const GanConfig& config, nn::Network& discriminator, const nn::Tensor& images) {
  const auto& specs = discriminator.specs();
  if (specs.size() < 4 || specs != config.discriminator || specs[config.latent_layer()].kind != nn::LayerKind::sigmoid) {
    throw ConfigError("discriminator has no designated latent layer");
  }
  auto r = discriminator.forward(images, nn::Mode::eval);
  return std::move(r.cache.layers[config.latent_layer()].output);
}

SampleBatch binarize_latent(const nn::Tensor& activations) {
  if (activations.rank() != 2) throw ConfigError("latent activations must be [B, width]");
  SampleBatch out(activations.dim(1));
  out.reserve(static_cast<std::size_t>(activations.dim(0)));
  std::vector<std::uint8_t> row(static_cast<std::size_t>(activations.dim(1)));
  for (int i = 0; i < activations.dim(0); ++i) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double a = activations[static_cast<std::size_t>(i) * row.size() + j];
      if (!std::isfinite(a)) throw ConfigError("non-finite latent activation");
      row[j] = a > 0.5 ? 1 : 0;
    }
    out.push_back(row);
  }
  return out;
}

void TrainingConfig::validate() const {
  gan.validate();
  prior.validate();
  schedule.validate();
  backend.noise.validate();
  if (gan.prior_dim != prior.sample_width()) {
    throw ConfigError("generator input width " + std::to_string(gan.prior_dim) + " differs from prior sample width " +
                      std::to_string(prior.sample_width()));
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (eval.inception_samples < 0 || eval.inception_splits < 1 || eval.grid_images < 0) {
    throw ConfigError("invalid evaluation settings");
  }
}

namespace {

class JsonLines {
 public:
  explicit JsonLines(const std::filesystem::path& path) : os_(path, std::ios::trunc) {
    if (!os_) throw StateError("cannot write " + path.string());
  }
  void write(const json& j) { os_ << j.dump() << '\n'; }
  void flush() { os_.flush(); }

 private:
  std::ofstream os_;
};

nn::Tensor generate_images(GanState& gan, const PriorModel& prior, std::size_t count, std::uint64_t seed) {
  const SampleBatch z = prior.sample(count, seed);
  return generate(gan, z);
}

double score_generator(GanState& gan, const PriorModel& prior, ClassifierHandle& classifier, const EvalConfig& eval,
                       std::uint64_t seed) {
  constexpr int kChunk = 500;
  std::vector<double> posteriors;
  const SampleBatch z = prior.sample(static_cast<std::size_t>(eval.inception_samples), seed);
  for (std::size_t b = 0; b < z.size(); b += kChunk) {
    const auto chunk = z.slice(b, std::min<std::size_t>(kChunk, z.size() - b));
    const auto probs = classify(classifier, generate(gan, chunk));
    posteriors.insert(posteriors.end(), probs.begin(), probs.end());
  }
  return inception_score(posteriors, classifier.class_count, eval.inception_splits);
}

}  // namespace

RunSummary run_training(const TrainingConfig& cfg, const ImageDataset& data, ClassifierHandle* classifier) {
  cfg.validate();
  if (nn::Shape{1, data.height, data.width} != cfg.gan.image_shape) {
    throw ConfigError("dataset images are " + std::to_string(data.height) + "x" + std::to_string(data.width) +
                      " but the networks expect " + nn::shape_string(cfg.gan.image_shape));
  }
  if (cfg.batch_size > data.count) throw ConfigError("batch_size exceeds dataset size");
  std::filesystem::create_directories(cfg.out_dir);
  JsonLines metrics(cfg.out_dir / "metrics.jsonl");
  JsonLines events(cfg.out_dir / "prior_events.jsonl");

  const std::uint64_t seed = cfg.seed;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const bool bernoulli = cfg.prior.kind == PriorKind::bernoulli_fixed;
  GanState gan = init_gan(cfg.gan, derive_seed(seed, "gan"));
  PriorModel prior(cfg.prior, cfg.backend, derive_seed(seed, "prior-model"));

  RunSummary summary;
  std::unique_ptr<SamplePool> pool;
  const auto chunk = static_cast<std::size_t>(cfg.schedule.resample_pool_shots);
  auto install_generation = [&] {
    auto snapshot = std::make_shared<const PriorModel>(prior);
    pool->advance([snapshot, chunk, seed](std::uint64_t g, std::uint64_t k) {
      return snapshot->sample(chunk, derive_seed(seed, "pool", {g, k}));
    });
  };
  if (!bernoulli) {
    pool = std::make_unique<SamplePool>(prior.width(), 2 * chunk);
    install_generation();
    if (cfg.pool_thread) pool->start();
  }

  auto entropy_point = [&](int event, std::int64_t global, int epoch) {
    EntropyPoint p;
    p.event = event;
    p.batch = global;
    p.epoch = epoch;
    p.exact_bits = prior.exact_entropy_bits();
    p.sampled_bits = shannon_entropy(EmpiricalDistribution::from_batch(
        prior.sample(chunk, derive_seed(seed, "entropy", {static_cast<std::uint64_t>(event)}))));
    summary.entropy.push_back(p);
    return p;
  };

  auto end_of_epoch = [&](int epoch) {
    if (classifier != nullptr && cfg.eval.inception_samples > 0 && (epoch > 0 || cfg.eval.score_epoch_zero)) {
      const double is = score_generator(gan, prior, *classifier, cfg.eval,
                                        derive_seed(seed, "eval", {static_cast<std::uint64_t>(epoch)}));
      summary.inception_scores.emplace_back(epoch, is);
      metrics.write({{"epoch", epoch}, {"inception_score", is}});
      if (cfg.verbose) std::cerr << "epoch " << epoch << " inception_score " << is << '\n';
    }
    if (cfg.eval.grid_images > 0) {
      write_pgm_grid(cfg.out_dir / ("grid_epoch" + std::to_string(epoch) + ".pgm"),
                     generate_images(gan, prior, static_cast<std::size_t>(cfg.eval.grid_images),
                                     derive_seed(seed, "grid")),
                     8);
    }
    if (cfg.checkpoints && epoch > 0) {
      save_gan(cfg.out_dir / "checkpoints", gan, epoch);
      std::ofstream(cfg.out_dir / "checkpoints" / ("prior_epoch" + std::to_string(epoch) + ".json"))
          << prior_to_json(prior) << '\n';
    }
    metrics.flush();
    events.flush();
  };

  {
    const EntropyPoint p = entropy_point(0, 0, 0);
    events.write({{"event", "init"},
                  {"kind", prior_kind_name(prior.kind())},
                  {"exact_entropy_bits", p.exact_bits},
                  {"sampled_entropy_bits", p.sampled_bits}});
  }
  end_of_epoch(0);

  struct WindowEntry {
    std::vector<std::size_t> indices;
    SampleBatch prior_batch;
  };
  std::deque<WindowEntry> window;
  std::int64_t global = 0;
  const auto update_every = static_cast<std::size_t>(cfg.schedule.update_every_batches);

  for (int e = 0; e < cfg.epochs; ++e) {
    if (!prior.frozen() && e >= cfg.schedule.freeze_after_epochs) {
      prior.freeze();
      summary.freeze_epoch = e;
      summary.prior_parameters_at_freeze = prior.parameters();
      events.write({{"event", "freeze"}, {"epoch", e}, {"batch", global}});
      if (cfg.verbose) std::cerr << "prior frozen at epoch " << e << '\n';
    }
    const auto batches = epoch_batches(static_cast<std::size_t>(data.count), batch, derive_seed(seed, "data"),
                                       static_cast<std::uint64_t>(e));
    summary.batches_per_epoch = static_cast<int>(batches.size());
    for (const auto& idx : batches) {
      const auto g = static_cast<std::uint64_t>(global);
      SampleBatch prior_batch =
          bernoulli ? bernoulli_prior(cfg.prior.n_bits, batch, derive_seed(seed, "prior", {g})) : pool->take(batch);
      const StepMetrics m =
          gan_train_step(cfg.gan, gan, gather_images(data, idx), prior_batch, derive_seed(seed, "step", {g}));
      metrics.write({{"step", m.step},
                     {"d_loss", m.d_loss},
                     {"g_loss", m.g_loss},
                     {"real_score_mean", m.real_score_mean},
                     {"fake_score_mean", m.fake_score_mean}});
      ++global;
      if (prior.frozen()) continue;
      window.push_back({idx, std::move(prior_batch)});
      if (window.size() > update_every) window.pop_front();
      if (static_cast<std::size_t>(global) % update_every != 0) continue;

      // Prior update event.
      const int event = ++summary.update_events;
      summary.update_batches.push_back(global);
      EmpiricalDistribution latent(prior.width());
      UpdateStatus status = UpdateStatus::noop;
      double nll_before = 0.0, nll_after = 0.0;
      if (!bernoulli) {
        for (const auto& w : window) {
          latent.add(binarize_latent(extract_latent(cfg.gan, gan.discriminator, gather_images(data, w.indices))));
          if (cfg.prior.latent_source == LatentSource::real_and_fake) {
            latent.add(binarize_latent(extract_latent(cfg.gan, gan.discriminator, generate(gan, w.prior_batch))));
          }
        }
        nll_before = prior.exact_nll(latent);
        if (cfg.pool_thread) pool->stop();
        status = prior_update(prior, latent, cfg.schedule, derive_seed(seed, "update", {static_cast<std::uint64_t>(event)}));
        install_generation();
        if (cfg.pool_thread) pool->start();
        nll_after = prior.exact_nll(latent);
      } else {
        status = prior_update(prior, latent, cfg.schedule, 0);
      }
      window.clear();
      const EntropyPoint p = entropy_point(event, global, e);
      events.write({{"event", "update"},
                    {"index", event},
                    {"epoch", e},
                    {"batch", global},
                    {"status", update_status_name(status)},
                    {"nll_before", nll_before},
                    {"nll_after", nll_after},
                    {"exact_entropy_bits", p.exact_bits},
                    {"sampled_entropy_bits", p.sampled_bits}});
    }
    if (cfg.verbose) std::cerr << "epoch " << e + 1 << "/" << cfg.epochs << " done, " << global << " batches\n";
    end_of_epoch(e + 1);
  }
  if (pool) pool->stop();
  summary.final_prior_parameters = prior.parameters();
  summary.final_prior_samples = EmpiricalDistribution::from_batch(prior.sample(chunk, derive_seed(seed, "final")));
  return summary;
}

}  // namespace bornprior
