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

#include "bornprior/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "bornprior/errors.hpp"
#include "json.hpp"

#ifndef BORNPRIOR_DEFAULT_DATA_DIR
#define BORNPRIOR_DEFAULT_DATA_DIR "data"
#endif

namespace bornprior {

using nlohmann::json;

namespace {

// Reads the known keys of one object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  template <typename Parse, typename T>
  void get_enum(const char* key, T& out, Parse parse) {
    std::string s;
    get(key, s);
    if (j_.contains(key)) out = parse(s);
  }

  void get_path(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + (name_.empty() ? k : name_ + "." + k) + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
  if (version != kConfigVersion) throw ConfigError("unsupported config version " + std::to_string(version));
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (dataset.limit < 0) throw ConfigError("dataset.limit must be >= 0");
  if (stability.seeds < 1 || stability.steps_per_update.empty()) throw ConfigError("invalid stability settings");
  for (int s : stability.steps_per_update)
    if (s < 1) throw ConfigError("stability steps_per_update entries must be >= 1");
  if (qcbm_task.target != "bars_and_stripes" && qcbm_task.target != "histogram") {
    throw ConfigError("qcbm_task.target must be bars_and_stripes or histogram");
  }
  if (qcbm_task.oracle != "exact" && qcbm_task.oracle != "shots") throw ConfigError("qcbm_task.oracle must be exact or shots");
  if (qcbm_task.steps < 1 || qcbm_task.report_every < 1) throw ConfigError("qcbm_task steps and report_every must be >= 1");
  training_config().validate();
}

TrainingConfig RunConfig::training_config() const {
  TrainingConfig t;
  const int width = prior.sample_width();
  t.gan = gan_preset(preset, width, {1, 28 / preset_downsample(preset), 28 / preset_downsample(preset)});
  t.gan.generator_adam = {gan.generator_lr, gan.beta1, gan.beta2, 1e-8};
  t.gan.discriminator_adam = {gan.discriminator_lr, gan.beta1, gan.beta2, 1e-8};
  t.gan.label_smoothing = gan.label_smoothing;
  t.gan.label_flip_fraction = gan.label_flip_fraction;
  t.gan.generator_loss = gan.generator_loss;
  t.prior = prior;
  t.schedule = schedule;
  t.backend = backend;
  t.eval = eval;
  t.seed = seed;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.out_dir = out_dir;
  t.pool_thread = pool_thread;
  return t;
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section top(root, "");
  top.get("version", c.version);
  if (!root.contains("version")) throw ConfigError("config must declare a version");
  if (c.version != kConfigVersion) throw ConfigError("unsupported config version " + std::to_string(c.version));
  top.get("seed", c.seed);
  top.get("epochs", c.epochs);
  top.get("batch_size", c.batch_size);
  top.get_path("out_dir", c.out_dir);
  top.get_enum("preset", c.preset, parse_preset);
  top.get("pool_thread", c.pool_thread);

  if (top.has("dataset")) {
    Section s(top.at("dataset"), "dataset");
    s.get_path("images", c.dataset.images);
    s.get_path("labels", c.dataset.labels);
    s.get("limit", c.dataset.limit);
    s.finish();
  }
  if (top.has("prior")) {
    Section s(top.at("prior"), "prior");
    s.get_enum("kind", c.prior.kind, parse_prior_kind);
    s.get("n_bits", c.prior.n_bits);
    s.get("layers", c.prior.layers);
    s.get_enum("topology", c.prior.topology, parse_topology);
    s.get("nll_epsilon", c.prior.nll_epsilon);
    s.get_enum("latent_source", c.prior.latent_source, parse_latent_source);
    s.finish();
  }
  if (top.has("spsa")) {
    Section s(top.at("spsa"), "spsa");
    s.get("a", c.prior.spsa.a);
    s.get("c", c.prior.spsa.c);
    s.get("stability", c.prior.spsa.stability);
    s.get("alpha", c.prior.spsa.alpha);
    s.get("gamma", c.prior.spsa.gamma);
    s.finish();
  }
  if (top.has("rbm")) {
    Section s(top.at("rbm"), "rbm");
    s.get("hidden", c.prior.rbm.hidden);
    s.get("step_size", c.prior.rbm.step_size);
    s.get("cd_k", c.prior.rbm.cd_k);
    s.get("chains", c.prior.rbm.chains);
    s.get("burn_in", c.prior.rbm.burn_in);
    s.finish();
  }
  if (top.has("gan")) {
    Section s(top.at("gan"), "gan");
    s.get("generator_lr", c.gan.generator_lr);
    s.get("discriminator_lr", c.gan.discriminator_lr);
    s.get("beta1", c.gan.beta1);
    s.get("beta2", c.gan.beta2);
    s.get("label_smoothing", c.gan.label_smoothing);
    s.get("label_flip_fraction", c.gan.label_flip_fraction);
    s.get_enum("generator_loss", c.gan.generator_loss, parse_generator_loss);
    s.finish();
  }
  if (top.has("schedule")) {
    Section s(top.at("schedule"), "schedule");
    s.get("update_every_batches", c.schedule.update_every_batches);
    s.get("steps_per_update", c.schedule.steps_per_update);
    s.get("freeze_after_epochs", c.schedule.freeze_after_epochs);
    s.get("prior_shots", c.schedule.prior_shots);
    s.get("resample_pool_shots", c.schedule.resample_pool_shots);
    s.finish();
  }
  if (top.has("backend")) {
    Section s(top.at("backend"), "backend");
    s.get_enum("kind", c.backend.kind, parse_backend_kind);
    s.get("p1", c.backend.noise.p1);
    s.get("p2", c.backend.noise.p2);
    s.get("readout", c.backend.noise.readout);
    s.get_path("replay_path", c.backend.replay_path);
    s.finish();
  }
  if (top.has("eval")) {
    Section s(top.at("eval"), "eval");
    s.get("inception_samples", c.eval.inception_samples);
    s.get("inception_splits", c.eval.inception_splits);
    s.get("grid_images", c.eval.grid_images);
    s.get("score_epoch_zero", c.eval.score_epoch_zero);
    s.finish();
  }
  if (top.has("classifier")) {
    Section s(top.at("classifier"), "classifier");
    s.get_path("path", c.classifier.path);
    s.get("epochs", c.classifier.train.epochs);
    s.get("batch_size", c.classifier.train.batch_size);
    s.get("learning_rate", c.classifier.train.learning_rate);
    s.get("holdout_fraction", c.classifier.train.holdout_fraction);
    s.get("accuracy_threshold", c.classifier.train.accuracy_threshold);
    s.finish();
  }
  if (top.has("qcbm_task")) {
    Section s(top.at("qcbm_task"), "qcbm_task");
    s.get("target", c.qcbm_task.target);
    s.get("rows", c.qcbm_task.rows);
    s.get("cols", c.qcbm_task.cols);
    s.get_path("histogram", c.qcbm_task.histogram);
    s.get("steps", c.qcbm_task.steps);
    s.get("oracle", c.qcbm_task.oracle);
    s.get("report_every", c.qcbm_task.report_every);
    s.finish();
  }
  if (top.has("stability")) {
    Section s(top.at("stability"), "stability");
    s.get("seeds", c.stability.seeds);
    s.get("steps_per_update", c.stability.steps_per_update);
    s.finish();
  }
  top.finish();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str());
}

std::string dump_run_config(const RunConfig& c) {
  json j;
  j["version"] = c.version;
  j["seed"] = c.seed;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["out_dir"] = c.out_dir.string();
  j["preset"] = preset_name(c.preset);
  j["pool_thread"] = c.pool_thread;
  j["dataset"] = {{"images", c.dataset.images.string()}, {"labels", c.dataset.labels.string()}, {"limit", c.dataset.limit}};
  j["prior"] = {{"kind", prior_kind_name(c.prior.kind)},
                {"n_bits", c.prior.n_bits},
                {"layers", c.prior.layers},
                {"topology", topology_name(c.prior.topology)},
                {"nll_epsilon", c.prior.nll_epsilon},
                {"latent_source", latent_source_name(c.prior.latent_source)}};
  j["spsa"] = {{"a", c.prior.spsa.a},
               {"c", c.prior.spsa.c},
               {"stability", c.prior.spsa.stability},
               {"alpha", c.prior.spsa.alpha},
               {"gamma", c.prior.spsa.gamma}};
  j["rbm"] = {{"hidden", c.prior.rbm.hidden},
              {"step_size", c.prior.rbm.step_size},
              {"cd_k", c.prior.rbm.cd_k},
              {"chains", c.prior.rbm.chains},
              {"burn_in", c.prior.rbm.burn_in}};
  j["gan"] = {{"generator_lr", c.gan.generator_lr},
              {"discriminator_lr", c.gan.discriminator_lr},
              {"beta1", c.gan.beta1},
              {"beta2", c.gan.beta2},
              {"label_smoothing", c.gan.label_smoothing},
              {"label_flip_fraction", c.gan.label_flip_fraction},
              {"generator_loss", generator_loss_name(c.gan.generator_loss)}};
  j["schedule"] = {{"update_every_batches", c.schedule.update_every_batches},
                   {"steps_per_update", c.schedule.steps_per_update},
                   {"freeze_after_epochs", c.schedule.freeze_after_epochs},
                   {"prior_shots", c.schedule.prior_shots},
                   {"resample_pool_shots", c.schedule.resample_pool_shots}};
  j["backend"] = {{"kind", backend_kind_name(c.backend.kind)},
                  {"p1", c.backend.noise.p1},
                  {"p2", c.backend.noise.p2},
                  {"readout", c.backend.noise.readout},
                  {"replay_path", c.backend.replay_path.string()}};
  j["eval"] = {{"inception_samples", c.eval.inception_samples},
               {"inception_splits", c.eval.inception_splits},
               {"grid_images", c.eval.grid_images},
               {"score_epoch_zero", c.eval.score_epoch_zero}};
  j["classifier"] = {{"path", c.classifier.path.string()},
                     {"epochs", c.classifier.train.epochs},
                     {"batch_size", c.classifier.train.batch_size},
                     {"learning_rate", c.classifier.train.learning_rate},
                     {"holdout_fraction", c.classifier.train.holdout_fraction},
                     {"accuracy_threshold", c.classifier.train.accuracy_threshold}};
  j["qcbm_task"] = {{"target", c.qcbm_task.target},
                    {"rows", c.qcbm_task.rows},
                    {"cols", c.qcbm_task.cols},
                    {"histogram", c.qcbm_task.histogram.string()},
                    {"steps", c.qcbm_task.steps},
                    {"oracle", c.qcbm_task.oracle},
                    {"report_every", c.qcbm_task.report_every}};
  j["stability"] = {{"seeds", c.stability.seeds}, {"steps_per_update", c.stability.steps_per_update}};
  return j.dump(2);
}

int preset_downsample(Preset preset) {
  switch (preset) {
    case Preset::toy: return 7;
    case Preset::desk: return 2;
    case Preset::full: return 1;
  }
  return 1;
}

std::filesystem::path default_data_dir() { return BORNPRIOR_DEFAULT_DATA_DIR; }

ImageDataset load_dataset(const RunConfig& config) {
  const auto images =
      config.dataset.images.empty() ? default_data_dir() / "mnist5k-images-idx3-ubyte.gz" : config.dataset.images;
  const auto labels =
      config.dataset.labels.empty() ? default_data_dir() / "mnist5k-labels-idx1-ubyte.gz" : config.dataset.labels;
  ImageDataset d = load_mnist(images, labels, config.dataset.limit);
  const int f = preset_downsample(config.preset);
  return f == 1 ? d : downsample(d, f);
}

}  // namespace bornprior
