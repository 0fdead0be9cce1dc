/* Copyright (c) 2026 The HybridGait Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#include "hybridgait/trainer.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hybridgait {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (P < 2) throw ConfigError("train.P must be >= 2");
  if (K < 2) throw ConfigError("train.K must be >= 2");
  if (T < 1) throw ConfigError("train.T must be >= 1");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (steps_per_epoch < 0) throw ConfigError("train.steps_per_epoch must be >= 0");
  for (size_t i = 0; i < lr_milestones.size(); ++i) {
    if (lr_milestones[i] >= epochs) throw ConfigError("train.lr_milestones must be < epochs");
    if (lr_milestones[i] < 0) throw ConfigError("train.lr_milestones must be >= 0");
    if (i > 0 && lr_milestones[i] <= lr_milestones[i - 1]) {
      throw ConfigError("train.lr_milestones must be strictly increasing");
    }
  }
  if (!(base_lr > 0)) throw ConfigError("train.base_lr must be positive");
  if (!(lr_gamma > 0)) throw ConfigError("train.lr_gamma must be positive");
  if (weight_decay < 0) throw ConfigError("train.weight_decay must be >= 0");
  if (alpha < 0 || beta < 0) throw ConfigError("train.alpha and train.beta must be >= 0");
  if (k_neighbors < 1 || k_neighbors > kSmplJointCount) throw ConfigError("train.k_neighbors must lie in [1, 24]");
  if (T > model.temporal.max_frames) throw ConfigError("train.T exceeds model.max_frames");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
}

TrainConfig TrainConfig::published() {
  TrainConfig c;
  c.P = 32;
  c.K = 4;
  c.T = 30;
  c.epochs = 1200;
  c.lr_milestones = {200, 600};
  c.model.encoder.channels = {32, 64, 128};
  c.model.part_dim = 256;
  return c;
}

json to_json(const TrainConfig& c) {
  return json{{"format_version", kTrainConfigFormatVersion},
              {"P", c.P},
              {"K", c.K},
              {"T", c.T},
              {"epochs", c.epochs},
              {"steps_per_epoch", c.steps_per_epoch},
              {"base_lr", c.base_lr},
              {"lr_milestones", c.lr_milestones},
              {"lr_gamma", c.lr_gamma},
              {"weight_decay", c.weight_decay},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps},
              {"alpha", c.alpha},
              {"beta", c.beta},
              {"margin", c.margin},
              {"k_neighbors", c.k_neighbors},
              {"view_angle_deg", c.view_angle_deg},
              {"seed", c.seed},
              {"data_root", c.data_root},
              {"out_dir", c.out_dir},
              {"checkpoint_every", c.checkpoint_every},
              {"model", to_json(c.model)}};
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config: expected an object");
  TrainConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "format_version") {
        if (v.get<int>() != kTrainConfigFormatVersion) throw ConfigError("train config: unsupported format_version");
      } else if (key == "P") c.P = v.get<int>();
      else if (key == "K") c.K = v.get<int>();
      else if (key == "T") c.T = v.get<int>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "steps_per_epoch") c.steps_per_epoch = v.get<int>();
      else if (key == "base_lr") c.base_lr = v.get<Real>();
      else if (key == "lr_milestones") c.lr_milestones = v.get<std::vector<int>>();
      else if (key == "lr_gamma") c.lr_gamma = v.get<Real>();
      else if (key == "weight_decay") c.weight_decay = v.get<Real>();
      else if (key == "adam_beta1") c.adam_beta1 = v.get<Real>();
      else if (key == "adam_beta2") c.adam_beta2 = v.get<Real>();
      else if (key == "adam_eps") c.adam_eps = v.get<Real>();
      else if (key == "alpha") c.alpha = v.get<Real>();
      else if (key == "beta") c.beta = v.get<Real>();
      else if (key == "margin") c.margin = v.get<Real>();
      else if (key == "k_neighbors") c.k_neighbors = v.get<int>();
      else if (key == "view_angle_deg") c.view_angle_deg = v.get<Real>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "data_root") c.data_root = v.get<std::string>();
      else if (key == "out_dir") c.out_dir = v.get<std::string>();
      else if (key == "checkpoint_every") c.checkpoint_every = v.get<int>();
      else if (key == "model") c.model = model_config_from_json(v);
      else throw ConfigError("train config: unknown field '" + key + "'");
    } catch (const json::exception& e) {
      throw ConfigError("train config field '" + key + "': " + e.what());
    }
  }
  c.model.temporal.k_neighbors = c.k_neighbors;
  c.validate();
  return c;
}

TrainConfig load_train_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return train_config_from_json(j);
}

Real lr_at(int epoch, const TrainConfig& config) {
  if (epoch < 0) throw ValidationError("lr_at: epoch must be >= 0");
  Real lr = config.base_lr;
  for (int m : config.lr_milestones) {
    if (m <= epoch) lr *= config.lr_gamma;
  }
  return lr;
}

AdamW::AdamW(const nn::ParameterStore& store, Real beta1, Real beta2, Real eps, Real weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
  for (const auto& [name, p] : store.entries()) {
    m.emplace_back(p.numel(), 0.0);
    v.emplace_back(p.numel(), 0.0);
  }
}

void AdamW::step(nn::ParameterStore& store, Real lr) {
  ++t;
  const Real c1 = 1.0 - std::pow(beta1_, static_cast<Real>(t));
  const Real c2 = 1.0 - std::pow(beta2_, static_cast<Real>(t));
  auto& entries = store.entries();
  for (size_t i = 0; i < entries.size(); ++i) {
    nn::Tensor p = entries[i].second;
    auto& w = p.vec();
    const bool has = p.has_grad();
    const auto* g = has ? p.impl()->grad.data() : nullptr;
    for (size_t k = 0; k < w.size(); ++k) {
      const Real gk = has ? g[k] : 0.0;
      w[k] -= lr * weight_decay_ * w[k];
      m[i][k] = beta1_ * m[i][k] + (1 - beta1_) * gk;
      v[i][k] = beta2_ * v[i][k] + (1 - beta2_) * gk * gk;
      w[k] -= lr * (m[i][k] / c1) / (std::sqrt(v[i][k] / c2) + eps_);
    }
  }
}

json to_json(const StepRecord& r) {
  return json{{"step", r.step}, {"epoch", r.epoch}, {"lr", r.lr},
              {"triplet", r.triplet}, {"ce", r.ce}, {"total", r.total}};
}

// ---------------------------------------------------------------------------
// Checkpoint archive: magic, version, header length, JSON header, raw
// little-endian doubles (value, m, v per tensor), FNV-1a checksum.

namespace {

constexpr char kMagic[8] = {'H', 'G', 'A', 'I', 'T', 'C', 'K', 'P'};

struct Fnv {
  std::uint64_t h = 1469598103934665603ull;
  void add(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 1099511628211ull;
  }
};

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  void raw(const void* p, size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    sum.add(p, n);
  }
  template <class T>
  void pod(const T& v) { raw(&v, sizeof(T)); }
  void reals(const std::vector<Real>& v) { raw(v.data(), v.size() * sizeof(Real)); }
  Fnv sum;

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, const fs::path& path) : in_(in), path_(path) {}
  void raw(void* p, size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) throw CheckpointError(path_.string() + ": truncated checkpoint");
    sum.add(p, n);
  }
  template <class T>
  T pod() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }
  std::vector<Real> reals(size_t n) {
    std::vector<Real> v(n);
    raw(v.data(), n * sizeof(Real));
    return v;
  }
  Fnv sum;

 private:
  std::ifstream& in_;
  fs::path path_;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  json tensors = json::array();
  for (size_t i = 0; i < ckpt.names.size(); ++i) tensors.push_back(json{{"name", ckpt.names[i]}, {"shape", ckpt.shapes[i]}});
  const json header{{"config", to_json(ckpt.config)},
                    {"skeleton", ckpt.skeleton_json},
                    {"step", ckpt.step},
                    {"epoch", ckpt.epoch},
                    {"rng_state", ckpt.rng_state},
                    {"adam_t", ckpt.adam_t},
                    {"tensors", tensors}};
  const std::string text = header.dump();
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    Writer w(out);
    w.raw(kMagic, sizeof(kMagic));
    w.pod(kCheckpointFormatVersion);
    w.pod(static_cast<std::uint64_t>(text.size()));
    w.raw(text.data(), text.size());
    for (size_t i = 0; i < ckpt.names.size(); ++i) {
      w.reals(ckpt.values[i]);
      w.reals(ckpt.adam_m[i]);
      w.reals(ckpt.adam_v[i]);
    }
    const std::uint64_t checksum = w.sum.h;
    out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  Reader r(in, path);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw CheckpointError(path.string() + ": not a checkpoint file");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointFormatVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = r.pod<std::uint64_t>();
  if (len > (1ull << 30)) throw CheckpointError(path.string() + ": corrupt header length");
  std::string text(len, '\0');
  r.raw(text.data(), len);
  Checkpoint ckpt;
  try {
    const json header = json::parse(text);
    ckpt.config = train_config_from_json(header.at("config"));
    ckpt.skeleton_json = header.at("skeleton").get<std::string>();
    ckpt.step = header.at("step").get<std::int64_t>();
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.rng_state = header.at("rng_state").get<std::string>();
    ckpt.adam_t = header.at("adam_t").get<std::int64_t>();
    for (const auto& t : header.at("tensors")) {
      ckpt.names.push_back(t.at("name").get<std::string>());
      ckpt.shapes.push_back(t.at("shape").get<nn::Shape>());
    }
  } catch (const std::exception& e) {
    throw CheckpointError(path.string() + ": bad header: " + e.what());
  }
  for (const auto& shape : ckpt.shapes) {
    const size_t n = nn::shape_numel(shape);
    ckpt.values.push_back(r.reals(n));
    ckpt.adam_m.push_back(r.reals(n));
    ckpt.adam_v.push_back(r.reals(n));
  }
  const std::uint64_t expected = r.sum.h;
  std::uint64_t stored = 0;
  in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
  if (in.gcount() != sizeof(stored) || stored != expected) {
    throw CheckpointError(path.string() + ": checksum mismatch (file is corrupt)");
  }
  return ckpt;
}

namespace {

void load_parameters(nn::ParameterStore& store, const Checkpoint& ckpt) {
  const auto& entries = store.entries();
  if (entries.size() != ckpt.names.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(ckpt.names.size()) + " tensors, model has " +
                          std::to_string(entries.size()));
  }
  for (size_t i = 0; i < entries.size(); ++i) {
    nn::Tensor p = entries[i].second;
    if (entries[i].first != ckpt.names[i] || p.shape() != ckpt.shapes[i]) {
      throw CheckpointError("checkpoint tensor " + ckpt.names[i] + " " + nn::shape_str(ckpt.shapes[i]) +
                            " does not match model tensor " + entries[i].first + " " + nn::shape_str(p.shape()));
    }
    p.vec() = ckpt.values[i];
  }
}

Skeleton checkpoint_skeleton(const Checkpoint& ckpt) {
  try {
    return skeleton_from_json_text(ckpt.skeleton_json);
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint skeleton: ") + e.what());
  }
}

}  // namespace

std::unique_ptr<HybridGaitModel> model_from_checkpoint(const Checkpoint& ckpt) {
  auto model = std::make_unique<HybridGaitModel>(ckpt.config.model, checkpoint_skeleton(ckpt));
  load_parameters(model->params(), ckpt);
  return model;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(const TrainConfig& config) : Trainer(config, load_dataset(config.data_root)) {}

Trainer::Trainer(const TrainConfig& config, const DatasetIndex& index) : config_(config), index_(index) {
  config_.model.temporal.k_neighbors = config_.k_neighbors;
  config_.model.num_ids = static_cast<int>(index_.train_identities().size());
  if (config_.model.num_ids < 1) throw DataError("dataset has no training sequences");
  config_.model.seed = config_.seed;
  init(dataset_skeleton(index_));
  rng_.seed(config_.seed ^ 0x9e3779b97f4a7c15ull);
}

Trainer::Trainer(const Checkpoint& ckpt, const DatasetIndex& index) : config_(ckpt.config), index_(index) {
  init(checkpoint_skeleton(ckpt));
  load_parameters(model_->params(), ckpt);
  optimizer_.t = ckpt.adam_t;
  optimizer_.m = ckpt.adam_m;
  optimizer_.v = ckpt.adam_v;
  std::istringstream ss(ckpt.rng_state);
  ss >> rng_;
  if (!ss) throw CheckpointError("checkpoint rng state is unreadable");
  step_ = ckpt.step;
}

void Trainer::init(const Skeleton& skeleton) {
  config_.validate();
  skeleton_json_ = skeleton_to_json_text(skeleton);
  const int ids = static_cast<int>(index_.train_identities().size());
  if (ids < config_.P) {
    throw DataError("dataset has " + std::to_string(ids) + " training identities, P=" + std::to_string(config_.P));
  }
  if (ids != config_.model.num_ids) {
    throw DataError("dataset has " + std::to_string(ids) + " training identities, model expects " +
                    std::to_string(config_.model.num_ids));
  }
  model_ = std::make_unique<HybridGaitModel>(config_.model, skeleton);
  const bool need_proj = model_->uses_projection();
  if (need_proj) {
    if (!index_.projection_view) {
      throw DataError("projections missing for " + index_.root.string() + "; run `hgait project --data " +
                      index_.root.string() + " --view " + std::to_string(static_cast<int>(config_.view_angle_deg)) +
                      "` first");
    }
    if (std::abs(*index_.projection_view - config_.view_angle_deg) > 1e-9) {
      throw DataError("projections were rendered at view " + std::to_string(*index_.projection_view) +
                      " but the config asks for " + std::to_string(config_.view_angle_deg) +
                      "; rerun `hgait project`");
    }
  }
  cache_ = std::make_unique<SequenceCache>(index_, need_proj);
  optimizer_ = AdamW(model_->params(), config_.adam_beta1, config_.adam_beta2, config_.adam_eps, config_.weight_decay);
  steps_per_epoch_ = config_.steps_per_epoch > 0 ? config_.steps_per_epoch : (ids + config_.P - 1) / config_.P;
}

StepRecord Trainer::train_step() {
  StepRecord rec;
  rec.epoch = epoch();
  rec.lr = lr_at(rec.epoch, config_);
  const Batch batch = sample_batch(index_, *cache_, config_.P, config_.K, config_.T, rng_);
  auto& store = model_->params();
  store.zero_grad();
  const nn::Tensor proj = model_->uses_projection() ? batch.projections : nn::Tensor();
  const nn::Tensor poses = model_->uses_pose() ? batch.poses : nn::Tensor();
  const ModelOutput out = model_->forward(batch.silhouettes, proj, poses);
  LossBundle loss = combined_loss(triplet_loss(out.parts, batch.labels, config_.margin),
                                        cross_entropy(out.logits, batch.labels), config_.alpha, config_.beta);
  loss.total.backward();
  optimizer_.step(store, rec.lr);
  ++step_;
  rec.step = step_;
  rec.triplet = loss.triplet;
  rec.ce = loss.ce;
  rec.total = loss.total.item();
  if (!std::isfinite(rec.total)) throw Error("training diverged at step " + std::to_string(step_));
  return rec;
}

std::vector<StepRecord> Trainer::run(std::int64_t max_steps, const std::function<void(const StepRecord&)>& on_step) {
  std::vector<StepRecord> records;
  std::ofstream log;
  const bool persist = !config_.out_dir.empty();
  if (persist) {
    fs::create_directories(config_.out_dir);
    log.open(fs::path(config_.out_dir) / "metrics.jsonl", std::ios::app);
    if (!log) throw DataError("cannot write " + (fs::path(config_.out_dir) / "metrics.jsonl").string());
  }
  const std::int64_t every = static_cast<std::int64_t>(config_.checkpoint_every) * steps_per_epoch_;
  std::int64_t done = 0;
  while (step_ < total_steps() && (max_steps <= 0 || done < max_steps)) {
    const StepRecord rec = train_step();
    ++done;
    records.push_back(rec);
    if (persist) {
      log << to_json(rec).dump() << "\n";
      log.flush();
      if (every > 0 && step_ % every == 0) {
        char name[64];
        std::snprintf(name, sizeof(name), "ckpt_epoch%04d.ckpt", epoch());
        save(fs::path(config_.out_dir) / name);
      }
    }
    if (on_step) on_step(rec);
  }
  if (persist) save(fs::path(config_.out_dir) / "last.ckpt");
  return records;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config = config_;
  c.skeleton_json = skeleton_json_;
  c.step = step_;
  c.epoch = epoch();
  std::ostringstream ss;
  ss << rng_;
  c.rng_state = ss.str();
  for (const auto& [name, p] : model_->params().entries()) {
    c.names.push_back(name);
    c.shapes.push_back(p.shape());
    c.values.push_back(p.vec());
  }
  c.adam_t = optimizer_.t;
  c.adam_m = optimizer_.m;
  c.adam_v = optimizer_.v;
  return c;
}

void Trainer::save(const fs::path& path) const { save_checkpoint(checkpoint(), path); }

}  // namespace hybridgait
