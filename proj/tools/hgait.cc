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

// hgait: synth | project | train | embed | eval
//
// Exit codes: 0 ok, 1 other failure, 2 configuration, 3 data, 4 checkpoint.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "hybridgait/dataio.h"
#include "hybridgait/retrieval_eval.h"
#include "hybridgait/trainer.h"

using namespace hybridgait;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCheckpoint = 4;

bool g_json = false;

std::string default_data_root() {
  const char* env = std::getenv("HGAIT_DATA_ROOT");
  return env ? env : "";
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

fs::path require_data(const std::string& flag) {
  if (flag.empty()) throw ConfigError("no dataset given: pass --data or set HGAIT_DATA_ROOT");
  return flag;
}

void emit(const json& j) { std::cout << j.dump() << std::endl; }

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out, std::uint64_t seed) {
  const json j = read_json_file(config_path);
  for (const char* key : {"num_identities", "sequences_per_identity", "frames_per_sequence", "views", "clothing_levels"}) {
    if (!j.contains(key)) throw ConfigError(config_path + ": missing required field '" + std::string(key) + "'");
  }
  const SynthConfig cfg = synth_config_from_json(j);
  const DatasetIndex idx = generate_synthetic_dataset(cfg, seed, out);
  long frames = 0;
  std::set<std::string> ids;
  for (const auto& e : idx.entries) {
    frames += e.num_frames;
    ids.insert(e.identity);
  }
  const json summary{{"root", out},
                     {"identities", ids.size()},
                     {"sequences", idx.entries.size()},
                     {"frames", frames},
                     {"train", idx.split(Split::kTrain).size()},
                     {"query", idx.split(Split::kQuery).size()},
                     {"gallery", idx.split(Split::kGallery).size()}};
  if (g_json) {
    emit(summary);
  } else {
    std::printf("wrote %s: %zu identities, %zu sequences, %ld frames (train %zu, query %zu, gallery %zu)\n",
                out.c_str(), ids.size(), idx.entries.size(), frames, idx.split(Split::kTrain).size(),
                idx.split(Split::kQuery).size(), idx.split(Split::kGallery).size());
  }
  return 0;
}

int cmd_project(const std::string& data, double view, bool force) {
  DatasetIndex idx = load_dataset(require_data(data));
  const auto report = precompute_projections(idx, view, force, [](const SequenceEntry& e) {
    if (!g_json) std::printf("projected %s\n", e.key().c_str());
  });
  if (g_json) {
    emit({{"view_deg", view}, {"written", report.written}, {"up_to_date", report.up_to_date}});
  } else if (report.up_to_date) {
    std::printf("projections at %g deg are up to date\n", view);
  } else {
    std::printf("projected %d sequences at %g deg\n", report.written, view);
  }
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& ablation, const std::string& resume,
              const std::string& data, const std::string& out, long max_steps) {
  std::optional<Trainer> trainer;
  if (!resume.empty()) {
    const Checkpoint ckpt = load_checkpoint(resume);
    const std::string root = data.empty() ? ckpt.config.data_root : data;
    trainer.emplace(ckpt, load_dataset(require_data(root)));
    if (!g_json) std::printf("resumed %s at step %lld\n", resume.c_str(), static_cast<long long>(trainer->step()));
  } else {
    if (config_path.empty()) throw ConfigError("train needs --config or --resume");
    TrainConfig cfg = load_train_config(config_path);
    if (!ablation.empty()) cfg.model.variant = parse_variant(ablation);
    if (!data.empty()) cfg.data_root = data;
    if (cfg.data_root.empty()) cfg.data_root = default_data_root();
    if (!out.empty()) cfg.out_dir = out;
    cfg.validate();
    trainer.emplace(cfg, load_dataset(require_data(cfg.data_root)));
    if (!g_json) {
      std::printf("training %s: %lld steps (%lld per epoch), output %s\n", variant_name(cfg.model.variant).c_str(),
                  static_cast<long long>(trainer->total_steps()), static_cast<long long>(trainer->steps_per_epoch()),
                  cfg.out_dir.empty() ? "(none)" : cfg.out_dir.c_str());
    }
  }
  trainer->run(max_steps, [](const StepRecord& r) {
    if (g_json) {
      emit(to_json(r));
    } else {
      std::printf("step %6lld  epoch %4d  lr %.1e  triplet %.4f  ce %.4f  total %.4f\n", static_cast<long long>(r.step),
                  r.epoch, r.lr, r.triplet, r.ce, r.total);
    }
  });
  return 0;
}

int cmd_embed(const std::string& ckpt_path, const std::string& data, const std::string& split_name_arg,
              const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto model = model_from_checkpoint(ckpt);
  const DatasetIndex idx = load_dataset(require_data(data));
  const Split split = parse_split(split_name_arg);
  const EmbeddingSet set = extract_embeddings(*model, idx, split);
  write_embeddings(set, out);
  if (g_json) {
    emit({{"out", out}, {"split", split_name_arg}, {"count", set.size()}, {"dim", set.dim}});
  } else {
    std::printf("wrote %d %s embeddings (dim %d) to %s\n", set.size(), split_name_arg.c_str(), set.dim, out.c_str());
  }
  return 0;
}

int cmd_eval(const std::string& query, const std::string& gallery, const std::string& out) {
  const MetricsReport r = evaluate(read_embeddings(query), read_embeddings(gallery));
  write_report(r, out);
  if (g_json) {
    emit(metrics_json(r));
  } else {
    std::printf("%-8s %8s\n", "metric", "value");
    std::printf("%-8s %8.2f\n", "Rank-1", 100.0 * r.rank1);
    std::printf("%-8s %8.2f\n", "Rank-5", 100.0 * r.rank5);
    std::printf("%-8s %8.2f\n", "mAP", 100.0 * r.mAP);
    std::printf("%-8s %8.2f\n", "mINP", 100.0 * r.mINP);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HybridGait gait recognition toolkit"};
  app.require_subcommand(1);
  app.add_flag("--json", g_json, "Print machine-readable JSON instead of tables");

  std::string config, out, data = default_data_root(), split, ckpt, query, gallery, ablation, resume;
  std::uint64_t seed = 0;
  double view = 0.0;
  bool force = false;
  long max_steps = 0;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic gait dataset");
  synth->add_option("--config", config, "Synthesis config (JSON)")->required();
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--seed", seed, "Random seed")->required();

  auto* project = app.add_subcommand("project", "Render fixed-view projections of every pose");
  project->add_option("--data", data, "Dataset root (default $HGAIT_DATA_ROOT)");
  project->add_option("--view", view, "View angle in degrees")->capture_default_str();
  project->add_flag("--force", force, "Re-render even when up to date");

  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", config, "Training config (JSON)");
  train->add_option("--ablation", ablation, "Variant: appr, appr+stt, appr+castt or full");
  train->add_option("--resume", resume, "Continue from a checkpoint");
  train->add_option("--data", data, "Dataset root (overrides the config)");
  train->add_option("--out", out, "Output directory (overrides the config)");
  train->add_option("--max-steps", max_steps, "Stop after this many steps (0 = run to the end)");

  auto* embed = app.add_subcommand("embed", "Extract embeddings for one split");
  embed->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  embed->add_option("--data", data, "Dataset root (default $HGAIT_DATA_ROOT)");
  embed->add_option("--split", split, "train, query, gallery or unused")->required();
  embed->add_option("--out", out, "Output JSON-lines file")->required();

  auto* eval = app.add_subcommand("eval", "Score query embeddings against a gallery");
  eval->add_option("--query", query, "Query embeddings")->required();
  eval->add_option("--gallery", gallery, "Gallery embeddings")->required();
  eval->add_option("--out", out, "Report file (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(config, out, seed);
    if (*project) return cmd_project(data, view, force);
    if (*train) return cmd_train(config, ablation, resume, data, out, max_steps);
    if (*embed) return cmd_embed(ckpt, data, split, out);
    if (*eval) return cmd_eval(query, gallery, out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return kExitCheckpoint;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitOther;
  }
  return kExitOther;
}
