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

#include "hybridgait/dataio.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "hybridgait/image_io.h"

namespace hybridgait {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

std::string frame_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d.png", i);
  return buf;
}

std::string view_tag(double deg) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03d", static_cast<int>(std::lround(deg)));
  return buf;
}

std::string padded(const char* prefix, int i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, i);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Per-identity walking style. Angles in radians, frequency in Hz.
struct GaitSignature {
  double frequency, hip_amp, hip_offset, knee_amp, knee_phase, ankle_amp, ankle_phase;
  double arm_amp, arm_phase, arm_abduction, elbow_flex, elbow_amp;
  double sway, twist, pelvis_twist, lean, nod, bob, leg_spread;
  double height_scale, radius_scale, hip_width, shoulder_width;
};

GaitSignature sample_signature(std::mt19937_64& rng) {
  auto u = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  GaitSignature g;
  g.frequency = u(0.75, 1.25);
  g.hip_amp = u(0.25, 0.6);
  g.hip_offset = u(-0.1, 0.1);
  g.knee_amp = u(0.3, 1.0);
  g.knee_phase = u(0.0, 1.5);
  g.ankle_amp = u(0.05, 0.35);
  g.ankle_phase = u(-1.0, 1.0);
  g.arm_amp = u(0.05, 0.6);
  g.arm_phase = u(-0.6, 0.6);
  g.arm_abduction = u(1.2, 1.5);
  g.elbow_flex = u(0.0, 0.6);
  g.elbow_amp = u(0.0, 0.4);
  g.sway = u(0.0, 0.12);
  g.twist = u(0.0, 0.2);
  g.pelvis_twist = u(0.0, 0.15);
  g.lean = u(-0.05, 0.25);
  g.nod = u(-0.15, 0.15);
  g.bob = u(0.0, 0.04);
  g.leg_spread = u(0.0, 0.12);
  g.height_scale = u(0.96, 1.04);
  g.radius_scale = u(0.9, 1.1);
  g.hip_width = u(0.85, 1.2);
  g.shoulder_width = u(0.85, 1.2);
  return g;
}

Skeleton identity_skeleton(const Skeleton& base, const GaitSignature& g) {
  Skeleton s = base.scaled(g.height_scale);
  for (double& r : s.capsule_radius) r *= g.radius_scale;
  s.bone_offset[1].x() *= g.hip_width;
  s.bone_offset[2].x() *= g.hip_width;
  s.bone_offset[13].x() *= g.shoulder_width;
  s.bone_offset[14].x() *= g.shoulder_width;
  return s;
}

Mat3 rot(const Vec3& axis, double angle) { return rodrigues(axis.normalized() * angle); }

void set_joint(std::vector<double>& frame, int joint, const Mat3& r) {
  const Vec3 aa = rotation_to_axis_angle(r);
  for (int d = 0; d < 3; ++d) frame[3 * joint + d] = aa[d];
}

// Sinusoidal joint-angle trajectories. x = subject's left, y = up,
// z = walking direction; frame i is at time (start + i) / fps.
SmplPoseSequence synthesize_walk(const GaitSignature& g, int start, int n, double fps) {
  const Vec3 X = Vec3::UnitX(), Y = Vec3::UnitY(), Z = Vec3::UnitZ();
  SmplPoseSequence seq;
  seq.betas.assign(kSmplBetaCount, 0.0);
  seq.pose.reserve(static_cast<size_t>(n) * kSmplPoseDims);
  for (int i = 0; i < n; ++i) {
    const double t = (start + i) / fps;
    const double phi = 2.0 * kPi * g.frequency * t;
    std::vector<double> f(kSmplPoseDims, 0.0);
    set_joint(f, 0, rot(Y, g.pelvis_twist * std::sin(phi)));
    for (int side = 0; side < 2; ++side) {  // 0 = left, 1 = right
      const double ph = phi + side * kPi;
      const double spread = side == 0 ? g.leg_spread : -g.leg_spread;
      set_joint(f, 1 + side, rot(X, -(g.hip_offset + g.hip_amp * std::sin(ph))) * rot(Z, spread));
      set_joint(f, 4 + side, rot(X, g.knee_amp * 0.5 * (1.0 + std::sin(ph + g.knee_phase))));
      set_joint(f, 7 + side, rot(X, g.ankle_amp * std::sin(ph + g.ankle_phase)));
      // Arms swing against the leg of the same side.
      const double swing = g.arm_amp * std::sin(ph + kPi + g.arm_phase);
      const double abd = side == 0 ? -g.arm_abduction : g.arm_abduction;
      set_joint(f, 16 + side, rot(X, -swing) * rot(Z, abd));
      const double flex = g.elbow_flex + g.elbow_amp * 0.5 * (1.0 + std::sin(ph + kPi + g.arm_phase));
      set_joint(f, 18 + side, rot(Y, side == 0 ? -flex : flex));
    }
    set_joint(f, 3, rot(Z, g.sway * std::sin(phi)));
    set_joint(f, 6, rot(Y, -g.twist * std::sin(phi)));
    set_joint(f, 9, rot(X, g.lean));
    set_joint(f, 12, rot(X, g.nod));
    seq.pose.insert(seq.pose.end(), f.begin(), f.end());
    seq.trans.emplace_back(0.0, g.bob * std::cos(2.0 * phi), 0.0);
  }
  return seq;
}

Mask dilate(const Mask& m, int radius) {
  if (radius <= 0) return m;
  Mask out(m.height, m.width);
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      for (int dr = -radius; dr <= radius; ++dr)
        for (int dc = -radius; dc <= radius; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (dr * dr + dc * dc > radius * radius) continue;
          if (rr >= 0 && rr < m.height && cc >= 0 && cc < m.width) out.at(rr, cc) = 1;
        }
    }
  return out;
}

// Flips pixels on either side of the mask boundary with probability p.
Mask flip_boundary(const Mask& m, double p, std::mt19937_64& rng) {
  Mask out = m;
  std::bernoulli_distribution flip(p);
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c) {
      bool boundary = false;
      const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4 && !boundary; ++k) {
        const int rr = r + dr[k], cc = c + dc[k];
        if (rr >= 0 && rr < m.height && cc >= 0 && cc < m.width && m.at(rr, cc) != m.at(r, c)) boundary = true;
      }
      if (boundary && flip(rng)) out.at(r, c) ^= 1;
    }
  return out;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

json entry_to_json(const SequenceEntry& e) {
  return json{{"identity", e.identity},     {"sequence", e.sequence},   {"view", e.view_tag},
              {"view_deg", e.view_deg},     {"clothing", e.clothing_tag}, {"clothing_level", e.clothing_level},
              {"path", e.path},             {"num_frames", e.num_frames}, {"split", split_name(e.split)},
              {"start_frame", e.start_frame}};
}

int count_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) return -1;
  int n = 0;
  for (const auto& f : fs::directory_iterator(dir)) n += f.path().extension() == ".png";
  return n;
}

int count_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return -1;
  int n = 0;
  std::string line;
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_identities < 1) throw ConfigError("synth.num_identities must be >= 1");
  if (sequences_per_identity < 1) throw ConfigError("synth.sequences_per_identity must be >= 1");
  if (frames_per_sequence < 1) throw ConfigError("synth.frames_per_sequence must be >= 1");
  if (views.empty()) throw ConfigError("synth.views must not be empty");
  if (clothing_levels.empty()) throw ConfigError("synth.clothing_levels must not be empty");
  for (int l : clothing_levels) {
    if (l < 0) throw ConfigError("synth.clothing_levels must be >= 0");
  }
  if (boundary_flip < 0 || boundary_flip > 1) throw ConfigError("synth.boundary_flip must lie in [0,1]");
  if (image_size < 16) throw ConfigError("synth.image_size must be >= 16");
  if (!(fps > 0)) throw ConfigError("synth.fps must be positive");
  if (max_start_frame < 0) throw ConfigError("synth.max_start_frame must be >= 0");
  if (num_train_identities < 0 || num_train_identities > num_identities) {
    throw ConfigError("synth.num_train_identities must lie in [0, num_identities]");
  }
  if (queries_per_identity < 1) throw ConfigError("synth.queries_per_identity must be >= 1");
}

json to_json(const SynthConfig& c) {
  return json{{"num_identities", c.num_identities},
              {"sequences_per_identity", c.sequences_per_identity},
              {"frames_per_sequence", c.frames_per_sequence},
              {"views", c.views},
              {"clothing_levels", c.clothing_levels},
              {"boundary_flip", c.boundary_flip},
              {"image_size", c.image_size},
              {"fps", c.fps},
              {"max_start_frame", c.max_start_frame},
              {"num_train_identities", c.num_train_identities},
              {"query_view", c.query_view},
              {"queries_per_identity", c.queries_per_identity},
              {"gallery_excludes_query_view", c.gallery_excludes_query_view}};
}

SynthConfig synth_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synth config: expected an object");
  SynthConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "num_identities") c.num_identities = v.get<int>();
      else if (key == "sequences_per_identity") c.sequences_per_identity = v.get<int>();
      else if (key == "frames_per_sequence") c.frames_per_sequence = v.get<int>();
      else if (key == "views") c.views = v.get<std::vector<double>>();
      else if (key == "clothing_levels") c.clothing_levels = v.get<std::vector<int>>();
      else if (key == "boundary_flip") c.boundary_flip = v.get<double>();
      else if (key == "image_size") c.image_size = v.get<int>();
      else if (key == "fps") c.fps = v.get<double>();
      else if (key == "max_start_frame") c.max_start_frame = v.get<int>();
      else if (key == "num_train_identities") c.num_train_identities = v.get<int>();
      else if (key == "query_view") c.query_view = v.get<double>();
      else if (key == "queries_per_identity") c.queries_per_identity = v.get<int>();
      else if (key == "gallery_excludes_query_view") c.gallery_excludes_query_view = v.get<bool>();
      else throw ConfigError("synth config: unknown field '" + key + "'");
    } catch (const json::exception& e) {
      throw ConfigError("synth config field '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kQuery: return "query";
    case Split::kGallery: return "gallery";
    case Split::kUnused: return "unused";
  }
  return "unused";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "query") return Split::kQuery;
  if (s == "gallery") return Split::kGallery;
  if (s == "unused") return Split::kUnused;
  throw ConfigError("unknown split '" + s + "' (expected train, query, gallery or unused)");
}

std::vector<const SequenceEntry*> DatasetIndex::split(Split s) const {
  std::vector<const SequenceEntry*> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

std::vector<std::string> DatasetIndex::train_identities() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (e.split == Split::kTrain) ids.insert(e.identity);
  }
  return {ids.begin(), ids.end()};
}

void DatasetIndex::validate() const {
  std::set<std::string> keys, gallery_ids;
  for (const auto& e : entries) {
    if (!keys.insert(e.key()).second) throw DataError("duplicate sequence " + e.key() + " in manifest");
    if (e.num_frames < 1) throw DataError("sequence " + e.key() + " has no frames");
    if (e.split == Split::kGallery) gallery_ids.insert(e.identity);
  }
  for (const auto& e : entries) {
    if (e.split == Split::kQuery && !gallery_ids.count(e.identity)) {
      throw DataError("query identity " + e.identity + " has no gallery sequence");
    }
  }
}

DatasetIndex generate_synthetic_dataset(const SynthConfig& config, std::uint64_t seed, const fs::path& root) {
  config.validate();
  try {
    fs::create_directories(root);
  } catch (const fs::filesystem_error& e) {
    throw DataError("cannot create output directory " + root.string() + ": " + e.what());
  }
  const Skeleton base = Skeleton::default_smpl();
  save_skeleton(base, root / "skeleton.json");
  const ImageSize size{config.image_size, config.image_size};

  DatasetIndex index;
  index.root = root;
  index.image_size = config.image_size;
  const int id_width = config.num_identities > 1000 ? 5 : 3;
  for (int id = 0; id < config.num_identities; ++id) {
    auto id_rng = stream(seed, static_cast<std::uint64_t>(id) + 1, 0);
    const GaitSignature sig = sample_signature(id_rng);
    const Skeleton body = identity_skeleton(base, sig);
    const CapsuleProjector projector(body);
    const std::string identity = padded("id", id, id_width);
    const bool train = id < config.num_train_identities;
    fs::remove_all(root / identity);
    int queries = 0;
    for (int s = 0; s < config.sequences_per_identity; ++s) {
      auto rng = stream(seed, static_cast<std::uint64_t>(id) + 1, static_cast<std::uint64_t>(s) + 1);
      SequenceEntry e;
      e.identity = identity;
      e.sequence = padded("s", s, 2);
      e.view_deg = config.views[s % config.views.size()];
      e.view_tag = view_tag(e.view_deg);
      e.clothing_level =
          config.clothing_levels[std::uniform_int_distribution<size_t>(0, config.clothing_levels.size() - 1)(rng)];
      e.clothing_tag = "c" + std::to_string(e.clothing_level);
      e.start_frame = std::uniform_int_distribution<int>(0, config.max_start_frame)(rng);
      e.num_frames = config.frames_per_sequence;
      e.path = identity + "/" + e.sequence;
      if (train) {
        e.split = Split::kTrain;
      } else if (std::abs(e.view_deg - config.query_view) < 1e-9) {
        if (queries < config.queries_per_identity) {
          e.split = Split::kQuery;
          ++queries;
        } else {
          e.split = config.gallery_excludes_query_view ? Split::kUnused : Split::kGallery;
        }
      } else {
        e.split = Split::kGallery;
      }

      const fs::path dir = root / e.path;
      fs::create_directories(dir / "sils");
      const SmplPoseSequence pose = synthesize_walk(sig, e.start_frame, e.num_frames, config.fps);
      write_pose_file(pose, dir / "smpl.jsonl");
      for (int f = 0; f < e.num_frames; ++f) {
        const auto joints = forward_kinematics(pose.frame(f), body, pose.trans[f]);
        Mask m = projector.project(joints, e.view_deg, size);
        if (e.clothing_level > 0) m = flip_boundary(dilate(m, e.clothing_level), config.boundary_flip, rng);
        write_mask_png(m, dir / "sils" / frame_name(f));
      }
      index.entries.push_back(std::move(e));
    }
  }
  index.manifest = json{{"format_version", kManifestFormatVersion},
                        {"generator", {{"seed", seed}, {"config", to_json(config)}}}};
  index.validate();
  save_manifest(index);
  return index;
}

void save_manifest(const DatasetIndex& index) {
  json m = index.manifest.is_object() ? index.manifest : json::object();
  m["format_version"] = kManifestFormatVersion;
  m["image_size"] = index.image_size;
  m["skeleton"] = "skeleton.json";
  m["projection"] = index.projection_view ? json{{"view_deg", *index.projection_view}} : json(nullptr);
  json seqs = json::array();
  for (const auto& e : index.entries) seqs.push_back(entry_to_json(e));
  m["sequences"] = std::move(seqs);
  const fs::path tmp = index.root / "manifest.json.tmp";
  write_text(tmp, m.dump(2) + "\n");
  fs::rename(tmp, index.root / "manifest.json");
}

DatasetIndex load_dataset(const fs::path& root) {
  const fs::path manifest_path = root / "manifest.json";
  if (!fs::exists(manifest_path)) throw DataError("no manifest at " + manifest_path.string());
  json m;
  try {
    m = json::parse(read_text(manifest_path));
  } catch (const json::parse_error& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  DatasetIndex index;
  index.root = root;
  try {
    if (m.at("format_version").get<int>() != kManifestFormatVersion) {
      throw DataError(manifest_path.string() + ": unsupported format_version");
    }
    index.image_size = m.value("image_size", 64);
    if (m.contains("projection") && !m["projection"].is_null()) {
      index.projection_view = m["projection"].at("view_deg").get<double>();
    }
    for (const auto& s : m.at("sequences")) {
      SequenceEntry e;
      e.identity = s.at("identity").get<std::string>();
      e.sequence = s.at("sequence").get<std::string>();
      e.view_tag = s.value("view", "");
      e.view_deg = s.value("view_deg", 0.0);
      e.clothing_tag = s.value("clothing", "");
      e.clothing_level = s.value("clothing_level", 0);
      e.path = s.at("path").get<std::string>();
      e.num_frames = s.at("num_frames").get<int>();
      e.split = parse_split(s.at("split").get<std::string>());
      e.start_frame = s.value("start_frame", 0);
      index.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  index.manifest = std::move(m);
  index.validate();
  for (const auto& e : index.entries) {
    const fs::path dir = root / e.path;
    const int sils = count_files(dir / "sils");
    if (sils < 0) throw DataError("missing silhouette directory " + (dir / "sils").string());
    const int poses = count_lines(dir / "smpl.jsonl");
    if (poses < 0) throw DataError("missing pose file " + (dir / "smpl.jsonl").string());
    if (sils != e.num_frames || poses != e.num_frames) {
      throw DataError("frame-count mismatch in " + dir.string() + ": manifest " + std::to_string(e.num_frames) +
                      ", silhouettes " + std::to_string(sils) + ", poses " + std::to_string(poses));
    }
  }
  return index;
}

void write_pose_file(const SmplPoseSequence& seq, const fs::path& path) {
  std::string text;
  for (int i = 0; i < seq.num_frames(); ++i) {
    const auto f = seq.frame(i);
    json line{{"pose", std::vector<double>(f.begin(), f.end())},
              {"betas", seq.betas},
              {"trans", {seq.trans[i].x(), seq.trans[i].y(), seq.trans[i].z()}}};
    text += line.dump() + "\n";
  }
  write_text(path, text);
}

SmplPoseSequence read_pose_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read pose file " + path.string());
  SmplPoseSequence seq;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const auto pose = j.at("pose").get<std::vector<double>>();
      const auto trans = j.at("trans").get<std::vector<double>>();
      if (pose.size() != kSmplPoseDims || trans.size() != 3) throw DataError("wrong pose or trans length");
      seq.pose.insert(seq.pose.end(), pose.begin(), pose.end());
      seq.trans.emplace_back(trans[0], trans[1], trans[2]);
      if (seq.betas.empty()) seq.betas = j.value("betas", std::vector<double>(kSmplBetaCount, 0.0));
    } catch (const std::exception& e) {
      throw DataError("corrupt pose file " + path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (seq.num_frames() == 0) throw DataError("empty pose file " + path.string());
  try {
    seq.validate();
  } catch (const Error& e) {
    throw DataError("invalid pose file " + path.string() + ": " + e.what());
  }
  return seq;
}

Skeleton dataset_skeleton(const DatasetIndex& index) {
  const fs::path p = index.root / "skeleton.json";
  if (!fs::exists(p)) return Skeleton::default_smpl();
  return load_skeleton(p);
}

ProjectionReport precompute_projections(DatasetIndex& index, double view_angle_deg, bool force,
                                        const std::function<void(const SequenceEntry&)>& progress) {
  ProjectionReport report;
  std::vector<std::string> missing;
  for (const auto& e : index.entries) {
    if (!fs::exists(index.root / e.path / "smpl.jsonl")) missing.push_back(e.key());
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& k : missing) list += (list.empty() ? "" : ", ") + k;
    throw DataError("pose files missing for: " + list);
  }
  if (!force && index.projection_view && std::abs(*index.projection_view - view_angle_deg) < 1e-12) {
    bool complete = true;
    for (const auto& e : index.entries) complete = complete && count_files(index.root / e.path / "proj") == e.num_frames;
    if (complete) {
      report.up_to_date = true;
      return report;
    }
  }
  // The manifest must not claim a view while directories are being rewritten.
  index.projection_view.reset();
  save_manifest(index);

  const Skeleton skeleton = dataset_skeleton(index);
  const CapsuleProjector projector(skeleton);
  const ImageSize size{index.image_size, index.image_size};
  for (const auto& e : index.entries) {
    const fs::path dir = index.root / e.path;
    const fs::path tmp = dir / "proj.tmp";
    try {
      const SmplPoseSequence pose = read_pose_file(dir / "smpl.jsonl");
      if (pose.num_frames() != e.num_frames) {
        throw DataError("pose file has " + std::to_string(pose.num_frames()) + " frames, manifest says " +
                        std::to_string(e.num_frames));
      }
      fs::remove_all(tmp);
      fs::create_directories(tmp);
      for (int f = 0; f < pose.num_frames(); ++f) {
        const auto joints = forward_kinematics(pose.frame(f), skeleton, pose.trans[f]);
        write_mask_png(projector.project(joints, view_angle_deg, size), tmp / frame_name(f));
      }
      fs::remove_all(dir / "proj");
      fs::rename(tmp, dir / "proj");
    } catch (const std::exception& ex) {
      std::error_code ec;
      fs::remove_all(tmp, ec);
      throw DataError("projection failed for sequence " + e.key() + ": " + ex.what());
    }
    ++report.written;
    if (progress) progress(e);
  }
  index.projection_view = view_angle_deg;
  save_manifest(index);
  return report;
}

SequenceData load_sequence(const DatasetIndex& index, const SequenceEntry& entry, bool with_projections) {
  const fs::path dir = index.root / entry.path;
  SequenceData data;
  data.pose = read_pose_file(dir / "smpl.jsonl");
  if (data.pose.num_frames() != entry.num_frames) {
    throw DataError("frame-count mismatch in " + dir.string() + ": pose file has " +
                    std::to_string(data.pose.num_frames()) + " frames, manifest says " +
                    std::to_string(entry.num_frames));
  }
  for (int f = 0; f < entry.num_frames; ++f) data.silhouettes.push_back(read_mask_png(dir / "sils" / frame_name(f)));
  if (with_projections) {
    if (!index.projection_view || count_files(dir / "proj") != entry.num_frames) {
      throw DataError("projections missing for " + entry.key() + "; run `hgait project --data " +
                      index.root.string() + "` first");
    }
    for (int f = 0; f < entry.num_frames; ++f) data.projections.push_back(read_mask_png(dir / "proj" / frame_name(f)));
  }
  return data;
}

std::shared_ptr<const SequenceData> SequenceCache::get(const SequenceEntry& entry) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(entry.key());
    if (it != cache_.end()) return it->second;
  }
  auto data = std::make_shared<const SequenceData>(load_sequence(*index_, entry, with_projections_));
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.emplace(entry.key(), std::move(data)).first->second;
}

std::vector<int> window_frames(int n, int start, int T) {
  if (n < 1 || T < 1) throw ValidationError("window_frames: need n >= 1 and T >= 1");
  std::vector<int> out(T);
  for (int i = 0; i < T; ++i) out[i] = (start + i) % n;
  return out;
}

namespace {

void copy_frame(const Mask& m, Real* dst, int expected) {
  if (m.height != expected || m.width != expected) {
    throw DataError("frame size " + std::to_string(m.height) + "x" + std::to_string(m.width) + " differs from " +
                    std::to_string(expected) + "x" + std::to_string(expected));
  }
  for (size_t i = 0; i < m.pixels.size(); ++i) dst[i] = m.pixels[i];
}

void fill_item(const SequenceData& data, const std::vector<int>& frames, int item, int T, int size, Batch& b) {
  const size_t img = static_cast<size_t>(size) * size;
  for (int t = 0; t < T; ++t) {
    const int f = frames[t];
    const size_t o = (static_cast<size_t>(item) * T + t) * img;
    copy_frame(data.silhouettes[f], b.silhouettes.vec().data() + o, size);
    if (!data.projections.empty()) copy_frame(data.projections[f], b.projections.vec().data() + o, size);
    const auto pose = data.pose.frame(f);
    std::copy(pose.begin(), pose.end(), b.poses.vec().begin() + (static_cast<size_t>(item) * T + t) * kSmplPoseDims);
  }
}

}  // namespace

Batch sample_batch(const DatasetIndex& index, SequenceCache& cache, int P, int K, int T, std::mt19937_64& rng) {
  if (P < 1 || K < 1 || T < 1) throw ValidationError("sample_batch: P, K and T must be >= 1");
  const auto ids = index.train_identities();
  if (static_cast<int>(ids.size()) < P) {
    throw ValidationError("sample_batch: " + std::to_string(ids.size()) + " training identities, P=" +
                          std::to_string(P));
  }
  std::map<std::string, std::vector<const SequenceEntry*>> by_id;
  for (const auto* e : index.split(Split::kTrain)) by_id[e->identity].push_back(e);

  std::vector<int> order(ids.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  // Partial Fisher-Yates: the first P slots are a uniform draw without replacement.
  for (int i = 0; i < P; ++i) {
    const int j = std::uniform_int_distribution<int>(i, static_cast<int>(order.size()) - 1)(rng);
    std::swap(order[i], order[j]);
  }
  const int s = index.image_size;
  Batch b;
  b.silhouettes = nn::Tensor::zeros({P * K, T, s, s});
  b.projections = nn::Tensor::zeros({P * K, T, s, s});
  b.poses = nn::Tensor::zeros({P * K, T, kSmplJointCount, 3});
  for (int p = 0; p < P; ++p) {
    const auto& seqs = by_id[ids[order[p]]];
    const int n = static_cast<int>(seqs.size());
    std::vector<int> pick(n);
    for (int i = 0; i < n; ++i) pick[i] = i;
    for (int k = 0; k < K; ++k) {
      int chosen;
      if (n >= K) {
        const int j = std::uniform_int_distribution<int>(k, n - 1)(rng);
        std::swap(pick[k], pick[j]);
        chosen = pick[k];
      } else {
        chosen = std::uniform_int_distribution<int>(0, n - 1)(rng);
      }
      const SequenceEntry& e = *seqs[chosen];
      const auto data = cache.get(e);
      const int len = data->num_frames();
      const int start = len >= T ? std::uniform_int_distribution<int>(0, len - T)(rng)
                                 : std::uniform_int_distribution<int>(0, len - 1)(rng);
      const auto frames = window_frames(len, start, T);
      fill_item(*data, frames, p * K + k, T, s, b);
      b.labels.push_back(order[p]);
      b.sequence_keys.push_back(e.key());
      b.frame_indices.push_back(frames);
    }
  }
  return b;
}

Batch sequence_batch(const SequenceData& data, const std::string& key) {
  const int n = data.num_frames();
  if (n < 1) throw DataError("sequence " + key + " has no frames");
  const int s = data.silhouettes.front().height;
  Batch b;
  b.silhouettes = nn::Tensor::zeros({1, n, s, s});
  b.projections = nn::Tensor::zeros({1, n, s, s});
  b.poses = nn::Tensor::zeros({1, n, kSmplJointCount, 3});
  std::vector<int> frames(n);
  for (int i = 0; i < n; ++i) frames[i] = i;
  fill_item(data, frames, 0, n, s, b);
  b.labels.push_back(-1);
  b.sequence_keys.push_back(key);
  b.frame_indices.push_back(frames);
  return b;
}

}  // namespace hybridgait
