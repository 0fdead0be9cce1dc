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

#include "hybridgait/skeleton.h"

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace hybridgait {

using nlohmann::json;

namespace {

bool finite3(const Vec3& v) { return v.allFinite(); }

// cos/sin of an angle in degrees, exact at multiples of 90 so that the
// 0/180 mirror relation of the projector holds bit for bit.
std::pair<double, double> cos_sin_deg(double deg) {
  double wrapped = std::fmod(deg, 360.0);
  if (wrapped < 0) wrapped += 360.0;
  if (wrapped == 0.0) return {1.0, 0.0};
  if (wrapped == 90.0) return {0.0, 1.0};
  if (wrapped == 180.0) return {-1.0, 0.0};
  if (wrapped == 270.0) return {0.0, -1.0};
  const double rad = wrapped * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

}  // namespace

void Skeleton::validate() const {
  const int n = num_joints();
  if (n < 1) throw ValidationError("skeleton has no joints");
  if (static_cast<int>(joint_names.size()) != n || static_cast<int>(bone_offset.size()) != n ||
      static_cast<int>(capsule_radius.size()) != n) {
    throw ValidationError("skeleton field lengths disagree");
  }
  if (parent_index[0] != -1) throw ValidationError("joint 0 must be the root");
  std::set<std::string> names;
  for (int j = 0; j < n; ++j) {
    if (!names.insert(joint_names[j]).second) {
      throw ValidationError("duplicate joint name '" + joint_names[j] + "'");
    }
    if (j > 0 && (parent_index[j] < 0 || parent_index[j] >= j)) {
      throw ValidationError("joint " + std::to_string(j) + " ('" + joint_names[j] +
                            "') must have a parent index in [0, " + std::to_string(j) + ")");
    }
    if (!finite3(bone_offset[j])) {
      throw ValidationError("bone offset of joint '" + joint_names[j] + "' is not finite");
    }
    if (!(capsule_radius[j] > 0.0) || !std::isfinite(capsule_radius[j])) {
      throw ValidationError("capsule radius of joint '" + joint_names[j] +
                            "' must be positive and finite");
    }
  }
}

void Skeleton::validate_smpl() const {
  validate();
  if (num_joints() != kSmplJointCount) {
    throw ValidationError("SMPL skeleton needs exactly 24 joints, got " +
                          std::to_string(num_joints()));
  }
}

Skeleton Skeleton::scaled(double factor) const {
  Skeleton out = *this;
  for (auto& o : out.bone_offset) o *= factor;
  for (auto& r : out.capsule_radius) r *= factor;
  return out;
}

Skeleton Skeleton::default_smpl() {
  struct Row {
    const char* name;
    int parent;
    double x, y, z, radius;
  };
  // T-pose, 1.7 m including the head capsule; feet touch y = 0.
  static constexpr Row kRows[kSmplJointCount] = {
      {"pelvis", -1, 0.0, 0.95, 0.0, 0.11},
      {"left_hip", 0, 0.09, -0.07, 0.0, 0.08},
      {"right_hip", 0, -0.09, -0.07, 0.0, 0.08},
      {"spine1", 0, 0.0, 0.11, 0.0, 0.12},
      {"left_knee", 1, 0.01, -0.39, 0.0, 0.07},
      {"right_knee", 2, -0.01, -0.39, 0.0, 0.07},
      {"spine2", 3, 0.0, 0.13, 0.0, 0.13},
      {"left_ankle", 4, 0.0, -0.39, -0.02, 0.05},
      {"right_ankle", 5, 0.0, -0.39, -0.02, 0.05},
      {"spine3", 6, 0.0, 0.06, 0.0, 0.13},
      {"left_foot", 7, 0.0, -0.07, 0.12, 0.03},
      {"right_foot", 8, 0.0, -0.07, 0.12, 0.03},
      {"neck", 9, 0.0, 0.21, 0.0, 0.06},
      {"left_collar", 9, 0.09, 0.11, 0.0, 0.07},
      {"right_collar", 9, -0.09, 0.11, 0.0, 0.07},
      {"head", 12, 0.0, 0.12, 0.02, 0.10},
      {"left_shoulder", 13, 0.11, 0.08, 0.0, 0.06},
      {"right_shoulder", 14, -0.11, 0.08, 0.0, 0.06},
      {"left_elbow", 16, 0.24, 0.0, 0.0, 0.045},
      {"right_elbow", 17, -0.24, 0.0, 0.0, 0.045},
      {"left_wrist", 18, 0.23, 0.0, 0.0, 0.035},
      {"right_wrist", 19, -0.23, 0.0, 0.0, 0.035},
      {"left_hand", 20, 0.08, 0.0, 0.0, 0.04},
      {"right_hand", 21, -0.08, 0.0, 0.0, 0.04},
  };
  Skeleton s;
  for (const Row& r : kRows) {
    s.joint_names.emplace_back(r.name);
    s.parent_index.push_back(r.parent);
    s.bone_offset.emplace_back(r.x, r.y, r.z);
    s.capsule_radius.push_back(r.radius);
  }
  return s;
}

std::string skeleton_to_json_text(const Skeleton& skeleton) {
  skeleton.validate();
  json joints = json::array();
  for (int j = 0; j < skeleton.num_joints(); ++j) {
    const Vec3& o = skeleton.bone_offset[j];
    json parent = skeleton.parent_index[j] < 0
                      ? json(nullptr)
                      : json(skeleton.joint_names[skeleton.parent_index[j]]);
    joints.push_back({{"name", skeleton.joint_names[j]},
                      {"parent", parent},
                      {"offset", {o.x(), o.y(), o.z()}},
                      {"radius", skeleton.capsule_radius[j]}});
  }
  json doc = {{"format_version", kSkeletonFormatVersion}, {"units", "meters"}, {"joints", joints}};
  return doc.dump(2) + "\n";
}

Skeleton skeleton_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("skeleton file is not valid JSON: ") + e.what());
  }
  if (!doc.contains("format_version")) throw ConfigError("skeleton file lacks 'format_version'");
  if (doc["format_version"] != kSkeletonFormatVersion) {
    throw ConfigError("unsupported skeleton format_version " + doc["format_version"].dump());
  }
  if (!doc.contains("joints") || !doc["joints"].is_array()) {
    throw ConfigError("skeleton file lacks a 'joints' array");
  }
  Skeleton s;
  for (const auto& jj : doc["joints"]) {
    for (const char* key : {"name", "parent", "offset", "radius"}) {
      if (!jj.contains(key)) throw ConfigError(std::string("skeleton joint lacks '") + key + "'");
    }
    const std::string name = jj["name"].get<std::string>();
    int parent = -1;
    if (!jj["parent"].is_null()) {
      const std::string pname = jj["parent"].get<std::string>();
      auto it = std::find(s.joint_names.begin(), s.joint_names.end(), pname);
      if (it == s.joint_names.end()) {
        throw ConfigError("joint '" + name + "' references unknown or later parent '" + pname + "'");
      }
      parent = static_cast<int>(it - s.joint_names.begin());
    }
    const auto off = jj["offset"].get<std::vector<double>>();
    if (off.size() != 3) throw ConfigError("joint '" + name + "' offset must have 3 entries");
    s.joint_names.push_back(name);
    s.parent_index.push_back(parent);
    s.bone_offset.emplace_back(off[0], off[1], off[2]);
    s.capsule_radius.push_back(jj["radius"].get<double>());
  }
  try {
    s.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("invalid skeleton: ") + e.what());
  }
  return s;
}

Skeleton load_skeleton(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open skeleton file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return skeleton_from_json_text(ss.str());
}

void save_skeleton(const Skeleton& skeleton, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write skeleton file " + path.string());
  out << skeleton_to_json_text(skeleton);
}

void SmplPoseSequence::validate() const {
  const int n = num_frames();
  if (n < 1) throw ValidationError("pose sequence has no frames");
  if (pose.size() != static_cast<size_t>(n) * kSmplPoseDims) {
    throw ValidationError("pose array holds " + std::to_string(pose.size()) + " values, expected " +
                          std::to_string(n * kSmplPoseDims));
  }
  if (betas.size() != kSmplBetaCount) throw ValidationError("betas must have 10 entries");
  for (double b : betas) {
    if (!std::isfinite(b)) throw ValidationError("non-finite beta");
  }
  for (int i = 0; i < n; ++i) {
    if (!finite3(trans[i])) throw ValidationError("non-finite translation at frame " + std::to_string(i));
    auto f = frame(i);
    for (int j = 0; j < kSmplJointCount; ++j) {
      const Vec3 aa(f[3 * j], f[3 * j + 1], f[3 * j + 2]);
      if (!finite3(aa)) {
        throw ValidationError("non-finite rotation at frame " + std::to_string(i) + " joint " +
                              std::to_string(j));
      }
      if (aa.norm() > 2.0 * std::numbers::pi + 1e-9) {
        throw ValidationError("axis-angle norm above 2*pi at frame " + std::to_string(i) +
                              " joint " + std::to_string(j));
      }
    }
  }
}

Mat3 rodrigues(const Vec3& axis_angle) {
  const double theta = axis_angle.norm();
  Mat3 k;
  k << 0, -axis_angle.z(), axis_angle.y(), axis_angle.z(), 0, -axis_angle.x(), -axis_angle.y(),
      axis_angle.x(), 0;
  if (theta < 1e-12) return Mat3::Identity() + k;
  k /= theta;
  return Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

Vec3 rotation_to_axis_angle(const Mat3& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.axis() * aa.angle();
}

std::vector<Vec3> forward_kinematics(std::span<const double> axis_angles, const Skeleton& skeleton,
                                     const Vec3& trans) {
  const int n = skeleton.num_joints();
  if (static_cast<int>(axis_angles.size()) != 3 * n) {
    throw ValidationError("forward_kinematics: expected " + std::to_string(3 * n) +
                          " rotation values, got " + std::to_string(axis_angles.size()));
  }
  for (double v : axis_angles) {
    if (!std::isfinite(v)) throw ValidationError("forward_kinematics: non-finite rotation");
  }
  if (!finite3(trans)) throw ValidationError("forward_kinematics: non-finite translation");
  skeleton.validate();

  std::vector<Mat3> global(n);
  std::vector<Vec3> pos(n);
  for (int j = 0; j < n; ++j) {
    const Mat3 local =
        rodrigues(Vec3(axis_angles[3 * j], axis_angles[3 * j + 1], axis_angles[3 * j + 2]));
    const int p = skeleton.parent_index[j];
    if (p < 0) {
      pos[j] = trans + skeleton.bone_offset[j];
      global[j] = local;
    } else {
      pos[j] = pos[p] + global[p] * skeleton.bone_offset[j];
      global[j] = global[p] * local;
    }
  }
  return pos;
}

long Mask::count() const {
  return static_cast<long>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

double mask_iou(const Mask& a, const Mask& b) {
  if (a.height != b.height || a.width != b.width) throw ValidationError("mask_iou: shape mismatch");
  long inter = 0, uni = 0;
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    inter += (a.pixels[i] && b.pixels[i]);
    uni += (a.pixels[i] || b.pixels[i]);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Mask mirror_horizontal(const Mask& m) {
  Mask out(m.height, m.width);
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c) out.at(r, m.width - 1 - c) = m.at(r, c);
  return out;
}

CapsuleProjector::CapsuleProjector(Skeleton skeleton, double world_height_m)
    : skeleton_(std::move(skeleton)), world_height_m_(world_height_m) {
  skeleton_.validate();
  if (!(world_height_m_ > 0)) throw ValidationError("world height must be positive");
}

Mask CapsuleProjector::project(std::span<const Vec3> joint_positions, double view_angle_deg,
                               ImageSize size) const {
  const int n = skeleton_.num_joints();
  if (size.height < 16 || size.width < 16) {
    throw ValidationError("project_silhouette: image must be at least 16x16");
  }
  if (static_cast<int>(joint_positions.size()) != n) {
    throw ValidationError("project_silhouette: joint count does not match skeleton");
  }
  if (!std::isfinite(view_angle_deg)) throw ValidationError("project_silhouette: bad view angle");
  double spread = 0.0;
  for (int j = 0; j < n; ++j) {
    if (!finite3(joint_positions[j])) throw ValidationError("project_silhouette: non-finite joint");
    spread = std::max(spread, (joint_positions[j] - joint_positions[0]).cwiseAbs().maxCoeff());
  }
  if (n < 2 || spread < 1e-12) {
    throw ValidationError("project_silhouette: degenerate skeleton (all joints coincide)");
  }

  const auto [c, s] = cos_sin_deg(view_angle_deg);
  std::vector<double> u(n), v(n);
  for (int j = 0; j < n; ++j) {
    const Vec3& p = joint_positions[j];
    u[j] = c * p.x() + s * p.z();
    v[j] = p.y();
  }
  const auto [umin, umax] = std::minmax_element(u.begin(), u.end());
  const auto [vmin, vmax] = std::minmax_element(v.begin(), v.end());
  const double cu = 0.5 * (*umin + *umax);
  const double cv = 0.5 * (*vmin + *vmax);
  // Snap centered coordinates to a nanometer grid so that rounding noise
  // from a global translation cannot flip boundary pixels.
  for (int j = 0; j < n; ++j) {
    u[j] = std::round((u[j] - cu) * 1e9) * 1e-9;
    v[j] = std::round((v[j] - cv) * 1e9) * 1e-9;
  }

  const double scale = size.height / world_height_m_;  // pixels per meter
  Mask mask(size.height, size.width);
  const double half_w = 0.5 * size.width, half_h = 0.5 * size.height;
  for (int j = 1; j < n; ++j) {
    const int p = skeleton_.parent_index[j];
    const double ax = u[p], ay = v[p], bx = u[j], by = v[j];
    const double r = skeleton_.capsule_radius[j];
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    // Pixel range covering the capsule's bounding box.
    const int c0 = std::max(0, static_cast<int>(std::floor((std::min(ax, bx) - r) * scale + half_w)) - 1);
    const int c1 = std::min(size.width - 1, static_cast<int>(std::ceil((std::max(ax, bx) + r) * scale + half_w)) + 1);
    const int r0 = std::max(0, static_cast<int>(std::floor(half_h - (std::max(ay, by) + r) * scale)) - 1);
    const int r1 = std::min(size.height - 1, static_cast<int>(std::ceil(half_h - (std::min(ay, by) - r) * scale)) + 1);
    for (int row = r0; row <= r1; ++row) {
      const double py = (half_h - row - 0.5) / scale;
      for (int col = c0; col <= c1; ++col) {
        const double px = (col + 0.5 - half_w) / scale;
        double t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double ex = px - (ax + t * dx), ey = py - (ay + t * dy);
        if (ex * ex + ey * ey <= r * r) mask.at(row, col) = 1;
      }
    }
  }
  return mask;
}

Mask project_silhouette(std::span<const Vec3> joint_positions, double view_angle_deg,
                        ImageSize size, const Skeleton& skeleton) {
  return CapsuleProjector(skeleton).project(joint_positions, view_angle_deg, size);
}

void CanonicalLayout::validate() const {
  if (H < 1 || W < 1) throw ValidationError("canonical layout needs H >= 1 and W >= 1");
  std::set<std::pair<int, int>> seen;
  for (int j = 0; j < num_joints(); ++j) {
    const auto [h, w] = coords[j];
    if (h < 0 || h > H || w < 0 || w > W) {
      throw ValidationError("canonical coordinate of joint " + std::to_string(j) + " out of range");
    }
    if (!seen.insert(coords[j]).second) {
      throw ValidationError("canonical coordinate of joint " + std::to_string(j) + " is duplicated");
    }
  }
}

CanonicalLayout rest_pose_canonical_coords(const Skeleton& skeleton, int H, int W) {
  skeleton.validate();
  if (H < 1 || W < 1) throw ValidationError("canonical grid needs H >= 1 and W >= 1");
  const int n = skeleton.num_joints();
  const std::vector<double> zeros(3 * static_cast<size_t>(n), 0.0);
  const auto rest = forward_kinematics(zeros, skeleton, Vec3::Zero());

  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  double xmin = ymin, xmax = -ymin;
  for (const Vec3& p : rest) {
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
  }
  auto normalize = [](double v, double lo, double hi, int extent) {
    if (hi - lo <= 0) return 0;
    return static_cast<int>(std::lround((v - lo) / (hi - lo) * extent));
  };

  CanonicalLayout layout;
  layout.H = H;
  layout.W = W;
  std::set<std::pair<int, int>> taken;
  std::vector<std::string> unresolved;
  for (int j = 0; j < n; ++j) {
    std::pair<int, int> cell{normalize(ymax - rest[j].y(), 0.0, ymax - ymin, H),
                             normalize(rest[j].x(), xmin, xmax, W)};
    if (taken.count(cell)) {
      // Nearest free neighbor; scanning row-major keeps the first of equals.
      int best_d2 = std::numeric_limits<int>::max();
      std::pair<int, int> best{-1, -1};
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const std::pair<int, int> cand{cell.first + dr, cell.second + dc};
          if (cand.first < 0 || cand.first > H || cand.second < 0 || cand.second > W) continue;
          if (taken.count(cand)) continue;
          const int d2 = dr * dr + dc * dc;
          if (d2 < best_d2) {
            best_d2 = d2;
            best = cand;
          }
        }
      }
      if (best.first < 0) {
        unresolved.push_back(skeleton.joint_names[j]);
      } else {
        cell = best;
      }
    }
    taken.insert(cell);
    layout.coords.push_back(cell);
  }
  if (!unresolved.empty()) {
    std::string msg = "canonical grid " + std::to_string(H) + "x" + std::to_string(W) +
                      " too small; colliding joints:";
    for (const auto& name : unresolved) msg += " " + name;
    throw ValidationError(msg);
  }
  return layout;
}

}  // namespace hybridgait
