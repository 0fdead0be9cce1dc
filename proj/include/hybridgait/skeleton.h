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

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hybridgait/common.h"

namespace hybridgait {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kSmplJointCount = 24;
inline constexpr int kSmplPoseDims = 3 * kSmplJointCount;
inline constexpr int kSmplBetaCount = 10;
inline constexpr int kSkeletonFormatVersion = 1;

/// Kinematic tree with rest-pose bone offsets and per-bone capsule radii.
///
/// Coordinates are meters in a right-handed frame: +x is the subject's left,
/// +y is up and +z is the facing direction. `bone_offset[j]` is the rest-pose
/// vector from the parent joint to joint j (for the root: from the origin).
/// `capsule_radius[j]` belongs to the bone that ends at joint j.
///
/// The general form (any joint count) exists so that tiny test skeletons can
/// be built; everything that consumes SMPL poses requires 24 joints.
struct Skeleton {
  std::vector<std::string> joint_names;
  std::vector<int> parent_index;  // -1 for the root
  std::vector<Vec3> bone_offset;
  std::vector<double> capsule_radius;

  int num_joints() const { return static_cast<int>(parent_index.size()); }

  /// Tree shape, finiteness and radius checks. Throws ValidationError.
  void validate() const;
  /// validate() plus the 24-joint SMPL layout requirement.
  void validate_smpl() const;

  /// Copy with every bone offset and radius multiplied by `factor`.
  Skeleton scaled(double factor) const;

  /// Hand-authored adult skeleton (1.7 m tall) in the SMPL joint order.
  static Skeleton default_smpl();
};

Skeleton load_skeleton(const std::filesystem::path& path);
void save_skeleton(const Skeleton& skeleton, const std::filesystem::path& path);
std::string skeleton_to_json_text(const Skeleton& skeleton);
Skeleton skeleton_from_json_text(const std::string& text);

/// Per-frame SMPL parameters of one tracklet.
struct SmplPoseSequence {
  std::vector<double> pose;   // frames x 72 axis-angle components, radians
  std::vector<double> betas;  // 10 shape scalars (kept for format fidelity)
  std::vector<Vec3> trans;    // frames root translations, meters

  int num_frames() const { return static_cast<int>(trans.size()); }
  std::span<const double> frame(int i) const {
    return std::span<const double>(pose).subspan(static_cast<size_t>(i) * kSmplPoseDims,
                                                 kSmplPoseDims);
  }
  void validate() const;
};

Mat3 rodrigues(const Vec3& axis_angle);
/// Inverse of rodrigues(), angle in [0, pi].
Vec3 rotation_to_axis_angle(const Mat3& rotation);

/// World joint positions for one frame. `axis_angles` holds 3 values per
/// joint; the root rotation is applied to the whole tree.
std::vector<Vec3> forward_kinematics(std::span<const double> axis_angles,
                                     const Skeleton& skeleton, const Vec3& trans);

struct ImageSize {
  int height = 64;
  int width = 64;
};

/// Binary image, row-major, values 0 or 1.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), pixels(static_cast<size_t>(h) * w, 0) {}
  std::uint8_t& at(int r, int c) { return pixels[static_cast<size_t>(r) * width + c]; }
  std::uint8_t at(int r, int c) const { return pixels[static_cast<size_t>(r) * width + c]; }
  long count() const;
  bool operator==(const Mask&) const = default;
};

double mask_iou(const Mask& a, const Mask& b);
Mask mirror_horizontal(const Mask& m);

/// Renders posed joints to a fixed-view binary silhouette.
class Projector {
 public:
  virtual ~Projector() = default;
  virtual Mask project(std::span<const Vec3> joint_positions, double view_angle_deg,
                       ImageSize size) const = 0;
};

/// Orthographic capsule-body renderer. The figure is centered on the bounding
/// box of its projected joints; `world_height_m` meters span the image height.
class CapsuleProjector final : public Projector {
 public:
  explicit CapsuleProjector(Skeleton skeleton, double world_height_m = 2.2);
  Mask project(std::span<const Vec3> joint_positions, double view_angle_deg,
               ImageSize size) const override;
  const Skeleton& skeleton() const { return skeleton_; }

 private:
  Skeleton skeleton_;
  double world_height_m_;
};

Mask project_silhouette(std::span<const Vec3> joint_positions, double view_angle_deg,
                        ImageSize size, const Skeleton& skeleton);

/// Integer rest-pose grid: row 0 holds the highest joint, column W the joint
/// furthest towards the subject's left.
struct CanonicalLayout {
  std::vector<std::pair<int, int>> coords;  // (row h_j, column w_j)
  int H = 0;
  int W = 0;

  int num_joints() const { return static_cast<int>(coords.size()); }
  void validate() const;
  bool operator==(const CanonicalLayout&) const = default;
};

/// Min-max normalizes the frontal rest pose into [0,H] x [0,W] and rounds.
/// A later joint that lands on an occupied cell moves to the nearest free
/// cell of its 8-neighborhood (row-major order breaks distance ties); if no
/// such cell exists the grid is too small and ValidationError names the
/// colliding joints.
CanonicalLayout rest_pose_canonical_coords(const Skeleton& skeleton, int H, int W);

}  // namespace hybridgait
