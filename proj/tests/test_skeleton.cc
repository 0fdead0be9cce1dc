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

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "hybridgait/skeleton.h"
#include "support/fixtures.h"

using namespace hybridgait;

namespace {

// Matrix-chain evaluation with Eigen's own angle-axis type.
std::vector<Vec3> fk_oracle(const std::vector<double>& aa, const Skeleton& s, const Vec3& trans) {
  const int n = s.num_joints();
  std::vector<Mat3> global(n);
  std::vector<Vec3> pos(n);
  for (int j = 0; j < n; ++j) {
    const Vec3 v(aa[3 * j], aa[3 * j + 1], aa[3 * j + 2]);
    const double angle = v.norm();
    const Mat3 local =
        angle > 0 ? Eigen::AngleAxisd(angle, v / angle).toRotationMatrix() : Mat3(Mat3::Identity());
    const int p = s.parent_index[j];
    if (p < 0) {
      global[j] = local;
      pos[j] = trans + s.bone_offset[j];
    } else {
      global[j] = global[p] * local;
      pos[j] = pos[p] + global[p] * s.bone_offset[j];
    }
  }
  return pos;
}

std::vector<double> random_pose(std::mt19937_64& rng, double max_angle = 1.2) {
  std::normal_distribution<double> g(0, 1);
  std::uniform_real_distribution<double> u(0, max_angle);
  std::vector<double> aa(kSmplPoseDims);
  for (int j = 0; j < kSmplJointCount; ++j) {
    Vec3 axis(g(rng), g(rng), g(rng));
    axis = axis.normalized() * u(rng);
    for (int d = 0; d < 3; ++d) aa[3 * j + d] = axis[d];
  }
  return aa;
}

double max_dist(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).norm());
  return m;
}

Skeleton two_joint(double radius) {
  Skeleton s;
  s.joint_names = {"a", "b"};
  s.parent_index = {-1, 0};
  s.bone_offset = {Vec3(0, 0, 0), Vec3(0, 1, 0)};
  s.capsule_radius = {radius, radius};
  return s;
}

}  // namespace

TEST_SUITE("skeleton") {

TEST_CASE("zero rotations give cumulative rest offsets") {
  const Skeleton s = Skeleton::default_smpl();
  const std::vector<double> zero(kSmplPoseDims, 0.0);
  const auto pos = forward_kinematics(zero, s, Vec3::Zero());
  for (int j = 0; j < s.num_joints(); ++j) {
    Vec3 expect = Vec3::Zero();
    for (int k = j; k >= 0; k = s.parent_index[k]) expect += s.bone_offset[k];
    CHECK((pos[j] - expect).norm() < 1e-12);
  }
  const auto shifted = forward_kinematics(zero, s, Vec3(1, 0, 0));
  for (int j = 0; j < s.num_joints(); ++j) CHECK((shifted[j] - pos[j] - Vec3(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("quarter turn of the root matches the matrix chain") {
  const Skeleton s = Skeleton::default_smpl();
  std::vector<double> aa(kSmplPoseDims, 0.0);
  aa[1] = std::numbers::pi / 2;
  const auto pos = forward_kinematics(aa, s, Vec3::Zero());
  CHECK(max_dist(pos, fk_oracle(aa, s, Vec3::Zero())) < 1e-12);
  const std::vector<double> zero(kSmplPoseDims, 0.0);
  const auto rest = forward_kinematics(zero, s, Vec3::Zero());
  const Mat3 R = Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitY()).toRotationMatrix();
  for (int j = 1; j < s.num_joints(); ++j) CHECK((pos[j] - (pos[0] + R * (rest[j] - rest[0]))).norm() < 1e-12);
}

TEST_CASE("random poses match the matrix chain") {
  std::mt19937_64 rng(7);
  const Skeleton s = Skeleton::default_smpl();
  for (int t = 0; t < 50; ++t) {
    const auto aa = random_pose(rng, 3.0);
    const Vec3 trans(rng() % 100 / 37.0, 0.3, -1.1);
    CHECK(max_dist(forward_kinematics(aa, s, trans), fk_oracle(aa, s, trans)) < 1e-12);
  }
}

TEST_CASE("forward kinematics is equivariant under root translation and rotation") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0, 1);
  const Skeleton s = Skeleton::default_smpl();
  for (int t = 0; t < 60; ++t) {
    auto aa = random_pose(rng);
    const Vec3 trans(g(rng), g(rng), g(rng));
    const Vec3 d(g(rng), g(rng), g(rng));
    const auto base = forward_kinematics(aa, s, trans);

    const auto moved = forward_kinematics(aa, s, trans + d);
    for (size_t j = 0; j < base.size(); ++j) CHECK((moved[j] - base[j] - d).norm() < 1e-9);

    // Pre-compose a rotation Q with the root: positions rotate about the root.
    const Mat3 Q = rodrigues(Vec3(g(rng), g(rng), g(rng)).normalized() * 1.3);
    const Mat3 R0 = rodrigues(Vec3(aa[0], aa[1], aa[2]));
    const Vec3 root_aa = rotation_to_axis_angle(Q * R0);
    for (int d2 = 0; d2 < 3; ++d2) aa[d2] = root_aa[d2];
    const auto rotated = forward_kinematics(aa, s, trans);
    for (size_t j = 0; j < base.size(); ++j) {
      CHECK((rotated[j] - (base[0] + Q * (base[j] - base[0]))).norm() < 1e-9);
    }
  }
}

TEST_CASE("axis-angle round trip") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 1);
  for (int t = 0; t < 50; ++t) {
    const Vec3 v = Vec3(g(rng), g(rng), g(rng)).normalized() * (0.05 + 3.0 * (t / 50.0));
    const Mat3 R = rodrigues(v);
    CHECK((rodrigues(rotation_to_axis_angle(R)) - R).norm() < 1e-9);
    CHECK((R - Eigen::AngleAxisd(v.norm(), v.normalized()).toRotationMatrix()).norm() < 1e-12);
  }
}

TEST_CASE("forward kinematics rejects bad input") {
  const Skeleton s = Skeleton::default_smpl();
  std::vector<double> aa(kSmplPoseDims, 0.0);
  aa[5] = NAN;
  CHECK_THROWS_AS(forward_kinematics(aa, s, Vec3::Zero()), ValidationError);
  aa[5] = 0;
  CHECK_THROWS_AS(forward_kinematics(aa, s, Vec3(0, INFINITY, 0)), ValidationError);
  CHECK_THROWS_AS(forward_kinematics(std::vector<double>(9, 0.0), s, Vec3::Zero()), ValidationError);
}

TEST_CASE("rest pose renders upright and nonempty") {
  const Skeleton s = Skeleton::default_smpl();
  const auto rest = forward_kinematics(std::vector<double>(kSmplPoseDims, 0.0), s, Vec3::Zero());
  struct Box { int top = 64, bottom = -1, left = 64, right = -1; };
  auto box_of = [](const Mask& m) {
    Box b;
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c)
        if (m.at(r, c)) {
          b.top = std::min(b.top, r);
          b.bottom = std::max(b.bottom, r);
          b.left = std::min(b.left, c);
          b.right = std::max(b.right, c);
        }
    return b;
  };
  const Mask front = project_silhouette(rest, 0.0, {64, 64}, s);
  REQUIRE(front.count() > 0);
  const Box fb = box_of(front);
  CHECK(fb.bottom - fb.top > fb.right - fb.left);
  // The topmost pixels belong to the head, centered between the hands.
  int head_sum = 0, head_n = 0;
  for (int c = 0; c < 64; ++c)
    if (front.at(fb.top, c)) head_sum += c, ++head_n;
  CHECK(std::abs(static_cast<double>(head_sum) / head_n - 0.5 * (fb.left + fb.right)) < 2.0);
  const Box sb = box_of(project_silhouette(rest, 90.0, {64, 64}, s));
  CHECK(sb.bottom - sb.top > 2 * (sb.right - sb.left));
}

TEST_CASE("front and back views mirror each other") {
  std::mt19937_64 rng(5);
  const Skeleton s = Skeleton::default_smpl();
  for (int t = 0; t < 10; ++t) {
    const auto pos = forward_kinematics(random_pose(rng, 0.6), s, Vec3::Zero());
    const Mask front = project_silhouette(pos, 0.0, {64, 64}, s);
    const Mask back = project_silhouette(pos, 180.0, {64, 64}, s);
    CHECK(mirror_horizontal(front) == back);
  }
}

TEST_CASE("single capsule covers its analytic area") {
  const double r = 0.1;
  const Skeleton s = two_joint(r);
  const std::vector<Vec3> joints{Vec3(0, 0, 0), Vec3(0, 1, 0)};
  const Mask m = CapsuleProjector(s, 2.2).project(joints, 0.0, {256, 256});
  const double px_per_m = 256 / 2.2;
  const double area = (2 * r * 1.0 + std::numbers::pi * r * r) * px_per_m * px_per_m;
  CHECK(std::abs(m.count() - area) / area < 0.05);
}

TEST_CASE("degenerate skeletons are rejected") {
  Skeleton s = two_joint(0.1);
  s.bone_offset[1] = Vec3::Zero();
  const std::vector<Vec3> joints{Vec3(0, 0, 0), Vec3(0, 0, 0)};
  CHECK_THROWS_AS(project_silhouette(joints, 0.0, {64, 64}, s), ValidationError);
  Skeleton cyc = two_joint(0.1);
  cyc.parent_index = {-1, 1};
  CHECK_THROWS_AS(cyc.validate(), ValidationError);
  Skeleton neg = two_joint(0.1);
  neg.capsule_radius[1] = -1;
  CHECK_THROWS_AS(neg.validate(), ValidationError);
  CHECK_THROWS_AS(two_joint(0.1).validate_smpl(), ValidationError);
}

TEST_CASE("rendered masks are binary and nonempty for random poses") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> view(0, 360);
  const Skeleton s = Skeleton::default_smpl();
  for (int t = 0; t < 60; ++t) {
    const auto pos = forward_kinematics(random_pose(rng, 2.0), s, Vec3(0.5, -0.2, 3.0));
    const Mask m = project_silhouette(pos, view(rng), {64, 64}, s);
    CHECK(m.count() > 0);
    for (auto v : m.pixels) CHECK((v == 0 || v == 1));
  }
}

TEST_CASE("two-joint canonical layout") {
  const CanonicalLayout l = rest_pose_canonical_coords(two_joint(0.1), 1, 1);
  REQUIRE(l.num_joints() == 2);
  // Higher joint on row 0.
  CHECK(l.coords[0] == std::pair{1, 0});
  CHECK(l.coords[1] == std::pair{0, 0});
}

TEST_CASE("default canonical layout matches the golden file") {
  const Skeleton s = Skeleton::default_smpl();
  const CanonicalLayout l = rest_pose_canonical_coords(s, 15, 10);
  std::ifstream in(test_data_dir() / "canonical_layout_h15_w10.json");
  REQUIRE(in);
  const auto golden = nlohmann::json::parse(in);
  REQUIRE(golden.at("joints").size() == 24);
  for (int j = 0; j < 24; ++j) {
    const auto& row = golden["joints"][j];
    CHECK(row.at("name").get<std::string>() == s.joint_names[j]);
    CHECK(l.coords[j].first == row.at("row").get<int>());
    CHECK(l.coords[j].second == row.at("col").get<int>());
  }

  std::set<std::pair<int, int>> cells(l.coords.begin(), l.coords.end());
  CHECK(cells.size() == 24);
  CHECK(l.coords[15].first <= 2);  // head
  for (int j : {10, 11}) CHECK(l.coords[j].first >= 14);  // feet
  for (int j = 0; j < 24; ++j) {
    const std::string& name = s.joint_names[j];
    if (name.rfind("left_", 0) != 0) continue;
    const int mate = static_cast<int>(std::find(s.joint_names.begin(), s.joint_names.end(),
                                                "right_" + name.substr(5)) - s.joint_names.begin());
    CHECK(l.coords[j].first == l.coords[mate].first);
    CHECK(l.coords[j].second + l.coords[mate].second == 10);
  }
}

TEST_CASE("canonical layout ignores uniform scale") {
  const Skeleton s = Skeleton::default_smpl();
  for (int H : {15, 20, 31})
    for (double f : {2.0, 0.5, 3.7}) {
      CHECK(rest_pose_canonical_coords(s.scaled(f), H, 10) == rest_pose_canonical_coords(s, H, 10));
    }
}

TEST_CASE("too small a grid names the colliding joints") {
  try {
    rest_pose_canonical_coords(Skeleton::default_smpl(), 1, 1);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("colliding joints") != std::string::npos);
    CHECK(std::string(e.what()).find("_") != std::string::npos);
  }
}

TEST_CASE("skeleton file round trip") {
  const Skeleton s = Skeleton::default_smpl();
  const Skeleton back = skeleton_from_json_text(skeleton_to_json_text(s));
  CHECK(back.joint_names == s.joint_names);
  CHECK(back.parent_index == s.parent_index);
  CHECK(back.capsule_radius == s.capsule_radius);
  for (int j = 0; j < 24; ++j) CHECK(back.bone_offset[j] == s.bone_offset[j]);

  const Skeleton shipped = load_skeleton(test_data_dir().parent_path().parent_path() / "data" / "default_skeleton.json");
  CHECK(shipped.joint_names == s.joint_names);
  for (int j = 0; j < 24; ++j) CHECK((shipped.bone_offset[j] - s.bone_offset[j]).norm() < 1e-12);

  auto doc = nlohmann::json::parse(skeleton_to_json_text(s));
  doc["format_version"] = 99;
  CHECK_THROWS_AS(skeleton_from_json_text(doc.dump()), ConfigError);
  doc["format_version"] = 1;
  doc["joints"][3]["parent"] = "nobody";
  CHECK_THROWS_AS(skeleton_from_json_text(doc.dump()), ConfigError);
  CHECK_THROWS_AS(skeleton_from_json_text("{not json"), ConfigError);
}

TEST_CASE("mask iou") {
  Mask a(2, 2), b(2, 2);
  a.at(0, 0) = a.at(0, 1) = 1;
  b.at(0, 1) = b.at(1, 1) = 1;
  CHECK(mask_iou(a, b) == doctest::Approx(1.0 / 3));
  CHECK(mask_iou(a, a) == 1.0);
  CHECK_THROWS_AS(mask_iou(a, Mask(3, 2)), ValidationError);
}

}  // TEST_SUITE
