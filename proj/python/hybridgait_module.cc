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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <set>

#include <nlohmann/json.hpp>

#include "hybridgait/dataio.h"
#include "hybridgait/retrieval_eval.h"
#include "hybridgait/temporal_branch.h"
#include "hybridgait/trainer.h"

namespace py = pybind11;
using namespace hybridgait;
using nlohmann::json;

namespace {

json to_cpp(const py::object& obj) {
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

TrainConfig train_config_arg(const py::object& config) {
  if (py::isinstance<py::str>(config)) return load_train_config(config.cast<std::string>());
  return train_config_from_json(to_cpp(config));
}

std::vector<double> pose_arg(const py::array_t<double, py::array::c_style | py::array::forcecast>& pose) {
  if (pose.size() != kSmplPoseDims) throw ValidationError("pose must hold 72 axis-angle values");
  return {pose.data(), pose.data() + pose.size()};
}

EmbeddingSet embedding_set(const py::array_t<double, py::array::c_style | py::array::forcecast>& vectors,
                           const std::vector<std::string>& identities, const std::vector<std::string>& sequence_ids) {
  if (vectors.ndim() != 2) throw ValidationError("embeddings must be a 2-D array");
  if (static_cast<size_t>(vectors.shape(0)) != identities.size() || identities.size() != sequence_ids.size()) {
    throw ValidationError("embeddings, identities and sequence ids differ in length");
  }
  EmbeddingSet s;
  const auto d = vectors.shape(1);
  for (py::ssize_t i = 0; i < vectors.shape(0); ++i) {
    s.add(std::vector<Real>(vectors.data(i, 0), vectors.data(i, 0) + d), identities[i], sequence_ids[i]);
  }
  return s;
}

py::dict synthesize(const py::object& config, std::uint64_t seed, const std::string& out) {
  const SynthConfig cfg = synth_config_from_json(to_cpp(config));
  DatasetIndex idx;
  {
    py::gil_scoped_release release;
    idx = generate_synthetic_dataset(cfg, seed, out);
  }
  std::set<std::string> ids;
  for (const auto& e : idx.entries) ids.insert(e.identity);
  py::dict d;
  d["identities"] = ids.size();
  d["sequences"] = idx.entries.size();
  d["train"] = idx.split(Split::kTrain).size();
  d["query"] = idx.split(Split::kQuery).size();
  d["gallery"] = idx.split(Split::kGallery).size();
  return d;
}

py::dict project(const std::string& data, double view, bool force) {
  ProjectionReport r;
  {
    py::gil_scoped_release release;
    DatasetIndex idx = load_dataset(data);
    r = precompute_projections(idx, view, force);
  }
  py::dict d;
  d["written"] = r.written;
  d["up_to_date"] = r.up_to_date;
  return d;
}

py::list train(const py::object& config, const std::string& data, const std::string& out, std::int64_t max_steps) {
  TrainConfig cfg = train_config_arg(config);
  if (!data.empty()) cfg.data_root = data;
  if (!out.empty()) cfg.out_dir = out;
  cfg.validate();
  std::vector<StepRecord> records;
  {
    py::gil_scoped_release release;
    Trainer trainer(cfg, load_dataset(cfg.data_root));
    records = trainer.run(max_steps);
  }
  py::list steps;
  for (const auto& r : records) steps.append(to_py(to_json(r)));
  return steps;
}

py::dict embed(const std::string& ckpt_path, const std::string& data, const std::string& split) {
  EmbeddingSet set;
  {
    py::gil_scoped_release release;
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const auto model = model_from_checkpoint(ckpt);
    set = extract_embeddings(*model, load_dataset(data), parse_split(split));
  }
  py::array_t<double> vectors({static_cast<py::ssize_t>(set.size()), static_cast<py::ssize_t>(set.dim)});
  std::copy(set.vectors.begin(), set.vectors.end(), vectors.mutable_data());
  py::dict d;
  d["vectors"] = vectors;
  d["identities"] = set.identities;
  d["sequence_ids"] = set.sequence_ids;
  return d;
}

}  // namespace

PYBIND11_MODULE(_hybridgait, m) {
  m.doc() = "HybridGait core: skeleton geometry, alignment, training and retrieval.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());

  m.def(
      "forward_kinematics",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pose, std::array<double, 3> trans) {
        const auto pos = forward_kinematics(pose_arg(pose), Skeleton::default_smpl(), Vec3(trans[0], trans[1], trans[2]));
        py::array_t<double> out({static_cast<py::ssize_t>(pos.size()), py::ssize_t{3}});
        auto o = out.mutable_unchecked<2>();
        for (size_t j = 0; j < pos.size(); ++j)
          for (int d = 0; d < 3; ++d) o(j, d) = pos[j][d];
        return out;
      },
      py::arg("pose"), py::arg("trans") = std::array<double, 3>{0, 0, 0},
      "Joint positions [24, 3] of the default skeleton for 72 axis-angle values.");

  m.def(
      "render_silhouette",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pose, double view_deg, int size) {
        const Skeleton s = Skeleton::default_smpl();
        const Mask mask = project_silhouette(forward_kinematics(pose_arg(pose), s, Vec3::Zero()), view_deg, {size, size}, s);
        py::array_t<std::uint8_t> out({size, size});
        std::copy(mask.pixels.begin(), mask.pixels.end(), out.mutable_data());
        return out;
      },
      py::arg("pose"), py::arg("view_deg") = 0.0, py::arg("size") = 64, "Binary silhouette of a posed default skeleton.");

  m.def(
      "canonical_layout",
      [](int H, int W) { return rest_pose_canonical_coords(Skeleton::default_smpl(), H, W).coords; },
      py::arg("H") = 15, py::arg("W") = 10, "Rest-pose grid cell (row, col) of every default-skeleton joint.");

  m.def(
      "compute_alignment",
      [](int rows, int cols, int k, int H, int W) {
        const AlignmentMap a = compute_alignment(rest_pose_canonical_coords(Skeleton::default_smpl(), H, W), rows, cols, k);
        py::array_t<std::uint8_t> out({a.num_regions(), a.num_joints});
        std::copy(a.omega.begin(), a.omega.end(), out.mutable_data());
        return out;
      },
      py::arg("rows") = 16, py::arg("cols") = 16, py::arg("k") = 7, py::arg("H") = 15, py::arg("W") = 10,
      "Binary region-by-joint selector of the k nearest joints.");

  m.def("synthesize", &synthesize, py::arg("config"), py::arg("seed"), py::arg("out"),
        "Generate a synthetic dataset from a config dict; returns split sizes.");
  m.def("project", &project, py::arg("data"), py::arg("view") = 0.0, py::arg("force") = false,
        "Render fixed-view projections for every sequence of a dataset.");
  m.def("train", &train, py::arg("config"), py::arg("data") = "", py::arg("out") = "", py::arg("max_steps") = 0,
        "Train from a config dict or JSON path; returns the per-step records.");
  m.def("embed", &embed, py::arg("ckpt"), py::arg("data"), py::arg("split"),
        "Embeddings of one split: dict with vectors, identities and sequence_ids.");

  m.def(
      "evaluate",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& qv, const std::vector<std::string>& qi,
         const std::vector<std::string>& qs, const py::array_t<double, py::array::c_style | py::array::forcecast>& gv,
         const std::vector<std::string>& gi, const std::vector<std::string>& gs) {
        return to_py(metrics_json(evaluate(embedding_set(qv, qi, qs), embedding_set(gv, gi, gs))));
      },
      py::arg("query_vectors"), py::arg("query_identities"), py::arg("query_sequence_ids"), py::arg("gallery_vectors"),
      py::arg("gallery_identities"), py::arg("gallery_sequence_ids"), "Rank-1, Rank-5, mAP and mINP.");

  m.def(
      "lr_at", [](int epoch, const py::object& config) { return lr_at(epoch, train_config_arg(config)); },
      py::arg("epoch"), py::arg("config"), "Learning rate of an epoch under a config dict or JSON path.");
  m.def(
      "published_train_config", [] { return to_py(to_json(TrainConfig::published())); },
      "Training config with the published batch, epochs and schedule.");
}
