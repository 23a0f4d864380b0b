// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/tensor_archive.hpp"
#include "compactvl/cost/arch_json.hpp"
#include "compactvl/detector/weights.hpp"

#include <filesystem>

namespace cvl::detector {

/// Weights and buffers under their visit names; the config goes into the
/// archive metadata under "config".
template <typename Scalar>
TensorArchive to_archive(const DetectorWeights<Scalar>& weights) {
  TensorArchive a;
  a.metadata()["config"] = cost::detector_to_json(weights.config);
  a.metadata()["model"] = "detector";
  auto copy = weights;
  copy.visit([&](const std::string& name, Matrix<Scalar>& m, bool) { a.put(name, m); });
  return a;
}

template <typename Scalar>
DetectorWeights<Scalar> from_archive(const TensorArchive& a) {
  if (!a.metadata().contains("config")) throw ConfigError("archive holds no detector config");
  auto w = DetectorWeights<Scalar>::allocate(cost::detector_from_json(a.metadata().at("config")));
  w.visit([&](const std::string& name, Matrix<Scalar>& m, bool) {
    if (!a.contains(name)) throw ConfigError("checkpoint is missing tensor " + name);
    Matrix<Scalar> v = a.get<Scalar>(name);
    if (v.rows() != m.rows() || v.cols() != m.cols()) throw ShapeError("checkpoint tensor " + name + " has the wrong shape");
    m = std::move(v);
  });
  return w;
}

template <typename Scalar>
void save_detector(const DetectorWeights<Scalar>& weights, const std::filesystem::path& path) {
  to_archive(weights).save(path);
}

template <typename Scalar = float>
DetectorWeights<Scalar> load_detector(const std::filesystem::path& path) {
  return from_archive<Scalar>(TensorArchive::load(path));
}

}  // namespace cvl::detector
