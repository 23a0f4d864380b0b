// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/tensor_archive.hpp"
#include "compactvl/cost/arch_json.hpp"
#include "compactvl/transformer/model.hpp"

#include <filesystem>

namespace cvl::transformer {

template <typename Scalar>
TensorArchive to_archive(const TransformerWeights<Scalar>& weights) {
  TensorArchive a;
  a.metadata()["config"] = cost::transformer_to_json(weights.config);
  a.metadata()["model"] = "transformer";
  auto copy = weights;
  copy.visit([&](const std::string& name, Matrix<Scalar>& m) { a.put(name, m); });
  return a;
}

template <typename Scalar>
TransformerWeights<Scalar> from_archive(const TensorArchive& a) {
  if (!a.metadata().contains("config")) throw ConfigError("archive holds no transformer config");
  auto w = TransformerWeights<Scalar>::allocate(cost::transformer_from_json(a.metadata().at("config")));
  w.visit([&](const std::string& name, Matrix<Scalar>& m) {
    if (!a.contains(name)) throw ConfigError("checkpoint is missing tensor " + name);
    Matrix<Scalar> v = a.get<Scalar>(name);
    if (v.rows() != m.rows() || v.cols() != m.cols()) throw ShapeError("checkpoint tensor " + name + " has the wrong shape");
    m = std::move(v);
  });
  return w;
}

template <typename Scalar>
void save_transformer(const TransformerWeights<Scalar>& weights, const std::filesystem::path& path) {
  to_archive(weights).save(path);
}

template <typename Scalar = float>
TransformerWeights<Scalar> load_transformer(const std::filesystem::path& path) {
  return from_archive<Scalar>(TensorArchive::load(path));
}

}  // namespace cvl::transformer
