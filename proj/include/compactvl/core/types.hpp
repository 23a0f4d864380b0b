// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cvl {

using Index = Eigen::Index;
using Count = std::int64_t;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixXf = Matrix<float>;
using MatrixXd = Matrix<double>;

/// Raised when tensor shapes disagree with what an operation or config requires.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for malformed or inconsistent configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure produces a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A C x H x W feature map. Storage is channels x (H*W) with pixels in
/// row-major order, so 1x1 convolutions are a single matrix product.
template <typename Scalar>
struct FeatureMap {
  Index height = 0;
  Index width = 0;
  Matrix<Scalar> data;

  FeatureMap() = default;
  FeatureMap(Index channels, Index h, Index w)
      : height(h), width(w), data(Matrix<Scalar>::Zero(channels, h * w)) {}
  FeatureMap(Index h, Index w, Matrix<Scalar> values)
      : height(h), width(w), data(std::move(values)) {
    if (data.cols() != h * w) throw ShapeError("FeatureMap: data columns != H*W");
  }

  Index channels() const { return data.rows(); }
  Index pixels() const { return height * width; }

  Scalar& at(Index c, Index y, Index x) { return data(c, y * width + x); }
  const Scalar& at(Index c, Index y, Index x) const { return data(c, y * width + x); }

  template <typename Other>
  FeatureMap<Other> cast() const {
    return FeatureMap<Other>(height, width, data.template cast<Other>());
  }
};

}  // namespace cvl
