// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/types.hpp"

#include <random>

namespace cvl {

/// Every stochastic component takes one of these by reference; seeding it is
/// the only source of randomness in the library.
using Rng = std::mt19937_64;

template <typename Scalar>
void fill_normal(Matrix<Scalar>& m, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(dist(rng));
}

/// Normal samples redrawn until they fall within two standard deviations.
template <typename Scalar>
void fill_truncated_normal(Matrix<Scalar>& m, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      double v = dist(rng);
      while (v < -2.0 || v > 2.0) v = dist(rng);
      m(i, j) = static_cast<Scalar>(v * stddev);
    }
  }
}

template <typename Scalar>
void fill_uniform(Matrix<Scalar>& m, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(dist(rng));
}

}  // namespace cvl
