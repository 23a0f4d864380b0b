// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <type_traits>

namespace cvl {

/// Primal value of a scalar; identity for arithmetic types, `.value()` for
/// autodiff scalars. Branches (ReLU, max-pool) compare primal values.
template <typename Scalar>
double value_of(const Scalar& v) {
  if constexpr (std::is_arithmetic_v<Scalar>) {
    return static_cast<double>(v);
  } else {
    return static_cast<double>(v.value());
  }
}

template <typename Scalar>
Scalar sigmoid(const Scalar& v) {
  using std::exp;
  const Scalar e = exp(-v);
  return Scalar(1) / (Scalar(1) + e);
}

template <typename Scalar>
Scalar swish(const Scalar& v) {
  return v * sigmoid(v);
}

template <typename Scalar>
Scalar relu(const Scalar& v) {
  return value_of(v) > 0 ? v : Scalar(0);
}

}  // namespace cvl
