// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/types.hpp"
#include "compactvl/pretrain/masking.hpp"

#include <cmath>
#include <span>
#include <stdexcept>

namespace cvl::pretrain {

/// A loss value with its gradient with respect to the logits.
template <typename Scalar>
struct LossResult {
  double value = 0.0;
  Matrix<Scalar> grad;
  Index count = 0;
  bool empty = false;  // nothing contributed; value is 0 by definition
};

/// Summed softmax cross-entropy of the rows whose label is not kIgnoreLabel.
/// The gradient is that of the sum.
template <typename Scalar>
LossResult<Scalar> cross_entropy_sum(const Matrix<Scalar>& logits, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != logits.rows())
    throw ShapeError("cross entropy: one label per logit row required");
  LossResult<Scalar> r;
  r.grad = Matrix<Scalar>::Zero(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[i];
    if (y == kIgnoreLabel) continue;
    if (y < 0 || y >= logits.cols()) throw std::out_of_range("cross entropy: label outside the logit range");
    const Vector<double> row = logits.row(i).transpose().template cast<double>();
    const double m = row.maxCoeff();
    const Vector<double> e = (row.array() - m).exp();
    const double z = e.sum();
    r.value += std::log(z) + m - row(y);
    r.grad.row(i) = (e / z).transpose().template cast<Scalar>();
    r.grad(i, y) -= Scalar(1);
    ++r.count;
  }
  r.empty = r.count == 0;
  return r;
}

/// Mean cross-entropy over masked positions. `logits` has one row per text
/// position. With no masked position the loss is 0 and `empty` is set.
template <typename Scalar>
LossResult<Scalar> mlm_loss(const Matrix<Scalar>& logits, const MaskedBatch& batch) {
  auto r = cross_entropy_sum<Scalar>(logits, batch.labels);
  if (r.count > 0) {
    r.value /= static_cast<double>(r.count);
    r.grad /= static_cast<Scalar>(r.count);
  }
  return r;
}

/// Mean cross-entropy of the 2-way matching head; label 1 is "matched".
/// Softmax over two logits is the logistic function of their difference, so
/// this is binary cross-entropy on l1 - l0.
template <typename Scalar>
LossResult<Scalar> itm_loss(const Matrix<Scalar>& logits, std::span<const int> labels) {
  if (logits.cols() != 2) throw ShapeError("ITM logits must have two columns");
  for (int y : labels)
    if (y != 0 && y != 1) throw std::invalid_argument("ITM labels must be 0 or 1");
  auto r = cross_entropy_sum<Scalar>(logits, labels);
  if (r.count > 0) {
    r.value /= static_cast<double>(r.count);
    r.grad /= static_cast<Scalar>(r.count);
  }
  return r;
}

}  // namespace cvl::pretrain
