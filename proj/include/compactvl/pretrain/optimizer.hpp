// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace cvl::pretrain {

struct AdamWOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  Index warmup_steps = 0;
  Index total_steps = 0;  // 0 keeps the rate constant after warmup
};

/// Linear warmup to `lr`, then linear decay to 0 at `total_steps`.
/// `step` counts from 0.
inline double learning_rate(const AdamWOptions& o, Index step) {
  if (o.warmup_steps > 0 && step < o.warmup_steps)
    return o.lr * static_cast<double>(step + 1) / static_cast<double>(o.warmup_steps);
  if (o.total_steps <= 0) return o.lr;
  const double span = static_cast<double>(std::max<Index>(1, o.total_steps - o.warmup_steps));
  const double done = static_cast<double>(step - o.warmup_steps);
  return o.lr * std::max(0.0, 1.0 - done / span);
}

/// Adam with decoupled weight decay. Works on any weight struct whose
/// visit(f(name, matrix)) enumerates tensors in a fixed order. Decay
/// applies to tensors named "*.weight"; biases and norm parameters are not
/// decayed.
template <typename Scalar>
class AdamW {
 public:
  explicit AdamW(AdamWOptions options = {}) : options_(options) {}

  const AdamWOptions& options() const { return options_; }
  Index steps() const { return step_; }
  double current_lr() const { return learning_rate(options_, step_); }

  template <typename Weights>
  void step(Weights& weights, Weights& grads) {
    std::vector<Matrix<Scalar>*> g;
    grads.visit([&](const std::string&, Matrix<Scalar>& m) { g.push_back(&m); });
    const double lr = learning_rate(options_, step_);
    ++step_;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
    size_t k = 0;
    weights.visit([&](const std::string& name, Matrix<Scalar>& w) {
      const Matrix<Scalar>& gk = *g.at(k);
      if (gk.rows() != w.rows() || gk.cols() != w.cols()) throw ShapeError("AdamW: gradient shape mismatch at " + name);
      if (m_.size() <= k) {
        m_.push_back(Matrix<Scalar>::Zero(w.rows(), w.cols()));
        v_.push_back(Matrix<Scalar>::Zero(w.rows(), w.cols()));
      }
      auto& m = m_[k];
      auto& v = v_[k];
      m = Scalar(options_.beta1) * m + Scalar(1 - options_.beta1) * gk;
      v = Scalar(options_.beta2) * v + Scalar(1 - options_.beta2) * gk.cwiseProduct(gk);
      if (lr != 0.0) {
        if (options_.weight_decay != 0.0 && name.ends_with(".weight")) w *= Scalar(1.0 - lr * options_.weight_decay);
        const Scalar a = static_cast<Scalar>(lr / c1);
        const Scalar s = static_cast<Scalar>(1.0 / std::sqrt(c2));
        w.array() -= a * m.array() / ((v.array().sqrt() * s) + Scalar(options_.eps));
      }
      ++k;
    });
  }

 private:
  AdamWOptions options_;
  Index step_ = 0;
  std::vector<Matrix<Scalar>> m_, v_;
};

}  // namespace cvl::pretrain
