// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/mac_counter.hpp"
#include "compactvl/core/scalar.hpp"
#include "compactvl/core/types.hpp"

#include <algorithm>
#include <string>

namespace cvl::detector {

/// Output extent of a SAME-padded convolution or pooling: ceil(in / stride).
inline Index same_output(Index in, int stride) { return (in + stride - 1) / stride; }

/// Leading padding of a SAME-padded window (the remainder goes to the end).
inline Index same_pad_before(Index in, int kernel, int stride) {
  const Index out = same_output(in, stride);
  const Index total = std::max<Index>((out - 1) * stride + kernel - in, 0);
  return total / 2;
}

template <typename Scalar>
struct BatchNorm {
  Matrix<Scalar> gamma, beta;                 // parameters, C x 1
  Matrix<Scalar> running_mean, running_var;  // buffers, C x 1
  double eps = 1e-3;

  static BatchNorm identity(Index channels) {
    BatchNorm bn;
    bn.gamma = Matrix<Scalar>::Ones(channels, 1);
    bn.beta = Matrix<Scalar>::Zero(channels, 1);
    bn.running_mean = Matrix<Scalar>::Zero(channels, 1);
    bn.running_var = Matrix<Scalar>::Ones(channels, 1);
    return bn;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".gamma", gamma, true);
    f(prefix + ".beta", beta, true);
    f(prefix + ".running_mean", running_mean, false);
    f(prefix + ".running_var", running_var, false);
  }
};

/// Inference-mode batch normalization with running statistics.
template <typename Scalar>
FeatureMap<Scalar> batch_norm(const FeatureMap<Scalar>& x, const BatchNorm<Scalar>& bn) {
  using std::sqrt;
  if (bn.gamma.rows() != x.channels()) throw ShapeError("batch_norm: channel mismatch");
  Vector<Scalar> scale(x.channels()), shift(x.channels());
  for (Index c = 0; c < x.channels(); ++c) {
    const Scalar denom = sqrt(bn.running_var(c, 0) + Scalar(bn.eps));
    scale(c) = bn.gamma(c, 0) / denom;
    shift(c) = bn.beta(c, 0) - bn.running_mean(c, 0) * scale(c);
  }
  FeatureMap<Scalar> y(x.height, x.width, Matrix<Scalar>(x.data.rows(), x.data.cols()));
  y.data = (scale.asDiagonal() * x.data).colwise() + shift;
  return y;
}

template <typename Scalar>
Matrix<Scalar> swish(const Matrix<Scalar>& x) {
  return x.unaryExpr([](const Scalar& v) { return cvl::swish(v); });
}

template <typename Scalar>
Matrix<Scalar> sigmoid(const Matrix<Scalar>& x) {
  return x.unaryExpr([](const Scalar& v) { return cvl::sigmoid(v); });
}

template <typename Scalar>
Matrix<Scalar> relu(const Matrix<Scalar>& x) {
  return x.unaryExpr([](const Scalar& v) { return cvl::relu(v); });
}

template <typename Scalar>
FeatureMap<Scalar> swish(const FeatureMap<Scalar>& x) {
  return FeatureMap<Scalar>(x.height, x.width, swish(x.data));
}

/// Dense SAME-padded convolution. `weight` is out x (in * k * k) with the
/// column index (c * k + ky) * k + kx; `bias` is out x 1 or empty.
template <typename Scalar>
FeatureMap<Scalar> conv2d(const FeatureMap<Scalar>& x, const Matrix<Scalar>& weight, const Matrix<Scalar>& bias,
                          int kernel, int stride) {
  const Index cin = x.channels();
  if (weight.cols() != cin * kernel * kernel) throw ShapeError("conv2d: weight columns != in * k * k");
  const Index ho = same_output(x.height, stride), wo = same_output(x.width, stride);
  const Index py = same_pad_before(x.height, kernel, stride), px = same_pad_before(x.width, kernel, stride);

  Matrix<Scalar> cols = Matrix<Scalar>::Zero(cin * kernel * kernel, ho * wo);
  for (Index oy = 0; oy < ho; ++oy) {
    for (Index ox = 0; ox < wo; ++ox) {
      const Index col = oy * wo + ox;
      for (int ky = 0; ky < kernel; ++ky) {
        const Index iy = oy * stride + ky - py;
        if (iy < 0 || iy >= x.height) continue;
        for (int kx = 0; kx < kernel; ++kx) {
          const Index ix = ox * stride + kx - px;
          if (ix < 0 || ix >= x.width) continue;
          for (Index c = 0; c < cin; ++c) cols((c * kernel + ky) * kernel + kx, col) = x.data(c, iy * x.width + ix);
        }
      }
    }
  }
  count_macs(static_cast<Count>(ho * wo) * weight.rows() * weight.cols());
  FeatureMap<Scalar> y(ho, wo, weight * cols);
  if (bias.size() > 0) y.data.colwise() += bias.col(0);
  return y;
}

/// Depthwise SAME-padded convolution. `weight` is C x (k * k), tap ky * k + kx.
template <typename Scalar>
FeatureMap<Scalar> depthwise_conv2d(const FeatureMap<Scalar>& x, const Matrix<Scalar>& weight,
                                    const Matrix<Scalar>& bias, int kernel, int stride) {
  const Index c = x.channels();
  if (weight.rows() != c || weight.cols() != kernel * kernel) throw ShapeError("depthwise_conv2d: weight shape");
  const Index ho = same_output(x.height, stride), wo = same_output(x.width, stride);
  const Index py = same_pad_before(x.height, kernel, stride), px = same_pad_before(x.width, kernel, stride);

  FeatureMap<Scalar> y(c, ho, wo);
  for (Index oy = 0; oy < ho; ++oy) {
    for (Index ox = 0; ox < wo; ++ox) {
      auto out = y.data.col(oy * wo + ox);
      for (int ky = 0; ky < kernel; ++ky) {
        const Index iy = oy * stride + ky - py;
        if (iy < 0 || iy >= x.height) continue;
        for (int kx = 0; kx < kernel; ++kx) {
          const Index ix = ox * stride + kx - px;
          if (ix < 0 || ix >= x.width) continue;
          out += weight.col(ky * kernel + kx).cwiseProduct(x.data.col(iy * x.width + ix));
        }
      }
    }
  }
  count_macs(static_cast<Count>(ho * wo) * c * kernel * kernel);
  if (bias.size() > 0) y.data.colwise() += bias.col(0);
  return y;
}

/// 1x1 convolution: `weight` is out x in.
template <typename Scalar>
FeatureMap<Scalar> pointwise_conv(const FeatureMap<Scalar>& x, const Matrix<Scalar>& weight,
                                  const Matrix<Scalar>& bias) {
  if (weight.cols() != x.channels()) throw ShapeError("pointwise_conv: weight columns != channels");
  count_macs(static_cast<Count>(x.pixels()) * weight.rows() * weight.cols());
  FeatureMap<Scalar> y(x.height, x.width, weight * x.data);
  if (bias.size() > 0) y.data.colwise() += bias.col(0);
  return y;
}

/// Affine map on row vectors: rows of `x` are samples, `weight` is out x in.
template <typename Scalar>
Matrix<Scalar> linear(const Matrix<Scalar>& x, const Matrix<Scalar>& weight, const Matrix<Scalar>& bias) {
  if (x.cols() != weight.cols()) throw ShapeError("linear: input width != weight columns");
  count_macs(static_cast<Count>(x.rows()) * weight.rows() * weight.cols());
  Matrix<Scalar> y = x * weight.transpose();
  if (bias.size() > 0) y.rowwise() += bias.col(0).transpose();
  return y;
}

/// 2x2 max pooling with stride 2 and SAME padding (odd edges see one cell).
template <typename Scalar>
FeatureMap<Scalar> max_pool2x2(const FeatureMap<Scalar>& x) {
  const Index ho = same_output(x.height, 2), wo = same_output(x.width, 2);
  FeatureMap<Scalar> y(x.channels(), ho, wo);
  for (Index c = 0; c < x.channels(); ++c) {
    for (Index oy = 0; oy < ho; ++oy) {
      for (Index ox = 0; ox < wo; ++ox) {
        const Scalar* best = nullptr;
        for (Index iy = 2 * oy; iy < std::min(2 * oy + 2, x.height); ++iy) {
          for (Index ix = 2 * ox; ix < std::min(2 * ox + 2, x.width); ++ix) {
            const Scalar& v = x.data(c, iy * x.width + ix);
            if (best == nullptr || value_of(v) > value_of(*best)) best = &v;
          }
        }
        y.data(c, oy * wo + ox) = *best;
      }
    }
  }
  return y;
}

/// Nearest-neighbour upsampling to an explicit target size.
template <typename Scalar>
FeatureMap<Scalar> upsample_nearest(const FeatureMap<Scalar>& x, Index height, Index width) {
  FeatureMap<Scalar> y(x.channels(), height, width);
  for (Index oy = 0; oy < height; ++oy) {
    const Index iy = std::min(oy * x.height / height, x.height - 1);
    for (Index ox = 0; ox < width; ++ox) {
      const Index ix = std::min(ox * x.width / width, x.width - 1);
      y.data.col(oy * width + ox) = x.data.col(iy * x.width + ix);
    }
  }
  return y;
}

/// Squeeze-and-excitation gate: global average pool, reduce, swish, expand, sigmoid.
template <typename Scalar>
FeatureMap<Scalar> squeeze_excite(const FeatureMap<Scalar>& x, const Matrix<Scalar>& reduce_w,
                                  const Matrix<Scalar>& reduce_b, const Matrix<Scalar>& expand_w,
                                  const Matrix<Scalar>& expand_b) {
  Matrix<Scalar> pooled = x.data.rowwise().sum() / Scalar(static_cast<double>(x.pixels()));
  FeatureMap<Scalar> p(1, 1, pooled);
  FeatureMap<Scalar> s = pointwise_conv(p, reduce_w, reduce_b);
  s = swish(s);
  FeatureMap<Scalar> g = pointwise_conv(s, expand_w, expand_b);
  const Matrix<Scalar> gate = sigmoid(g.data);
  FeatureMap<Scalar> y(x.height, x.width, gate.col(0).asDiagonal() * x.data);
  return y;
}

}  // namespace cvl::detector
