// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/types.hpp"
#include "compactvl/detector/boxes.hpp"

#include <cmath>

namespace cvl::detector {

struct RoiAlignOptions {
  int output_size = 4;
  int sampling_ratio = 2;  // sample points per bin along each axis
  bool aligned = true;     // shift by half a cell so pixel centres sit at integer + 0.5
};

/// Bilinear sample at continuous cell coordinates (y, x). Points more than a
/// cell outside the map are zero; points near the border are clamped.
template <typename Scalar>
void accumulate_bilinear(const FeatureMap<Scalar>& map, double y, double x, double weight,
                         Eigen::Ref<Vector<Scalar>> out) {
  const double h = static_cast<double>(map.height), w = static_cast<double>(map.width);
  if (y < -1.0 || y > h || x < -1.0 || x > w) return;
  y = std::max(y, 0.0);
  x = std::max(x, 0.0);
  Index y0 = static_cast<Index>(std::floor(y)), x0 = static_cast<Index>(std::floor(x));
  Index y1 = y0 + 1, x1 = x0 + 1;
  if (y0 >= map.height - 1) {
    y0 = y1 = map.height - 1;
    y = static_cast<double>(y0);
  }
  if (x0 >= map.width - 1) {
    x0 = x1 = map.width - 1;
    x = static_cast<double>(x0);
  }
  const double ly = y - static_cast<double>(y0), lx = x - static_cast<double>(x0);
  const double hy = 1.0 - ly, hx = 1.0 - lx;
  const auto col = [&](Index yy, Index xx) { return map.data.col(yy * map.width + xx); };
  out += col(y0, x0) * Scalar(weight * hy * hx) + col(y0, x1) * Scalar(weight * hy * lx) +
         col(y1, x0) * Scalar(weight * ly * hx) + col(y1, x1) * Scalar(weight * ly * lx);
}

/// Pools `box` (image pixels) from a map of the given stride into a
/// C x (S * S) matrix, bin index by * S + bx. Box coordinates are never rounded.
template <typename Scalar>
Matrix<Scalar> roi_align(const FeatureMap<Scalar>& map, const Box& box, int stride, const RoiAlignOptions& opt = {}) {
  if (!box.non_degenerate()) throw std::invalid_argument("roi_align: degenerate box");
  if (opt.output_size < 1 || opt.sampling_ratio < 1) throw std::invalid_argument("roi_align: bad options");
  const double scale = 1.0 / stride;
  const double offset = opt.aligned ? 0.5 : 0.0;
  const double x0 = box.x1 * scale - offset, y0 = box.y1 * scale - offset;
  const double bin_w = box.width() * scale / opt.output_size, bin_h = box.height() * scale / opt.output_size;
  const int g = opt.sampling_ratio;
  const double w = 1.0 / (g * g);

  Matrix<Scalar> out = Matrix<Scalar>::Zero(map.channels(), opt.output_size * opt.output_size);
  for (int by = 0; by < opt.output_size; ++by) {
    for (int bx = 0; bx < opt.output_size; ++bx) {
      Vector<Scalar> acc = Vector<Scalar>::Zero(map.channels());
      for (int iy = 0; iy < g; ++iy) {
        const double y = y0 + by * bin_h + (iy + 0.5) * bin_h / g;
        for (int ix = 0; ix < g; ++ix) {
          const double x = x0 + bx * bin_w + (ix + 0.5) * bin_w / g;
          accumulate_bilinear<Scalar>(map, y, x, w, acc);
        }
      }
      out.col(by * opt.output_size + bx) = acc;
    }
  }
  return out;
}

}  // namespace cvl::detector
