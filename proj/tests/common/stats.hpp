// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace cvl::testing {

/// Central two-sided binomial interval [lo, hi] with coverage >= `level`,
/// from the exact Binomial(n, p) distribution.
inline std::pair<std::int64_t, std::int64_t> binomial_interval(std::int64_t n, double p, double level) {
  const double tail = (1.0 - level) / 2.0;
  const double lp = std::log(p), lq = std::log1p(-p);
  auto log_pmf = [&](std::int64_t k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * lp + (n - k) * lq;
  };
  std::int64_t lo = 0;
  double cdf = 0.0;
  while (lo < n && cdf + std::exp(log_pmf(lo)) <= tail) cdf += std::exp(log_pmf(lo++));
  std::int64_t hi = n;
  double upper = 0.0;
  while (hi > 0 && upper + std::exp(log_pmf(hi)) <= tail) upper += std::exp(log_pmf(hi--));
  return {lo, hi};
}

}  // namespace cvl::testing
