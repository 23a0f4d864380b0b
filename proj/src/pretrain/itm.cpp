// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/pretrain/itm.hpp"

#include <stdexcept>

namespace cvl::pretrain {

std::vector<ItmPair> itm_corrupt(std::span<const PretrainRecord> batch, double prob, Rng& rng) {
  if (batch.size() < 2) throw std::invalid_argument("ITM corruption needs a batch of at least two records");
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("corruption probability must be in [0, 1]");
  const auto n = static_cast<Index>(batch.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<Index> other(0, n - 2);
  std::vector<ItmPair> out;
  out.reserve(batch.size());
  for (Index i = 0; i < n; ++i) {
    if (u(rng) < prob) {
      Index j = other(rng);
      if (j >= i) ++j;
      out.push_back({i, j, 0});
    } else {
      out.push_back({i, i, 1});
    }
  }
  return out;
}

}  // namespace cvl::pretrain
