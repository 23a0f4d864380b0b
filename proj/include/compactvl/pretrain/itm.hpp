// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/random.hpp"
#include "compactvl/pretrain/record.hpp"

#include <span>
#include <vector>

namespace cvl::pretrain {

/// Image of record `image` shown with the caption of record `caption`.
/// Tags always stay with the image.
struct ItmPair {
  Index image = 0;
  Index caption = 0;
  int label = 1;  // 1 when caption == image
};

/// With probability `prob`, each record's caption is replaced by the
/// caption of another record drawn uniformly from the rest of the batch.
/// Consumes one draw per record, plus one per corruption.
std::vector<ItmPair> itm_corrupt(std::span<const PretrainRecord> batch, double prob, Rng& rng);

}  // namespace cvl::pretrain
