// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/pretrain/trainer.hpp"
#include "compactvl/transformer/tokenizer.hpp"

#include <cstdint>
#include <vector>

namespace cvl::pretrain {

struct SyntheticCorpus {
  std::vector<PretrainExample> examples;
  transformer::Vocabulary vocab;
};

/// Small captioned image set whose captions are predictable from the
/// regions: every region feature is a fixed per-class code plus a per-image
/// color code and noise, the caption names the color and the two leading
/// objects, and the tags are the region class names.
SyntheticCorpus synthetic_corpus(Index images, Index feature_dim, std::uint64_t seed);

}  // namespace cvl::pretrain
