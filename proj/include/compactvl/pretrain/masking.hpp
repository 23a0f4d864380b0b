// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/random.hpp"
#include "compactvl/transformer/input.hpp"
#include "compactvl/transformer/tokenizer.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace cvl::pretrain {

inline constexpr int kIgnoreLabel = -100;

struct MaskingOptions {
  double rate = 0.15;
  bool mask_tags = true;
  /// Of the selected positions, 80% become [MASK], 10% a random token, 10%
  /// stay unchanged. Off by default: every selected position becomes [MASK].
  bool mixed_replacement = false;
};

/// Text ids after masking, with labels at masked positions and kIgnoreLabel elsewhere.
struct MaskedBatch {
  std::vector<int> input_ids;
  std::vector<int> labels;
  std::vector<Index> positions;

  Index masked() const { return static_cast<Index>(positions.size()); }
};

/// Selects each eligible, non-special position independently with
/// probability `options.rate`. `eligible` may be empty (every position
/// eligible) or match `ids` in length. One uniform draw is consumed per
/// candidate position, plus two per selection under mixed replacement.
MaskedBatch mask_tokens(std::span<const int> ids, const transformer::Vocabulary& vocab, const MaskingOptions& options,
                        Rng& rng, std::span<const std::uint8_t> eligible = {});

/// Sentence positions, plus tag positions when `mask_tags`, are eligible.
/// Regions are not text and are never masked.
MaskedBatch mask_input(const transformer::FusionInput& input, const transformer::Vocabulary& vocab,
                       const MaskingOptions& options, Rng& rng);

}  // namespace cvl::pretrain
