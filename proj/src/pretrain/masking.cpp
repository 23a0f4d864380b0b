// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/pretrain/masking.hpp"

#include <stdexcept>

namespace cvl::pretrain {

MaskedBatch mask_tokens(std::span<const int> ids, const transformer::Vocabulary& vocab, const MaskingOptions& options,
                        Rng& rng, std::span<const std::uint8_t> eligible) {
  if (!(options.rate >= 0.0 && options.rate <= 1.0)) throw std::invalid_argument("mask rate must be in [0, 1]");
  if (!eligible.empty() && eligible.size() != ids.size())
    throw std::invalid_argument("eligibility flags must match the token count");
  std::vector<int> ordinary;
  if (options.mixed_replacement) {
    for (int i = 0; i < vocab.size(); ++i)
      if (!vocab.is_special(i)) ordinary.push_back(i);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MaskedBatch out;
  out.input_ids.assign(ids.begin(), ids.end());
  out.labels.assign(ids.size(), kIgnoreLabel);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (!eligible.empty() && !eligible[i]) continue;
    if (vocab.is_special(ids[i])) continue;
    if (!(u(rng) < options.rate)) continue;
    out.labels[i] = ids[i];
    out.positions.push_back(static_cast<Index>(i));
    int replacement = vocab.mask_id();
    if (options.mixed_replacement) {
      const double r = u(rng);
      const double pick = u(rng);
      if (r >= 0.9) {
        replacement = ids[i];
      } else if (r >= 0.8 && !ordinary.empty()) {
        replacement = ordinary[std::min(ordinary.size() - 1, static_cast<size_t>(pick * ordinary.size()))];
      }
    }
    out.input_ids[i] = replacement;
  }
  return out;
}

MaskedBatch mask_input(const transformer::FusionInput& input, const transformer::Vocabulary& vocab,
                       const MaskingOptions& options, Rng& rng) {
  const auto& l = input.layout;
  std::vector<std::uint8_t> eligible(input.text_ids.size(), 0);
  for (Index i = 1; i <= l.sentence; ++i) eligible[i] = 1;
  if (options.mask_tags)
    for (Index i = l.tags_begin(); i < l.tags_begin() + l.tags; ++i) eligible[i] = 1;
  return mask_tokens(input.text_ids, vocab, options, rng, eligible);
}

}  // namespace cvl::pretrain
