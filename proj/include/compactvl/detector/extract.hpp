// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/detector/image.hpp"
#include "compactvl/detector/network.hpp"
#include "compactvl/detector/region_set.hpp"

#include <optional>
#include <string>

namespace cvl::detector {

struct ExtractOptions {
  std::optional<int> max_regions;   // defaults to the config value
  std::optional<double> score_floor;
};

/// Intermediate results of one extraction, for inspection and tests.
struct ExtractTrace {
  std::vector<Box> proposals;  // after NMS, network input coordinates
  std::vector<double> proposal_scores;
  BoxHeadOutput<float> head;
};

/// Full pipeline on a normalized network-resolution tensor. Boxes in the
/// result are rescaled to an image of `image_width` x `image_height`.
RegionSet extract_regions(const FeatureMap<float>& tensor, const DetectorWeights<float>& weights,
                          const std::string& image_id, int image_width, int image_height,
                          const ExtractOptions& options = {}, ExtractTrace* trace = nullptr);

/// Resizes and normalizes `image`, then runs the pipeline.
RegionSet extract_regions(const Image& image, const DetectorWeights<float>& weights, const std::string& image_id,
                          const ExtractOptions& options = {});

/// Keeps proposals at least `min_size` on each side, takes the `pre_topk`
/// highest scores, then applies NMS down to `post_topk`. Returns indices.
std::vector<int> select_proposals(const Proposals& proposals, const DetectorConfig& config);

}  // namespace cvl::detector
