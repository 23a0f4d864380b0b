// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/random.hpp"
#include "compactvl/pretrain/masking.hpp"
#include "compactvl/pretrain/optimizer.hpp"
#include "compactvl/pretrain/record.hpp"
#include "compactvl/transformer/model.hpp"
#include "compactvl/transformer/tokenizer.hpp"

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace cvl::pretrain {

/// A record with its regions resolved.
struct PretrainExample {
  PretrainRecord record;
  detector::RegionSet regions;
};

/// Pairs each record with its region set; records without one are skipped
/// and reported.
std::vector<PretrainExample> resolve_examples(const std::vector<PretrainRecord>& records,
                                              const std::map<std::string, detector::RegionSet>& regions,
                                              IngestReport* report = nullptr);

struct PretrainOptions {
  double mlm_weight = 1.0;
  double itm_weight = 1.0;
  MaskingOptions masking;
  double corruption = 0.5;
  AdamWOptions optimizer;
  Index batch_size = 16;
  bool dropout = true;
  std::optional<Index> max_length;
};

struct StepMetrics {
  Index step = 0;
  double loss = 0.0;  // weighted total
  double mlm = 0.0;
  double itm = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
  Index examples = 0;
  Index masked = 0;
  Index negatives = 0;
  bool no_masked = false;  // MLM term defined as 0 for this batch
};

/// Weighted MLM + ITM pre-training. Each example is one forward pass: the
/// (possibly corrupted) caption is masked and the same pass feeds both heads.
template <typename Scalar>
class Pretrainer {
 public:
  Pretrainer(transformer::TransformerWeights<Scalar> weights, const transformer::Tokenizer& tokenizer,
             PretrainOptions options, std::uint64_t seed);

  struct BatchGradients {
    transformer::TransformerWeights<Scalar> grads;
    StepMetrics metrics;
  };

  /// Loss and gradients for one batch. Draws masks, corruptions and (when
  /// `train`) dropout from `rng`. Throws NumericalError on a non-finite loss.
  BatchGradients gradients(std::span<const PretrainExample> batch, Rng& rng, bool train) const;

  /// One optimizer update; serialized across threads.
  StepMetrics step(std::span<const PretrainExample> batch);

  /// Loss without dropout under masks and corruptions drawn from `seed`.
  StepMetrics evaluate(std::span<const PretrainExample> batch, std::uint64_t seed) const;

  /// `steps` updates over shuffled batches of the corpus.
  std::vector<StepMetrics> train(std::span<const PretrainExample> corpus, Index steps,
                                 const std::function<void(const StepMetrics&)>& on_step = {});

  const transformer::TransformerWeights<Scalar>& weights() const { return weights_; }
  const PretrainOptions& options() const { return options_; }

 private:
  transformer::TransformerWeights<Scalar> weights_;
  const transformer::Tokenizer& tokenizer_;
  PretrainOptions options_;
  AdamW<Scalar> optimizer_;
  Rng rng_;
  std::mutex mutex_;
  std::vector<Index> order_;
  size_t cursor_ = 0;
};

}  // namespace cvl::pretrain
