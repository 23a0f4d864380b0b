// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/pretrain/trainer.hpp"

#include "compactvl/pretrain/itm.hpp"
#include "compactvl/pretrain/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cvl::pretrain {

using transformer::TransformerWeights;

std::vector<PretrainExample> resolve_examples(const std::vector<PretrainRecord>& records,
                                              const std::map<std::string, detector::RegionSet>& regions,
                                              IngestReport* report) {
  std::vector<PretrainExample> out;
  for (const auto& r : records) {
    const auto it = regions.find(r.features.key);
    if (it == regions.end()) {
      if (report) {
        report->skipped.push_back(r.image_id);
        report->log.push_back("skipped " + r.id + ": no regions for '" + r.features.key + "'");
      }
      continue;
    }
    out.push_back({r, it->second});
  }
  return out;
}

template <typename Scalar>
Pretrainer<Scalar>::Pretrainer(TransformerWeights<Scalar> weights, const transformer::Tokenizer& tokenizer,
                               PretrainOptions options, std::uint64_t seed)
    : weights_(std::move(weights)),
      tokenizer_(tokenizer),
      options_(options),
      optimizer_(options.optimizer),
      rng_(seed) {
  if (tokenizer_.vocabulary().size() != weights_.config.vocab_size)
    throw ConfigError("tokenizer vocabulary size " + std::to_string(tokenizer_.vocabulary().size()) +
                      " != model vocabulary size " + std::to_string(weights_.config.vocab_size));
  if (options_.mlm_weight < 0 || options_.itm_weight < 0) throw ConfigError("loss weights must be non-negative");
  if (options_.batch_size < 1) throw ConfigError("batch size must be positive");
}

template <typename Scalar>
typename Pretrainer<Scalar>::BatchGradients Pretrainer<Scalar>::gradients(std::span<const PretrainExample> batch,
                                                                          Rng& rng, bool train) const {
  if (batch.empty()) throw std::invalid_argument("empty pre-training batch");
  const auto& vocab = tokenizer_.vocabulary();
  const bool use_itm = options_.itm_weight > 0;
  const bool use_mlm = options_.mlm_weight > 0;

  std::vector<PretrainRecord> records;
  for (const auto& e : batch) records.push_back(e.record);
  std::vector<ItmPair> pairs;
  if (use_itm) {
    pairs = itm_corrupt(records, options_.corruption, rng);
  } else {
    for (Index i = 0; i < static_cast<Index>(batch.size()); ++i) pairs.push_back({i, i, 1});
  }

  struct Pass {
    transformer::FusionInput input;
    MaskedBatch masked;
    transformer::TransformerOutput<Scalar> out;
    transformer::ForwardCache<Scalar> cache;
  };
  std::vector<Pass> passes(pairs.size());
  StepMetrics metrics;
  metrics.examples = static_cast<Index>(pairs.size());
  double mlm_sum = 0.0;
  std::vector<LossResult<Scalar>> mlm_parts(pairs.size()), itm_parts(pairs.size());
  double itm_sum = 0.0;
  for (size_t k = 0; k < pairs.size(); ++k) {
    const auto& image = batch[pairs[k].image];
    const auto& text = batch[pairs[k].caption];
    std::vector<int> tags;
    for (const auto& t : image.record.tags) {
      const auto ids = tokenizer_.encode(t.text);
      tags.insert(tags.end(), ids.begin(), ids.end());
    }
    const auto sentence = tokenizer_.encode(text.record.caption);
    auto& p = passes[k];
    p.input = transformer::assemble_input(image.regions, tags, sentence, transformer::Task::kPretrainMlm, vocab,
                                          weights_.config, options_.max_length);
    p.masked = mask_input(p.input, vocab, options_.masking, rng);
    p.input.text_ids = p.masked.input_ids;
    const transformer::ForwardOptions fo{use_mlm, train && options_.dropout, &rng};
    p.out = transformer::forward(weights_, p.input, fo, &p.cache);
    if (use_mlm) {
      mlm_parts[k] = cross_entropy_sum<Scalar>(p.out.mlm_logits, p.masked.labels);
      mlm_sum += mlm_parts[k].value;
      metrics.masked += mlm_parts[k].count;
    }
    if (use_itm) {
      const int label = pairs[k].label;
      itm_parts[k] = itm_loss<Scalar>(p.out.itm_logits, std::span<const int>(&label, 1));
      itm_sum += itm_parts[k].value;
      metrics.negatives += label == 0;
    }
  }
  metrics.no_masked = use_mlm && metrics.masked == 0;
  metrics.mlm = metrics.masked > 0 ? mlm_sum / static_cast<double>(metrics.masked) : 0.0;
  metrics.itm = use_itm ? itm_sum / static_cast<double>(pairs.size()) : 0.0;
  metrics.loss = options_.mlm_weight * metrics.mlm + options_.itm_weight * metrics.itm;
  if (!std::isfinite(metrics.loss)) throw NumericalError("pre-training loss is not finite");

  BatchGradients result{TransformerWeights<Scalar>::zeros(weights_.config), metrics};
  for (size_t k = 0; k < passes.size(); ++k) {
    transformer::OutputGrads<Scalar> up;
    bool any = false;
    if (use_mlm && metrics.masked > 0 && mlm_parts[k].count > 0) {
      up.mlm_logits = mlm_parts[k].grad * static_cast<Scalar>(options_.mlm_weight / metrics.masked);
      any = true;
    }
    if (use_itm) {
      up.itm_logits = itm_parts[k].grad * static_cast<Scalar>(options_.itm_weight / static_cast<double>(passes.size()));
      any = true;
    }
    if (any) transformer::backward(weights_, passes[k].input, passes[k].cache, up, result.grads);
  }
  double sq = 0.0;
  result.grads.visit([&](const std::string&, Matrix<Scalar>& g) { sq += static_cast<double>(g.squaredNorm()); });
  result.metrics.grad_norm = std::sqrt(sq);
  if (!std::isfinite(sq)) throw NumericalError("pre-training gradient is not finite");
  return result;
}

template <typename Scalar>
StepMetrics Pretrainer<Scalar>::step(std::span<const PretrainExample> batch) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto g = gradients(batch, rng_, true);
  g.metrics.lr = optimizer_.current_lr();
  g.metrics.step = optimizer_.steps();
  optimizer_.step(weights_, g.grads);
  return g.metrics;
}

template <typename Scalar>
StepMetrics Pretrainer<Scalar>::evaluate(std::span<const PretrainExample> batch, std::uint64_t seed) const {
  Rng rng(seed);
  return gradients(batch, rng, false).metrics;
}

template <typename Scalar>
std::vector<StepMetrics> Pretrainer<Scalar>::train(std::span<const PretrainExample> corpus, Index steps,
                                                   const std::function<void(const StepMetrics&)>& on_step) {
  if (corpus.empty()) throw std::invalid_argument("empty pre-training corpus");
  const size_t batch = std::min<size_t>(static_cast<size_t>(options_.batch_size), corpus.size());
  std::vector<StepMetrics> history;
  std::vector<PretrainExample> chunk;
  for (Index s = 0; s < steps; ++s) {
    // A batch never straddles two shuffles, so no example appears twice in it.
    if (order_.size() != corpus.size() || cursor_ + batch > order_.size()) {
      order_.resize(corpus.size());
      std::iota(order_.begin(), order_.end(), Index{0});
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    chunk.clear();
    for (size_t i = 0; i < batch; ++i) chunk.push_back(corpus[order_[cursor_++]]);
    history.push_back(step(chunk));
    if (on_step) on_step(history.back());
  }
  return history;
}

template class Pretrainer<float>;
template class Pretrainer<double>;

}  // namespace cvl::pretrain
