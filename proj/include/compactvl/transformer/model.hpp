// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/random.hpp"
#include "compactvl/core/types.hpp"
#include "compactvl/transformer/config.hpp"
#include "compactvl/transformer/input.hpp"

#include <string>
#include <vector>

namespace cvl::transformer {

// Linear weights are out x in, biases and norm vectors out x 1, embedding
// tables one row per entry. Hidden states are one row per position.

template <typename Scalar>
struct EncoderLayerWeights {
  Matrix<Scalar> query_w, query_b, key_w, key_b, value_w, value_b, output_w, output_b;
  Matrix<Scalar> attention_gamma, attention_beta;
  Matrix<Scalar> ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;
  Matrix<Scalar> ffn_gamma, ffn_beta;

  template <typename F>
  void visit(const std::string& p, F&& f) {
    f(p + ".attention.query.weight", query_w);
    f(p + ".attention.query.bias", query_b);
    f(p + ".attention.key.weight", key_w);
    f(p + ".attention.key.bias", key_b);
    f(p + ".attention.value.weight", value_w);
    f(p + ".attention.value.bias", value_b);
    f(p + ".attention.output.weight", output_w);
    f(p + ".attention.output.bias", output_b);
    f(p + ".attention_norm.gamma", attention_gamma);
    f(p + ".attention_norm.beta", attention_beta);
    f(p + ".ffn.in.weight", ffn_in_w);
    f(p + ".ffn.in.bias", ffn_in_b);
    f(p + ".ffn.out.weight", ffn_out_w);
    f(p + ".ffn.out.bias", ffn_out_b);
    f(p + ".ffn_norm.gamma", ffn_gamma);
    f(p + ".ffn_norm.beta", ffn_beta);
  }
};

/// Post-norm encoder with text and region embeddings, a pooler with a 2-way
/// matching head, and an untied masked-token decoder.
template <typename Scalar>
struct TransformerWeights {
  TransformerConfig config;
  Matrix<Scalar> word, position, segment;
  Matrix<Scalar> region_w, region_b;
  Matrix<Scalar> embedding_gamma, embedding_beta;
  std::vector<EncoderLayerWeights<Scalar>> layers;
  Matrix<Scalar> pooler_w, pooler_b, itm_w, itm_b;
  Matrix<Scalar> transform_w, transform_b, transform_gamma, transform_beta;
  Matrix<Scalar> vocab_w, vocab_b;

  /// Correct shapes with zero weights and identity layer norms.
  static TransformerWeights allocate(const TransformerConfig& config);
  /// Correct shapes, every entry zero (a gradient accumulator).
  static TransformerWeights zeros(const TransformerConfig& config);

  template <typename F>
  void visit(F&& f) {
    f("embedding.word.weight", word);
    f("embedding.position.weight", position);
    f("embedding.segment.weight", segment);
    f("embedding.region_projection.weight", region_w);
    f("embedding.region_projection.bias", region_b);
    f("embedding.norm.gamma", embedding_gamma);
    f("embedding.norm.beta", embedding_beta);
    for (size_t l = 0; l < layers.size(); ++l) layers[l].visit("encoder.layers." + std::to_string(l), f);
    f("pooler.dense.weight", pooler_w);
    f("pooler.dense.bias", pooler_b);
    f("pooler.itm.weight", itm_w);
    f("pooler.itm.bias", itm_b);
    f("decoder.transform.weight", transform_w);
    f("decoder.transform.bias", transform_b);
    f("decoder.transform_norm.gamma", transform_gamma);
    f("decoder.transform_norm.beta", transform_beta);
    f("decoder.vocab.weight", vocab_w);
    f("decoder.vocab.bias", vocab_b);
  }

  Count parameter_count() const;
};

/// Truncated normal (config.init_std) weights and embeddings, zero biases,
/// identity layer norms.
template <typename Scalar>
TransformerWeights<Scalar> init_transformer_weights(const TransformerConfig& config, Rng& rng);

struct ForwardOptions {
  bool mlm_logits = false;  // vocabulary logits at every text position
  bool train = false;       // enables dropout; needs `rng`
  Rng* rng = nullptr;
};

template <typename Scalar>
struct TransformerOutput {
  Matrix<Scalar> hidden;      // L x d
  Matrix<Scalar> pooled;      // 1 x d, tanh(dense([CLS]))
  Matrix<Scalar> itm_logits;  // 1 x 2, column 1 is "match"
  Matrix<Scalar> mlm_logits;  // text_length x V when requested
};

/// Activations kept for the backward pass.
template <typename Scalar>
struct LayerCache {
  Matrix<Scalar> input, q, k, v;
  std::vector<Matrix<Scalar>> probs;    // per head, L x L, before dropout
  std::vector<Matrix<Scalar>> dropped;  // per head, after dropout
  Matrix<Scalar> prob_mask;             // per head stacked L x (heads * L); empty without dropout
  Matrix<Scalar> context, attn_mask;
  Matrix<Scalar> x1_hat, x1_rstd, x1;
  Matrix<Scalar> ffn_pre, ffn_act, ffn_mask;
  Matrix<Scalar> x2_hat, x2_rstd;
};

template <typename Scalar>
struct ForwardCache {
  Matrix<Scalar> emb_hat, emb_rstd, emb_mask;
  std::vector<LayerCache<Scalar>> layers;
  Matrix<Scalar> hidden, pooled;
  Matrix<Scalar> dec_pre, dec_act, dec_hat, dec_rstd, dec_out;
  bool has_mlm = false;
};

template <typename Scalar>
TransformerOutput<Scalar> forward(const TransformerWeights<Scalar>& weights, const FusionInput& input,
                                  const ForwardOptions& options = {}, ForwardCache<Scalar>* cache = nullptr);

/// Gradients of a scalar loss with respect to the forward outputs. Empty
/// matrices contribute nothing.
template <typename Scalar>
struct OutputGrads {
  Matrix<Scalar> hidden;
  Matrix<Scalar> pooled;
  Matrix<Scalar> itm_logits;
  Matrix<Scalar> mlm_logits;
};

/// Accumulates parameter gradients into `grads` (shaped like `weights`).
template <typename Scalar>
void backward(const TransformerWeights<Scalar>& weights, const FusionInput& input, const ForwardCache<Scalar>& cache,
              const OutputGrads<Scalar>& upstream, TransformerWeights<Scalar>& grads);

}  // namespace cvl::transformer
