// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/transformer/model.hpp"

#include "compactvl/core/mac_counter.hpp"

#include <cmath>
#include <limits>

namespace cvl::transformer {
namespace {

template <typename S>
using M = Matrix<S>;

template <typename S>
M<S> affine(const M<S>& x, const M<S>& w, const M<S>& b) {
  count_macs(static_cast<Count>(x.rows()) * w.rows() * w.cols());
  M<S> y = x * w.transpose();
  y.rowwise() += b.col(0).transpose();
  return y;
}

// Row-wise layer norm; keeps normalized values and reciprocal std for backward.
template <typename S>
M<S> layer_norm(const M<S>& x, const M<S>& gamma, const M<S>& beta, double eps, M<S>& hat, M<S>& rstd) {
  const Index d = x.cols();
  hat.resize(x.rows(), d);
  rstd.resize(x.rows(), 1);
  for (Index i = 0; i < x.rows(); ++i) {
    const S mean = x.row(i).mean();
    const auto centred = (x.row(i).array() - mean).matrix();
    const S var = centred.squaredNorm() / static_cast<S>(d);
    rstd(i, 0) = S(1) / std::sqrt(var + static_cast<S>(eps));
    hat.row(i) = centred * rstd(i, 0);
  }
  M<S> y = hat * gamma.col(0).asDiagonal();
  y.rowwise() += beta.col(0).transpose();
  return y;
}

template <typename S>
M<S> layer_norm_backward(const M<S>& dy, const M<S>& hat, const M<S>& rstd, const M<S>& gamma, M<S>& dgamma,
                         M<S>& dbeta) {
  dgamma.col(0) += (dy.cwiseProduct(hat)).colwise().sum().transpose();
  dbeta.col(0) += dy.colwise().sum().transpose();
  const M<S> dhat = dy * gamma.col(0).asDiagonal();
  const S d = static_cast<S>(dy.cols());
  M<S> dx(dy.rows(), dy.cols());
  for (Index i = 0; i < dy.rows(); ++i) {
    const S mean_dhat = dhat.row(i).sum() / d;
    const S mean_dhat_hat = dhat.row(i).dot(hat.row(i)) / d;
    dx.row(i) = ((dhat.row(i).array() - mean_dhat - hat.row(i).array() * mean_dhat_hat) * rstd(i, 0)).matrix();
  }
  return dx;
}

template <typename S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x / std::sqrt(S(2))));
}

template <typename S>
S gelu_grad(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x / std::sqrt(S(2))));
  const S pdf = std::exp(S(-0.5) * x * x) / std::sqrt(S(2) * S(M_PI));
  return cdf + x * pdf;
}

// Inverted dropout mask: entries 0 or 1 / (1 - p).
template <typename S>
M<S> dropout_mask(Index rows, Index cols, double p, Rng& rng) {
  std::bernoulli_distribution keep(1.0 - p);
  M<S> m(rows, cols);
  const S scale = static_cast<S>(1.0 / (1.0 - p));
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = keep(rng) ? scale : S(0);
  return m;
}

template <typename S>
void apply_mask(M<S>& x, const M<S>& mask) {
  if (mask.size() > 0) x = x.cwiseProduct(mask);
}

template <typename S>
void add_bias_grad(M<S>& db, const M<S>& dy) {
  db.col(0) += dy.colwise().sum().transpose();
}

}  // namespace

template <typename S>
TransformerWeights<S> TransformerWeights<S>::allocate(const TransformerConfig& c) {
  c.validate();
  const auto Z = [](Index r, Index k) { return M<S>::Zero(r, k); };
  const auto ones = [](Index r) { return M<S>::Ones(r, 1); };
  const Index d = c.hidden, I = c.intermediate, V = c.vocab_size;
  TransformerWeights w;
  w.config = c;
  w.word = Z(V, d);
  w.position = Z(c.max_positions, d);
  w.segment = Z(c.segments, d);
  w.region_w = Z(d, c.region_input_dim());
  w.region_b = Z(d, 1);
  w.embedding_gamma = ones(d);
  w.embedding_beta = Z(d, 1);
  for (int l = 0; l < c.layers; ++l) {
    EncoderLayerWeights<S> e;
    e.query_w = e.key_w = e.value_w = e.output_w = Z(d, d);
    e.query_b = e.key_b = e.value_b = e.output_b = Z(d, 1);
    e.attention_gamma = ones(d);
    e.attention_beta = Z(d, 1);
    e.ffn_in_w = Z(I, d);
    e.ffn_in_b = Z(I, 1);
    e.ffn_out_w = Z(d, I);
    e.ffn_out_b = Z(d, 1);
    e.ffn_gamma = ones(d);
    e.ffn_beta = Z(d, 1);
    w.layers.push_back(std::move(e));
  }
  w.pooler_w = Z(d, d);
  w.pooler_b = Z(d, 1);
  w.itm_w = Z(2, d);
  w.itm_b = Z(2, 1);
  w.transform_w = Z(d, d);
  w.transform_b = Z(d, 1);
  w.transform_gamma = ones(d);
  w.transform_beta = Z(d, 1);
  w.vocab_w = Z(V, d);
  w.vocab_b = Z(V, 1);
  return w;
}

template <typename S>
TransformerWeights<S> TransformerWeights<S>::zeros(const TransformerConfig& c) {
  auto w = allocate(c);
  w.visit([](const std::string&, M<S>& m) { m.setZero(); });
  return w;
}

template <typename S>
Count TransformerWeights<S>::parameter_count() const {
  Count n = 0;
  const_cast<TransformerWeights*>(this)->visit([&](const std::string&, M<S>& m) { n += m.size(); });
  return n;
}

template <typename S>
TransformerWeights<S> init_transformer_weights(const TransformerConfig& config, Rng& rng) {
  auto w = TransformerWeights<S>::allocate(config);
  w.visit([&](const std::string& name, M<S>& m) {
    if (name.ends_with(".weight")) fill_truncated_normal(m, config.init_std, rng);
  });
  return w;
}

template <typename S>
TransformerOutput<S> forward(const TransformerWeights<S>& w, const FusionInput& in, const ForwardOptions& opt,
                             ForwardCache<S>* cache) {
  const auto& c = w.config;
  in.validate(c);
  if (opt.train && opt.rng == nullptr) throw std::invalid_argument("forward: training mode needs an rng");
  const bool drop = opt.train && c.dropout > 0;
  const Index L = in.length(), T = in.layout.text_length(), K = in.layout.regions, d = c.hidden;
  const Index H = c.heads, hd = c.head_dim();
  const S scale = S(1) / std::sqrt(static_cast<S>(hd));
  const S neg_inf = -std::numeric_limits<S>::infinity();

  ForwardCache<S> local;
  ForwardCache<S>& cc = cache ? *cache : local;
  cc = {};

  M<S> e(L, d);
  for (Index t = 0; t < T; ++t)
    e.row(t) = w.word.row(in.text_ids[t]) + w.position.row(t) + w.segment.row(in.segment_ids[t]);
  if (K > 0) {
    e.bottomRows(K) = affine<S>(in.region_inputs.cast<S>(), w.region_w, w.region_b);
    for (Index r = 0; r < K; ++r) e.row(T + r) += w.segment.row(in.segment_ids[T + r]);
  }
  M<S> x = layer_norm(e, w.embedding_gamma, w.embedding_beta, c.layer_norm_eps, cc.emb_hat, cc.emb_rstd);
  if (drop) cc.emb_mask = dropout_mask<S>(L, d, c.dropout, *opt.rng);
  apply_mask(x, cc.emb_mask);

  for (const auto& lw : w.layers) {
    LayerCache<S> lc;
    lc.input = x;
    lc.q = affine(x, lw.query_w, lw.query_b);
    lc.k = affine(x, lw.key_w, lw.key_b);
    lc.v = affine(x, lw.value_w, lw.value_b);
    lc.context.resize(L, d);
    if (drop) lc.prob_mask = dropout_mask<S>(L, H * L, c.dropout, *opt.rng);
    for (Index h = 0; h < H; ++h) {
      M<S> scores = lc.q.middleCols(h * hd, hd) * lc.k.middleCols(h * hd, hd).transpose() * scale;
      for (Index i = 0; i < L; ++i) {
        for (Index j = 0; j < L; ++j)
          if (!in.mask(i, j)) scores(i, j) = neg_inf;
        const S mx = scores.row(i).maxCoeff();
        scores.row(i) = (scores.row(i).array() - mx).exp().matrix();
        scores.row(i) /= scores.row(i).sum();
      }
      M<S> p = scores;
      if (drop) p = p.cwiseProduct(lc.prob_mask.middleCols(h * L, L));
      lc.context.middleCols(h * hd, hd) = p * lc.v.middleCols(h * hd, hd);
      lc.probs.push_back(std::move(scores));
      lc.dropped.push_back(std::move(p));
    }
    count_macs(2 * static_cast<Count>(L) * L * d);
    M<S> a = affine(lc.context, lw.output_w, lw.output_b);
    if (drop) lc.attn_mask = dropout_mask<S>(L, d, c.dropout, *opt.rng);
    apply_mask(a, lc.attn_mask);
    lc.x1 = layer_norm<S>(x + a, lw.attention_gamma, lw.attention_beta, c.layer_norm_eps, lc.x1_hat, lc.x1_rstd);

    lc.ffn_pre = affine(lc.x1, lw.ffn_in_w, lw.ffn_in_b);
    lc.ffn_act = lc.ffn_pre.unaryExpr([](S v) { return gelu(v); });
    M<S> f = affine(lc.ffn_act, lw.ffn_out_w, lw.ffn_out_b);
    if (drop) lc.ffn_mask = dropout_mask<S>(L, d, c.dropout, *opt.rng);
    apply_mask(f, lc.ffn_mask);
    x = layer_norm<S>(lc.x1 + f, lw.ffn_gamma, lw.ffn_beta, c.layer_norm_eps, lc.x2_hat, lc.x2_rstd);
    cc.layers.push_back(std::move(lc));
  }

  TransformerOutput<S> out;
  out.hidden = x;
  cc.hidden = x;
  out.pooled = affine<S>(x.topRows(1), w.pooler_w, w.pooler_b).array().tanh().matrix();
  cc.pooled = out.pooled;
  out.itm_logits = affine(out.pooled, w.itm_w, w.itm_b);
  if (opt.mlm_logits) {
    cc.has_mlm = true;
    cc.dec_pre = affine<S>(x.topRows(T), w.transform_w, w.transform_b);
    cc.dec_act = cc.dec_pre.unaryExpr([](S v) { return gelu(v); });
    cc.dec_out = layer_norm(cc.dec_act, w.transform_gamma, w.transform_beta, c.layer_norm_eps, cc.dec_hat, cc.dec_rstd);
    out.mlm_logits = affine(cc.dec_out, w.vocab_w, w.vocab_b);
  }
  if (!out.hidden.allFinite()) throw NumericalError("forward: non-finite hidden state");
  return out;
}

template <typename S>
void backward(const TransformerWeights<S>& w, const FusionInput& in, const ForwardCache<S>& cc,
              const OutputGrads<S>& up, TransformerWeights<S>& g) {
  const auto& c = w.config;
  const Index L = in.length(), T = in.layout.text_length(), K = in.layout.regions, d = c.hidden;
  const Index H = c.heads, hd = c.head_dim();
  const S scale = S(1) / std::sqrt(static_cast<S>(hd));
  if (cc.layers.size() != w.layers.size()) throw std::invalid_argument("backward: cache does not match the model");

  M<S> dx = up.hidden.size() > 0 ? up.hidden : M<S>::Zero(L, d);
  const M<S>& hidden = cc.hidden;

  if (up.mlm_logits.size() > 0) {
    if (!cc.has_mlm) throw std::invalid_argument("backward: forward ran without mlm logits");
    g.vocab_w += up.mlm_logits.transpose() * cc.dec_out;
    add_bias_grad(g.vocab_b, up.mlm_logits);
    const M<S> dout = up.mlm_logits * w.vocab_w;
    const M<S> dact = layer_norm_backward(dout, cc.dec_hat, cc.dec_rstd, w.transform_gamma, g.transform_gamma,
                                          g.transform_beta);
    const M<S> dpre = dact.cwiseProduct(cc.dec_pre.unaryExpr([](S v) { return gelu_grad(v); }));
    g.transform_w += dpre.transpose() * hidden.topRows(T);
    add_bias_grad(g.transform_b, dpre);
    dx.topRows(T) += dpre * w.transform_w;
  }

  M<S> dpooled = up.pooled.size() > 0 ? up.pooled : M<S>::Zero(1, d);
  if (up.itm_logits.size() > 0) {
    g.itm_w += up.itm_logits.transpose() * cc.pooled;
    add_bias_grad(g.itm_b, up.itm_logits);
    dpooled += up.itm_logits * w.itm_w;
  }
  {
    const M<S> dpre = dpooled.cwiseProduct((S(1) - cc.pooled.array().square()).matrix());
    g.pooler_w += dpre.transpose() * hidden.topRows(1);
    add_bias_grad(g.pooler_b, dpre);
    dx.topRows(1) += dpre * w.pooler_w;
  }

  for (Index l = static_cast<Index>(w.layers.size()) - 1; l >= 0; --l) {
    const auto& lw = w.layers[l];
    const auto& lc = cc.layers[l];
    auto& lg = g.layers[l];

    const M<S> du2 = layer_norm_backward(dx, lc.x2_hat, lc.x2_rstd, lw.ffn_gamma, lg.ffn_gamma, lg.ffn_beta);
    M<S> dx1 = du2;
    M<S> df = du2;
    apply_mask(df, lc.ffn_mask);
    lg.ffn_out_w += df.transpose() * lc.ffn_act;
    add_bias_grad(lg.ffn_out_b, df);
    const M<S> dact = df * lw.ffn_out_w;
    const M<S> dpre = dact.cwiseProduct(lc.ffn_pre.unaryExpr([](S v) { return gelu_grad(v); }));
    lg.ffn_in_w += dpre.transpose() * lc.x1;
    add_bias_grad(lg.ffn_in_b, dpre);
    dx1 += dpre * lw.ffn_in_w;

    const M<S> du1 = layer_norm_backward(dx1, lc.x1_hat, lc.x1_rstd, lw.attention_gamma, lg.attention_gamma,
                                         lg.attention_beta);
    M<S> dinput = du1;
    M<S> da = du1;
    apply_mask(da, lc.attn_mask);
    lg.output_w += da.transpose() * lc.context;
    add_bias_grad(lg.output_b, da);
    const M<S> dcontext = da * lw.output_w;

    M<S> dq(L, d), dk(L, d), dv(L, d);
    for (Index h = 0; h < H; ++h) {
      const auto dc = dcontext.middleCols(h * hd, hd);
      dv.middleCols(h * hd, hd) = lc.dropped[h].transpose() * dc;
      M<S> dp = dc * lc.v.middleCols(h * hd, hd).transpose();
      if (lc.prob_mask.size() > 0) dp = dp.cwiseProduct(lc.prob_mask.middleCols(h * L, L));
      const M<S>& p = lc.probs[h];
      M<S> ds(L, L);
      for (Index i = 0; i < L; ++i) {
        const S inner = dp.row(i).dot(p.row(i));
        ds.row(i) = p.row(i).cwiseProduct((dp.row(i).array() - inner).matrix());
      }
      ds *= scale;
      dq.middleCols(h * hd, hd) = ds * lc.k.middleCols(h * hd, hd);
      dk.middleCols(h * hd, hd) = ds.transpose() * lc.q.middleCols(h * hd, hd);
    }
    lg.query_w += dq.transpose() * lc.input;
    lg.key_w += dk.transpose() * lc.input;
    lg.value_w += dv.transpose() * lc.input;
    add_bias_grad(lg.query_b, dq);
    add_bias_grad(lg.key_b, dk);
    add_bias_grad(lg.value_b, dv);
    dinput += dq * lw.query_w + dk * lw.key_w + dv * lw.value_w;
    dx = std::move(dinput);
  }

  apply_mask(dx, cc.emb_mask);
  const M<S> de = layer_norm_backward(dx, cc.emb_hat, cc.emb_rstd, w.embedding_gamma, g.embedding_gamma,
                                      g.embedding_beta);
  for (Index t = 0; t < T; ++t) {
    g.word.row(in.text_ids[t]) += de.row(t);
    g.position.row(t) += de.row(t);
    g.segment.row(in.segment_ids[t]) += de.row(t);
  }
  if (K > 0) {
    const M<S> dr = de.bottomRows(K);
    g.region_w += dr.transpose() * in.region_inputs.cast<S>();
    add_bias_grad(g.region_b, dr);
    for (Index r = 0; r < K; ++r) g.segment.row(in.segment_ids[T + r]) += dr.row(r);
  }
}

#define CVL_INSTANTIATE(S)                                                                                     \
  template struct TransformerWeights<S>;                                                                       \
  template TransformerWeights<S> init_transformer_weights<S>(const TransformerConfig&, Rng&);                \
  template TransformerOutput<S> forward<S>(const TransformerWeights<S>&, const FusionInput&, const ForwardOptions&, \
                                           ForwardCache<S>*);                                                  \
  template void backward<S>(const TransformerWeights<S>&, const FusionInput&, const ForwardCache<S>&,          \
                            const OutputGrads<S>&, TransformerWeights<S>&);

CVL_INSTANTIATE(float)
CVL_INSTANTIATE(double)

#undef CVL_INSTANTIATE

}  // namespace cvl::transformer
