// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/heads/heads.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace cvl::heads {

using transformer::Task;
using transformer::TransformerWeights;

namespace {

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename Scalar>
transformer::TransformerOutput<Scalar> run(const TransformerWeights<Scalar>& w, const transformer::Vocabulary& vocab,
                                           const detector::RegionSet& regions, const std::vector<int>& tags,
                                           const std::vector<int>& text, Task task, bool mlm = false) {
  const auto in = transformer::assemble_input(regions, tags, text, task, vocab, w.config);
  if (in.truncation.any()) throw ShapeError("input does not fit the model's position budget");
  return transformer::forward(w, in, transformer::ForwardOptions{mlm, false, nullptr});
}

}  // namespace

std::vector<int> encode_tags(const transformer::Tokenizer& tokenizer, const std::vector<std::string>& tags) {
  std::vector<int> out;
  for (const auto& t : tags) {
    const auto ids = tokenizer.encode(t);
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

template <typename Scalar>
CaptionState caption_generate(const TransformerWeights<Scalar>& weights, const transformer::Vocabulary& vocab,
                              const detector::RegionSet& regions, const std::vector<int>& tag_ids,
                              const CaptionOptions& options) {
  if (options.beam != 1) throw ConfigError("only greedy decoding (beam 1) is implemented");
  if (options.max_length < 0) throw ConfigError("caption max length must be non-negative");
  if (weights.vocab_w.rows() == 0) throw ConfigError("caption decoding needs a vocabulary head");
  CaptionState state;
  state.max_length = options.max_length;
  std::vector<int> sentence;
  while (static_cast<Index>(state.tokens.size()) < options.max_length) {
    sentence = state.tokens;
    sentence.push_back(vocab.mask_id());
    const auto out = run(weights, vocab, regions, tag_ids, sentence, Task::kCaption, true);
    const Index pos = static_cast<Index>(sentence.size());  // [CLS] occupies position 0
    const Vector<double> row = out.mlm_logits.row(pos).transpose().template cast<double>();
    const Index next = argmax_lowest(row);
    const double m = row.maxCoeff();
    state.log_probs.push_back(row(next) - m - std::log((row.array() - m).exp().sum()));
    if (next == vocab.sep_id()) {
      state.ended = true;
      break;
    }
    state.tokens.push_back(static_cast<int>(next));
  }
  state.finished = true;
  return state;
}

template <typename Scalar>
VqaHead<Scalar> VqaHead<Scalar>::zeros(Index hidden, Index answers) {
  return {Matrix<Scalar>::Zero(answers, hidden), Matrix<Scalar>::Zero(answers, 1)};
}

template <typename Scalar>
VqaHead<Scalar> VqaHead<Scalar>::init(Index hidden, Rng& rng, double stddev, Index answers) {
  auto h = zeros(hidden, answers);
  fill_truncated_normal(h.weight, stddev, rng);
  return h;
}

template <typename Scalar>
Vector<Scalar> vqa_logits(const VqaHead<Scalar>& head, const Matrix<Scalar>& pooled) {
  if (pooled.rows() != 1 || pooled.cols() != head.weight.cols()) throw ShapeError("VQA head: pooled state shape");
  return head.weight * pooled.transpose() + head.bias;
}

template <typename Scalar>
VqaPrediction vqa_predict(const TransformerWeights<Scalar>& weights, const VqaHead<Scalar>& head,
                          const transformer::Vocabulary& vocab, const Query& query) {
  const auto out = run(weights, vocab, query.regions, query.tag_ids, query.text_ids, Task::kVqa);
  const Vector<double> logits = vqa_logits(head, out.pooled).template cast<double>();
  VqaPrediction p;
  p.scores = logits.unaryExpr([](double x) { return stable_sigmoid(x); });
  p.answer = argmax_lowest(p.scores);
  p.confidence = p.scores(p.answer);
  return p;
}

double vqa_bce_loss(const Vector<double>& logits, const Vector<double>& targets) {
  if (logits.size() != targets.size()) throw ShapeError("VQA loss: one target per answer");
  double loss = 0.0;
  for (Index i = 0; i < logits.size(); ++i) {
    const double t = targets(i), x = logits(i);
    if (t < 0 || t > 1) throw std::invalid_argument("VQA targets must lie in [0, 1]");
    // t*softplus(-x) + (1-t)*softplus(x), written without overflow.
    loss += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
  }
  return loss;
}

template <typename Scalar>
Nlvr2Head<Scalar> Nlvr2Head<Scalar>::zeros(Index hidden) {
  return {Matrix<Scalar>::Zero(1, 2 * hidden), Matrix<Scalar>::Zero(1, 1)};
}

template <typename Scalar>
Nlvr2Head<Scalar> Nlvr2Head<Scalar>::init(Index hidden, Rng& rng, double stddev) {
  auto h = zeros(hidden);
  fill_truncated_normal(h.weight, stddev, rng);
  return h;
}

template <typename Scalar>
Nlvr2Prediction nlvr2_predict(const TransformerWeights<Scalar>& weights, const Nlvr2Head<Scalar>& head,
                              const transformer::Vocabulary& vocab, const detector::RegionSet& left,
                              const detector::RegionSet& right, const std::vector<int>& left_tags,
                              const std::vector<int>& right_tags, const std::vector<int>& description) {
  left.validate();
  right.validate();
  const Index d = weights.config.hidden;
  if (head.weight.rows() != 1 || head.weight.cols() != 2 * d) throw ShapeError("NLVR2 head must be 1 x 2d");
  const auto a = run(weights, vocab, left, left_tags, description, Task::kNlvr2);
  const auto b = run(weights, vocab, right, right_tags, description, Task::kNlvr2);
  Matrix<Scalar> joint(1, 2 * d);
  joint << a.pooled, b.pooled;
  const double logit = static_cast<double>((head.weight * joint.transpose())(0, 0) + head.bias(0, 0));
  Nlvr2Prediction p;
  p.confidence = stable_sigmoid(logit);
  p.label = p.confidence > 0.5;
  return p;
}

template <typename Scalar>
double retrieval_score(const TransformerWeights<Scalar>& weights, const transformer::Vocabulary& vocab,
                       const Query& query) {
  const auto out = run(weights, vocab, query.regions, query.tag_ids, query.text_ids, Task::kRetrieval);
  return stable_sigmoid(static_cast<double>(out.itm_logits(0, 1) - out.itm_logits(0, 0)));
}

template <typename Scalar>
MatrixXd retrieval_matrix(const TransformerWeights<Scalar>& weights, const transformer::Vocabulary& vocab,
                          std::span<const detector::RegionSet> images, const std::vector<std::vector<int>>& image_tags,
                          const std::vector<std::vector<int>>& texts) {
  if (image_tags.size() != images.size()) throw std::invalid_argument("one tag list per image required");
  MatrixXd s(static_cast<Index>(images.size()), static_cast<Index>(texts.size()));
  for (Index i = 0; i < s.rows(); ++i)
    for (Index j = 0; j < s.cols(); ++j) s(i, j) = retrieval_score(weights, vocab, {images[i], image_tags[i], texts[j]});
  return s;
}

std::vector<Index> rank_candidates(const Vector<double>& scores) {
  std::vector<Index> order(static_cast<size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });
  return order;
}

std::vector<RetrievalResult> retrieve(const MatrixXd& scores, const GroundTruth& truth, Direction direction,
                                      const std::vector<int>& ks) {
  for (int k : ks)
    if (k < 1) throw std::invalid_argument("recall cut-offs must be positive");
  if (!scores.allFinite()) throw std::invalid_argument("retrieval scores must be finite");
  const bool by_image = direction == Direction::kImageToText;
  const Index queries = by_image ? scores.rows() : scores.cols();
  std::vector<std::vector<Index>> matches(static_cast<size_t>(queries));
  for (const auto& [img, txt] : truth) {
    if (img < 0 || img >= scores.rows() || txt < 0 || txt >= scores.cols())
      throw std::out_of_range("ground-truth pair outside the score matrix");
    matches[by_image ? img : txt].push_back(by_image ? txt : img);
  }
  std::vector<RetrievalResult> out;
  for (Index q = 0; q < queries; ++q) {
    if (matches[q].empty())
      throw std::invalid_argument(std::string(by_image ? "image" : "text") + " query " + std::to_string(q) +
                                  " has no ground-truth match");
    RetrievalResult r;
    r.query = q;
    r.ranked = rank_candidates(by_image ? Vector<double>(scores.row(q).transpose()) : Vector<double>(scores.col(q)));
    Index first_hit = static_cast<Index>(r.ranked.size());
    for (size_t pos = 0; pos < r.ranked.size(); ++pos) {
      if (std::find(matches[q].begin(), matches[q].end(), r.ranked[pos]) != matches[q].end()) {
        first_hit = static_cast<Index>(pos);
        break;
      }
    }
    for (int k : ks) r.recall.emplace_back(k, first_hit < k ? 1.0 : 0.0);
    out.push_back(std::move(r));
  }
  return out;
}

RecallReport recall_at_k(const MatrixXd& scores, const GroundTruth& truth, const std::vector<int>& ks) {
  auto average = [&](Direction d) {
    const auto results = retrieve(scores, truth, d, ks);
    std::vector<std::pair<int, double>> out;
    for (size_t i = 0; i < ks.size(); ++i) {
      double sum = 0;
      for (const auto& r : results) sum += r.recall[i].second;
      out.emplace_back(ks[i], results.empty() ? 0.0 : sum / static_cast<double>(results.size()));
    }
    return out;
  };
  return {average(Direction::kImageToText), average(Direction::kTextToImage)};
}

double corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                   const std::vector<std::vector<std::vector<std::string>>>& references, int max_n) {
  if (candidates.size() != references.size()) throw std::invalid_argument("BLEU: one reference set per candidate");
  if (max_n < 1) throw std::invalid_argument("BLEU: max n-gram order must be positive");
  std::vector<double> matched(max_n, 0.0), total(max_n, 0.0);
  double cand_len = 0, ref_len = 0;
  using Gram = std::vector<std::string>;
  auto count = [](const std::vector<std::string>& toks, int n) {
    std::map<Gram, int> c;
    for (size_t i = 0; i + n <= toks.size(); ++i) ++c[Gram(toks.begin() + i, toks.begin() + i + n)];
    return c;
  };
  for (size_t s = 0; s < candidates.size(); ++s) {
    const auto& cand = candidates[s];
    const auto& refs = references[s];
    if (refs.empty()) throw std::invalid_argument("BLEU: every candidate needs a reference");
    cand_len += static_cast<double>(cand.size());
    // Closest reference length; ties go to the shorter one.
    size_t best = refs[0].size();
    for (const auto& r : refs) {
      const auto diff = [&](size_t len) { return len > cand.size() ? len - cand.size() : cand.size() - len; };
      if (diff(r.size()) < diff(best) || (diff(r.size()) == diff(best) && r.size() < best)) best = r.size();
    }
    ref_len += static_cast<double>(best);
    for (int n = 1; n <= max_n; ++n) {
      std::map<Gram, int> clip;
      for (const auto& r : refs)
        for (const auto& [g, c] : count(r, n)) clip[g] = std::max(clip[g], c);
      for (const auto& [g, c] : count(cand, n)) {
        matched[n - 1] += std::min(c, clip.count(g) ? clip[g] : 0);
        total[n - 1] += c;
      }
    }
  }
  double log_sum = 0;
  for (int n = 0; n < max_n; ++n) {
    if (total[n] == 0 || matched[n] == 0) return 0.0;
    log_sum += std::log(matched[n] / total[n]);
  }
  const double bp = cand_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return bp * std::exp(log_sum / max_n);
}

#define CVL_INSTANTIATE_HEADS(S)                                                                                  \
  template CaptionState caption_generate(const TransformerWeights<S>&, const transformer::Vocabulary&,           \
                                         const detector::RegionSet&, const std::vector<int>&, const CaptionOptions&); \
  template struct VqaHead<S>;                                                                                     \
  template struct Nlvr2Head<S>;                                                                                   \
  template Vector<S> vqa_logits(const VqaHead<S>&, const Matrix<S>&);                                             \
  template VqaPrediction vqa_predict(const TransformerWeights<S>&, const VqaHead<S>&, const transformer::Vocabulary&, \
                                     const Query&);                                                               \
  template Nlvr2Prediction nlvr2_predict(const TransformerWeights<S>&, const Nlvr2Head<S>&,                       \
                                         const transformer::Vocabulary&, const detector::RegionSet&,              \
                                         const detector::RegionSet&, const std::vector<int>&,                     \
                                         const std::vector<int>&, const std::vector<int>&);                       \
  template double retrieval_score(const TransformerWeights<S>&, const transformer::Vocabulary&, const Query&);   \
  template MatrixXd retrieval_matrix(const TransformerWeights<S>&, const transformer::Vocabulary&,               \
                                     std::span<const detector::RegionSet>, const std::vector<std::vector<int>>&,  \
                                     const std::vector<std::vector<int>>&);

CVL_INSTANTIATE_HEADS(float)
CVL_INSTANTIATE_HEADS(double)

#undef CVL_INSTANTIATE_HEADS

}  // namespace cvl::heads
