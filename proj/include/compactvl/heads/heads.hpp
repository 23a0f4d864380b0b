// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/random.hpp"
#include "compactvl/detector/region_set.hpp"
#include "compactvl/transformer/model.hpp"
#include "compactvl/transformer/tokenizer.hpp"

#include <span>
#include <string>
#include <vector>

namespace cvl::heads {

inline constexpr int kVqaAnswers = 3129;

/// Everything the fusion transformer reads for one image-text pair.
struct Query {
  const detector::RegionSet& regions;
  std::vector<int> tag_ids;
  std::vector<int> text_ids;
};

/// Token ids of every tag, in order.
std::vector<int> encode_tags(const transformer::Tokenizer& tokenizer, const std::vector<std::string>& tags);

/// Index of the largest entry; ties go to the lowest index.
template <typename Derived>
Index argmax_lowest(const Eigen::DenseBase<Derived>& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

// ---------------------------------------------------------------- captioning

struct CaptionOptions {
  Index max_length = 20;
  int beam = 1;
};

struct CaptionState {
  std::vector<int> tokens;         // generated ids, end token excluded
  std::vector<double> log_probs;   // one per decoding step
  Index max_length = 20;
  bool finished = false;           // end token emitted or budget reached
  bool ended = false;              // end token emitted
};

/// Greedy decoding: append [MASK] after the tokens so far, read the masked
/// position's logits under the causal caption mask, keep the argmax, repeat
/// until [SEP] or `max_length` tokens.
template <typename Scalar>
CaptionState caption_generate(const transformer::TransformerWeights<Scalar>& weights,
                              const transformer::Vocabulary& vocab, const detector::RegionSet& regions,
                              const std::vector<int>& tag_ids, const CaptionOptions& options = {});

// ----------------------------------------------------------------------- VQA

/// Linear answer classifier over the pooled [CLS] state.
template <typename Scalar>
struct VqaHead {
  Matrix<Scalar> weight;  // answers x d
  Matrix<Scalar> bias;    // answers x 1

  static VqaHead zeros(Index hidden, Index answers = kVqaAnswers);
  static VqaHead init(Index hidden, Rng& rng, double stddev = 0.02, Index answers = kVqaAnswers);
  Index answers() const { return weight.rows(); }
  template <typename F>
  void visit(F&& f) {
    f("vqa.classifier.weight", weight);
    f("vqa.classifier.bias", bias);
  }
};

struct VqaPrediction {
  Index answer = 0;
  double confidence = 0.0;
  Vector<double> scores;  // sigmoid per answer
};

template <typename Scalar>
VqaPrediction vqa_predict(const transformer::TransformerWeights<Scalar>& weights, const VqaHead<Scalar>& head,
                          const transformer::Vocabulary& vocab, const Query& query);

/// Answer logits from a pooled 1 x d state.
template <typename Scalar>
Vector<Scalar> vqa_logits(const VqaHead<Scalar>& head, const Matrix<Scalar>& pooled);

/// Binary cross-entropy summed over answers against soft targets in [0, 1].
double vqa_bce_loss(const Vector<double>& logits, const Vector<double>& targets);

// -------------------------------------------------------------------- NLVR2

/// Binary classifier over [pooled_left, pooled_right].
template <typename Scalar>
struct Nlvr2Head {
  Matrix<Scalar> weight;  // 1 x 2d
  Matrix<Scalar> bias;    // 1 x 1

  static Nlvr2Head zeros(Index hidden);
  static Nlvr2Head init(Index hidden, Rng& rng, double stddev = 0.02);
  template <typename F>
  void visit(F&& f) {
    f("nlvr2.classifier.weight", weight);
    f("nlvr2.classifier.bias", bias);
  }
};

struct Nlvr2Prediction {
  bool label = false;       // confidence > 0.5
  double confidence = 0.5;  // sigmoid of the classifier logit
};

template <typename Scalar>
Nlvr2Prediction nlvr2_predict(const transformer::TransformerWeights<Scalar>& weights, const Nlvr2Head<Scalar>& head,
                              const transformer::Vocabulary& vocab, const detector::RegionSet& left,
                              const detector::RegionSet& right, const std::vector<int>& left_tags,
                              const std::vector<int>& right_tags, const std::vector<int>& description);

// ---------------------------------------------------------------- retrieval

/// sigmoid(l1 - l0) of the matching head: the probability that the text
/// describes the image.
template <typename Scalar>
double retrieval_score(const transformer::TransformerWeights<Scalar>& weights, const transformer::Vocabulary& vocab,
                       const Query& query);

/// Scores every (image, text) pair; rows are images, columns texts.
template <typename Scalar>
MatrixXd retrieval_matrix(const transformer::TransformerWeights<Scalar>& weights, const transformer::Vocabulary& vocab,
                          std::span<const detector::RegionSet> images, const std::vector<std::vector<int>>& image_tags,
                          const std::vector<std::vector<int>>& texts);

enum class Direction { kImageToText, kTextToImage };

/// Candidate order by descending score; equal scores keep index order.
std::vector<Index> rank_candidates(const Vector<double>& scores);

struct RetrievalResult {
  Index query = 0;
  std::vector<Index> ranked;
  std::vector<std::pair<int, double>> recall;  // (K, 0 or 1) for each requested K
};

/// Matching (image, text) pairs.
using GroundTruth = std::vector<std::pair<Index, Index>>;

/// Per-query ranking against `scores` (images x texts). Image-to-text
/// queries are rows, text-to-image queries are columns. Throws when a query
/// has no ground-truth match or a pair is out of range.
std::vector<RetrievalResult> retrieve(const MatrixXd& scores, const GroundTruth& truth, Direction direction,
                                      const std::vector<int>& ks = {1, 5, 10});

struct RecallReport {
  std::vector<std::pair<int, double>> text_retrieval;   // image queries
  std::vector<std::pair<int, double>> image_retrieval;  // text queries
};

/// Fraction of queries with a true match in the top K, for both directions.
RecallReport recall_at_k(const MatrixXd& scores, const GroundTruth& truth, const std::vector<int>& ks = {1, 5, 10});

// --------------------------------------------------------------------- BLEU

/// Plain corpus BLEU (clipped n-gram precision, geometric mean, brevity
/// penalty, no smoothing) on token lists. Non-official; for smoke tests.
double corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                   const std::vector<std::vector<std::vector<std::string>>>& references, int max_n = 4);

}  // namespace cvl::heads
