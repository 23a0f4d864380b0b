// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/pretrain/itm.hpp"
#include "compactvl/pretrain/losses.hpp"
#include "compactvl/pretrain/masking.hpp"
#include "compactvl/pretrain/optimizer.hpp"
#include "compactvl/pretrain/record.hpp"
#include "compactvl/pretrain/synthetic.hpp"
#include "compactvl/pretrain/trainer.hpp"

#include "fixtures.hpp"
#include "golden.hpp"
#include "stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <thread>

namespace cvl::pretrain {
namespace {

using transformer::Vocabulary;

const Vocabulary& vocab() {
  static const Vocabulary v({"a", "dog", "cat", "on", "the", "grass", "red", "car"});
  return v;
}

std::vector<int> ordinary_ids(Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> d(5, vocab().size() - 1);
  std::vector<int> ids(n);
  for (auto& i : ids) i = d(rng);
  return ids;
}

TEST(MaskTokens, RateZeroLeavesInputUnchanged) {
  const auto ids = ordinary_ids(50, 1);
  Rng rng(2);
  const auto m = mask_tokens(ids, vocab(), {0.0}, rng);
  EXPECT_EQ(m.input_ids, ids);
  EXPECT_EQ(m.masked(), 0);
  for (int l : m.labels) EXPECT_EQ(l, kIgnoreLabel);
}

TEST(MaskTokens, RateOneMasksEveryEligiblePositionButNoSpecial) {
  auto ids = ordinary_ids(30, 3);
  ids[0] = vocab().cls_id();
  ids[10] = vocab().sep_id();
  Rng rng(4);
  const auto m = mask_tokens(ids, vocab(), {1.0}, rng);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (vocab().is_special(ids[i])) {
      EXPECT_EQ(m.input_ids[i], ids[i]);
      EXPECT_EQ(m.labels[i], kIgnoreLabel);
    } else {
      EXPECT_EQ(m.input_ids[i], vocab().mask_id());
      EXPECT_EQ(m.labels[i], ids[i]);
    }
  }
  EXPECT_EQ(m.masked(), 28);
}

TEST(MaskTokens, LabelsExactlyAtMaskPositions) {
  const auto ids = ordinary_ids(400, 5);
  Rng rng(6);
  const auto m = mask_tokens(ids, vocab(), {0.3}, rng);
  std::set<Index> pos(m.positions.begin(), m.positions.end());
  for (size_t i = 0; i < ids.size(); ++i) {
    const bool masked = pos.count(static_cast<Index>(i)) > 0;
    EXPECT_EQ(m.labels[i] != kIgnoreLabel, masked);
    EXPECT_EQ(m.input_ids[i] == vocab().mask_id(), masked);
    if (masked) {
      EXPECT_EQ(m.labels[i], ids[i]);
    }
  }
}

TEST(MaskTokens, EmptyEligibleSetGivesValidEmptyBatch) {
  const auto ids = ordinary_ids(20, 7);
  const std::vector<std::uint8_t> none(20, 0);
  Rng rng(8);
  const auto m = mask_tokens(ids, vocab(), {1.0}, rng, none);
  EXPECT_EQ(m.masked(), 0);
  EXPECT_EQ(m.input_ids, ids);
  EXPECT_EQ(m.labels.size(), ids.size());
}

TEST(MaskTokens, DeterministicUnderSeed) {
  const auto ids = ordinary_ids(1000, 9);
  Rng a(10), b(10), c(11);
  const auto ma = mask_tokens(ids, vocab(), {}, a), mb = mask_tokens(ids, vocab(), {}, b);
  EXPECT_EQ(ma.input_ids, mb.input_ids);
  EXPECT_EQ(ma.positions, mb.positions);
  EXPECT_NE(ma.positions, mask_tokens(ids, vocab(), {}, c).positions);
}

TEST(MaskTokens, RateWithinExactBinomialInterval) {
  constexpr Index n = 100000;
  const auto ids = ordinary_ids(n, 12);
  const auto [lo, hi] = cvl::testing::binomial_interval(n, 0.15, 0.999);
  EXPECT_LT(lo, 15000);
  EXPECT_GT(hi, 15000);
  for (std::uint64_t seed : {13u, 14u, 15u}) {
    Rng rng(seed);
    const auto m = mask_tokens(ids, vocab(), {0.15}, rng);
    EXPECT_GE(m.masked(), lo) << seed;
    EXPECT_LE(m.masked(), hi) << seed;
  }
}

TEST(MaskTokens, MixedReplacementSplit) {
  constexpr Index n = 100000;
  const auto ids = ordinary_ids(n, 16);
  Rng rng(17);
  MaskingOptions o;
  o.rate = 1.0;
  o.mixed_replacement = true;
  const auto m = mask_tokens(ids, vocab(), o, rng);
  ASSERT_EQ(m.masked(), n);
  Index masks = 0, kept = 0;
  for (Index i = 0; i < n; ++i) {
    masks += m.input_ids[i] == vocab().mask_id();
    kept += m.input_ids[i] == ids[i];
    EXPECT_FALSE(vocab().is_special(m.input_ids[i]) && m.input_ids[i] != vocab().mask_id());
  }
  // A random replacement equals the original with probability 1/ordinary tokens.
  const double ordinary = vocab().size() - 5;
  const double p_kept = 0.1 + 0.1 / ordinary;
  const auto [mlo, mhi] = cvl::testing::binomial_interval(n, 0.8, 0.999);
  const auto [klo, khi] = cvl::testing::binomial_interval(n, p_kept, 0.999);
  EXPECT_GE(masks, mlo);
  EXPECT_LE(masks, mhi);
  EXPECT_GE(kept, klo);
  EXPECT_LE(kept, khi);
}

TEST(MaskTokens, RejectsBadArguments) {
  const auto ids = ordinary_ids(4, 1);
  Rng rng(1);
  EXPECT_THROW(mask_tokens(ids, vocab(), {1.5}, rng), std::invalid_argument);
  const std::vector<std::uint8_t> short_flags(2, 1);
  EXPECT_THROW(mask_tokens(ids, vocab(), {0.5}, rng, short_flags), std::invalid_argument);
}

TEST(MaskInput, RegionsAndSpecialsNeverMaskedTagsToggleable) {
  auto config = transformer::toy_transformer_config(vocab().size(), 8);
  const auto regions = cvl::testing::random_regions(5, 8, 1);
  const auto in = transformer::assemble_input(regions, {6, 7, 8}, {5, 6, 7, 9}, transformer::Task::kPretrainMlm,
                                              vocab(), config);
  Rng rng(2);
  MaskingOptions o{1.0};
  auto m = mask_input(in, vocab(), o, rng);
  EXPECT_EQ(m.input_ids.size(), static_cast<size_t>(in.layout.text_length()));
  EXPECT_EQ(m.masked(), 7);
  EXPECT_EQ(m.input_ids.front(), vocab().cls_id());
  EXPECT_EQ(m.input_ids[5], vocab().sep_id());
  EXPECT_EQ(m.input_ids.back(), vocab().sep_id());
  o.mask_tags = false;
  m = mask_input(in, vocab(), o, rng);
  EXPECT_EQ(m.masked(), 4);
  for (Index p : m.positions) EXPECT_LE(p, in.layout.sentence);
}

TEST(MlmLoss, UniformLogitsOverBertVocabulary) {
  constexpr int V = 30522;
  const MatrixXd logits = MatrixXd::Zero(3, V);
  MaskedBatch b;
  b.labels = {kIgnoreLabel, 1234, kIgnoreLabel};
  b.positions = {1};
  const auto r = mlm_loss(logits, b);
  EXPECT_NEAR(r.value, std::log(30522.0), 1e-12);
  EXPECT_NEAR(r.value, 10.326, 5e-4);
  EXPECT_FALSE(r.empty);
}

TEST(MlmLoss, ConfidentCorrectLogitsGiveZero) {
  MatrixXd logits = MatrixXd::Zero(2, 6);
  logits(0, 3) = 1e6;
  logits(1, 5) = 1e6;
  MaskedBatch b;
  b.labels = {3, 5};
  EXPECT_NEAR(mlm_loss(logits, b).value, 0.0, 1e-12);
}

TEST(MlmLoss, HandComputedTwoPositions) {
  MatrixXd logits(3, 3);
  logits << 1, 2, 3, 2, 0, 0, 9, -9, 4;
  MaskedBatch b;
  b.labels = {2, 1, kIgnoreLabel};
  const double first = std::log(1 + std::exp(-1.0) + std::exp(-2.0));
  const double second = std::log(std::exp(2.0) + 2.0);
  const auto r = mlm_loss(logits, b);
  EXPECT_NEAR(r.value, (first + second) / 2, 1e-12);
  EXPECT_EQ(r.count, 2);
  EXPECT_TRUE(r.grad.row(2).isZero(0));
}

TEST(MlmLoss, NoMaskedPositionIsZeroWithFlag) {
  MaskedBatch b;
  b.labels.assign(4, kIgnoreLabel);
  const auto r = mlm_loss(MatrixXd::Random(4, 5).eval(), b);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_TRUE(r.empty);
  EXPECT_TRUE(r.grad.isZero(0));
  b.labels.pop_back();
  EXPECT_THROW(mlm_loss(MatrixXd::Zero(4, 5).eval(), b), ShapeError);
}

TEST(MlmLoss, GradientMatchesFiniteDifference) {
  Rng rng(3);
  MatrixXd logits(4, 7);
  fill_normal(logits, 2.0, rng);
  MaskedBatch b;
  b.labels = {3, kIgnoreLabel, 0, 6};
  const auto r = mlm_loss(logits, b);
  for (Index i = 0; i < logits.rows(); ++i) {
    for (Index j = 0; j < logits.cols(); ++j) {
      MatrixXd up = logits, down = logits;
      up(i, j) += 1e-6;
      down(i, j) -= 1e-6;
      const double fd = (mlm_loss(up, b).value - mlm_loss(down, b).value) / 2e-6;
      EXPECT_NEAR(r.grad(i, j), fd, 1e-8);
    }
  }
}

TEST(ItmLoss, ZeroLogitsGiveLnTwo) {
  const std::vector<int> labels{1, 0, 1, 1};
  EXPECT_NEAR(itm_loss(MatrixXd::Zero(4, 2).eval(), labels).value, std::log(2.0), 1e-15);
}

TEST(ItmLoss, SeparatedLogitsGiveZero) {
  MatrixXd logits(2, 2);
  logits << -50, 50, 50, -50;
  const std::vector<int> labels{1, 0};
  EXPECT_LT(itm_loss(logits, labels).value, 1e-20);
}

TEST(ItmLoss, HandComputedThreeExamplesAndBinaryForm) {
  MatrixXd logits(3, 2);
  logits << 0, 2, 1, -1, 0.5, 0.5;
  const std::vector<int> labels{1, 0, 1};
  const double expected = (2 * std::log1p(std::exp(-2.0)) + std::log(2.0)) / 3;
  EXPECT_NEAR(itm_loss(logits, labels).value, expected, 1e-14);
  // Binary cross-entropy of sigmoid(l1 - l0).
  double bce = 0;
  for (Index i = 0; i < 3; ++i) {
    const double p = 1 / (1 + std::exp(-(logits(i, 1) - logits(i, 0))));
    bce -= labels[i] ? std::log(p) : std::log(1 - p);
  }
  EXPECT_NEAR(itm_loss(logits, labels).value, bce / 3, 1e-14);
  const std::vector<int> bad{1, 2, 0};
  EXPECT_THROW(itm_loss(logits, bad), std::invalid_argument);
}

std::vector<PretrainRecord> numbered_records(Index n) {
  std::vector<PretrainRecord> out;
  for (Index i = 0; i < n; ++i) {
    PretrainRecord r;
    r.image_id = "img" + std::to_string(i);
    r.caption = "caption " + std::to_string(i);
    r.id = record_id(r.image_id, r.caption);
    r.features = {"store", r.image_id};
    out.push_back(r);
  }
  return out;
}

TEST(ItmCorrupt, ProbabilityZeroKeepsEveryPair) {
  const auto records = numbered_records(8);
  Rng rng(1);
  for (const auto& p : itm_corrupt(records, 0.0, rng)) {
    EXPECT_EQ(p.label, 1);
    EXPECT_EQ(p.caption, p.image);
  }
}

TEST(ItmCorrupt, ProbabilityOneOnTwoRecordsSwaps) {
  const auto records = numbered_records(2);
  Rng rng(2);
  const auto pairs = itm_corrupt(records, 1.0, rng);
  EXPECT_EQ(pairs[0].caption, 1);
  EXPECT_EQ(pairs[1].caption, 0);
  EXPECT_EQ(pairs[0].label, 0);
  EXPECT_EQ(pairs[1].label, 0);
}

TEST(ItmCorrupt, CorruptionRateAndNoSelfPairing) {
  constexpr Index n = 10000;
  const auto records = numbered_records(n);
  Rng rng(3);
  const auto pairs = itm_corrupt(records, 0.5, rng);
  Index corrupted = 0;
  std::vector<Index> drawn(n, 0);
  for (Index i = 0; i < n; ++i) {
    EXPECT_EQ(pairs[i].image, i);
    if (pairs[i].label == 0) {
      ++corrupted;
      EXPECT_NE(pairs[i].caption, i);
      ++drawn[pairs[i].caption];
    } else {
      EXPECT_EQ(pairs[i].caption, i);
    }
  }
  const auto [lo, hi] = cvl::testing::binomial_interval(n, 0.5, 0.999);
  EXPECT_GE(corrupted, lo);
  EXPECT_LE(corrupted, hi);
  // Donors are spread over the batch rather than concentrated.
  EXPECT_LE(*std::max_element(drawn.begin(), drawn.end()), 10);
}

TEST(ItmCorrupt, RejectsSingleRecordBatch) {
  const auto records = numbered_records(1);
  Rng rng(4);
  EXPECT_THROW(itm_corrupt(records, 0.5, rng), std::invalid_argument);
}

detector::RegionSet tagged_regions(const std::string& id, std::vector<std::string> tags) {
  auto r = cvl::testing::random_regions(static_cast<Index>(tags.size()), 4, 9);
  r.image_id = id;
  r.tags = std::move(tags);
  return r;
}

TEST(Ingest, EmptySourceGivesEmptyStream) {
  IngestReport report;
  EXPECT_TRUE(ingest_distilled({}, {}, StubTeacher(), DetectorTagger(), {}, &report).empty());
  EXPECT_TRUE(report.skipped.empty());
}

TEST(Ingest, FixedStubTeacherCaptionsEveryRecord) {
  std::map<std::string, detector::RegionSet> features;
  std::vector<SourceItem> source;
  for (int i = 0; i < 5; ++i) {
    const auto id = "u" + std::to_string(i);
    features[id] = tagged_regions(id, {"dog", "grass"});
    source.push_back({id, std::nullopt, {}});
  }
  const auto records = ingest_distilled(source, features, StubTeacher("a dog on the grass"), DetectorTagger(),
                                        {false, "features.bin"});
  ASSERT_EQ(records.size(), 5u);
  for (const auto& r : records) {
    EXPECT_EQ(r.caption, "a dog on the grass");
    EXPECT_EQ(r.caption_source, CaptionSource::kTeacher);
    EXPECT_EQ(r.features.store, "features.bin");
    EXPECT_EQ(r.features.key, r.image_id);
  }
}

TEST(Ingest, GroundTruthAndTemplateTeacherWithProvenance) {
  std::map<std::string, detector::RegionSet> features;
  features["a"] = tagged_regions("a", {"dog", "dog", "cat"});
  features["b"] = tagged_regions("b", {"car"});
  const std::vector<SourceItem> source{{"a", "two pets", {"cat", "sofa"}}, {"b", std::nullopt, {}}};
  const auto records = ingest_distilled(source, features, StubTeacher(), DetectorTagger(), {});
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].caption, "two pets");
  EXPECT_EQ(records[0].caption_source, CaptionSource::kGroundTruth);
  const std::vector<Tag> expected{{"dog", TagSource::kDetector}, {"cat", TagSource::kHuman}, {"sofa", TagSource::kHuman}};
  EXPECT_EQ(records[0].tags, expected);
  EXPECT_EQ(records[1].caption, "a photo of car");
  EXPECT_EQ(records[1].caption_source, CaptionSource::kTeacher);
}

TEST(Ingest, MissingFeaturesAreSkippedAndLogged) {
  std::map<std::string, detector::RegionSet> features;
  features["x"] = tagged_regions("x", {"dog"});
  IngestReport report;
  const auto records = ingest_distilled({{"x", "c", {}}, {"y", "c", {}}}, features, StubTeacher(), DetectorTagger(),
                                        {}, &report);
  EXPECT_EQ(records.size(), 1u);
  EXPECT_EQ(report.skipped, std::vector<std::string>{"y"});
  ASSERT_EQ(report.log.size(), 1u);
  EXPECT_NE(report.log[0].find("y"), std::string::npos);
}

TEST(Ingest, ReingestionIsByteIdentical) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto corpus = synthetic_corpus(12, 4, 5);
  std::vector<detector::RegionSet> sets;
  std::vector<SourceItem> source;
  for (const auto& e : corpus.examples) {
    sets.push_back(e.regions);
    source.push_back({e.record.image_id, std::nullopt, {"table"}});
  }
  const auto store = dir / "cvl_ingest_regions.bin";
  detector::write_region_store(store, sets);
  auto run = [&](const std::filesystem::path& out) {
    const auto features = index_regions(detector::read_region_store(store));
    write_corpus(out, ingest_distilled(source, features, StubTeacher(), DetectorTagger(), {true, store.string()}));
  };
  run(dir / "cvl_corpus_a.jsonl");
  run(dir / "cvl_corpus_b.jsonl");
  const auto a = cvl::testing::read_bytes(dir / "cvl_corpus_a.jsonl");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, cvl::testing::read_bytes(dir / "cvl_corpus_b.jsonl"));
  const auto records = read_corpus(dir / "cvl_corpus_a.jsonl");
  EXPECT_EQ(records.size(), 12u);
  for (const auto& r : records) EXPECT_EQ(r.id, record_id(r.image_id, r.caption));
}

TEST(Corpus, RejectsTagsWithoutProvenanceAndEmptyCaptions) {
  const auto path = std::filesystem::temp_directory_path() / "cvl_bad_corpus.jsonl";
  {
    std::ofstream out(path);
    out << R"({"id":"1","image_id":"a","caption":"x","caption_source":"teacher","tags":[{"text":"dog"}],)"
        << R"("features":{"store":"s","key":"a"}})" << "\n";
  }
  EXPECT_THROW(read_corpus(path), std::invalid_argument);
  {
    std::ofstream out(path);
    out << R"({"id":"1","image_id":"a","caption":"","caption_source":"teacher","tags":[],)"
        << R"("features":{"store":"s","key":"a"}})" << "\n";
  }
  EXPECT_THROW(read_corpus(path), std::invalid_argument);
}

struct Pair {
  MatrixXd w, b;
  template <typename F>
  void visit(F&& f) {
    f("layer.weight", w);
    f("layer.bias", b);
  }
};

TEST(AdamW, FirstTwoStepsMatchHandUpdate) {
  AdamWOptions o;
  o.lr = 0.1;
  o.weight_decay = 0.5;
  o.eps = 0;
  AdamW<double> opt(o);
  Pair p{MatrixXd::Constant(1, 1, 2.0), MatrixXd::Constant(1, 1, 2.0)};
  Pair g{MatrixXd::Constant(1, 1, 0.3), MatrixXd::Constant(1, 1, 0.3)};
  opt.step(p, g);
  // Bias-corrected first step is lr * sign(g); decay only on the weight.
  EXPECT_NEAR(p.w(0, 0), 2.0 * (1 - 0.05) - 0.1, 1e-14);
  EXPECT_NEAR(p.b(0, 0), 2.0 - 0.1, 1e-14);
  g.b(0, 0) = -0.1;
  opt.step(p, g);
  const double m = 0.9 * 0.1 * 0.3 + 0.1 * -0.1, v = 0.999 * 0.001 * 0.09 + 0.001 * 0.01;
  const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p.b(0, 0), 1.9 - 0.1 * mhat / std::sqrt(vhat), 1e-12);
}

TEST(AdamW, LinearWarmupAndDecay) {
  AdamWOptions o;
  o.lr = 1.0;
  o.warmup_steps = 4;
  o.total_steps = 14;
  EXPECT_DOUBLE_EQ(learning_rate(o, 0), 0.25);
  EXPECT_DOUBLE_EQ(learning_rate(o, 3), 1.0);
  EXPECT_DOUBLE_EQ(learning_rate(o, 4), 1.0);
  EXPECT_DOUBLE_EQ(learning_rate(o, 9), 0.5);
  EXPECT_DOUBLE_EQ(learning_rate(o, 14), 0.0);
  EXPECT_DOUBLE_EQ(learning_rate(o, 20), 0.0);
  o.total_steps = 0;
  EXPECT_DOUBLE_EQ(learning_rate(o, 1000), 1.0);
}

struct ToyCorpus {
  SyntheticCorpus corpus;
  transformer::WhitespaceTokenizer tokenizer;
  transformer::TransformerConfig config;

  explicit ToyCorpus(Index images, std::uint64_t seed = 1)
      : corpus(synthetic_corpus(images, 8, seed)),
        tokenizer(corpus.vocab),
        config(transformer::toy_transformer_config(corpus.vocab.size(), 8)) {}

  template <typename Scalar>
  transformer::TransformerWeights<Scalar> weights(std::uint64_t seed = 2) const {
    Rng rng(seed);
    return transformer::init_transformer_weights<Scalar>(config, rng);
  }
};

template <typename Scalar>
std::map<std::string, Matrix<Scalar>> snapshot(transformer::TransformerWeights<Scalar> w) {
  std::map<std::string, Matrix<Scalar>> out;
  w.visit([&](const std::string& n, Matrix<Scalar>& m) { out[n] = m; });
  return out;
}

TEST(Pretrainer, ZeroLearningRateLeavesWeightsUnchanged) {
  ToyCorpus s(16);
  PretrainOptions o;
  o.optimizer.lr = 0.0;
  Pretrainer<float> t(s.weights<float>(), s.tokenizer, o, 3);
  const auto before = snapshot(t.weights());
  const auto m = t.step(s.corpus.examples);
  EXPECT_GT(m.loss, 0.0);
  EXPECT_GT(m.grad_norm, 0.0);
  EXPECT_EQ(before, snapshot(t.weights()));
}

TEST(Pretrainer, MlmOnlyWeightsProduceNoItmGradient) {
  ToyCorpus s(8);
  PretrainOptions o;
  o.itm_weight = 0.0;
  Pretrainer<double> t(s.weights<double>(), s.tokenizer, o, 4);
  Rng rng(5);
  auto g = t.gradients(s.corpus.examples, rng, true);
  EXPECT_EQ(g.metrics.itm, 0.0);
  EXPECT_EQ(g.metrics.negatives, 0);
  EXPECT_TRUE(g.grads.itm_w.isZero(0));
  EXPECT_TRUE(g.grads.itm_b.isZero(0));
  EXPECT_TRUE(g.grads.pooler_w.isZero(0));
  EXPECT_TRUE(g.grads.pooler_b.isZero(0));
  EXPECT_FALSE(g.grads.vocab_w.isZero(0));
}

TEST(Pretrainer, NonFiniteLossIsHardError) {
  ToyCorpus s(4);
  auto w = s.weights<double>();
  w.vocab_b(3, 0) = std::numeric_limits<double>::quiet_NaN();
  w.itm_b(0, 0) = std::numeric_limits<double>::quiet_NaN();
  Pretrainer<double> t(std::move(w), s.tokenizer, {}, 6);
  EXPECT_THROW(t.step(s.corpus.examples), NumericalError);
}

TEST(Pretrainer, RejectsVocabularyMismatch) {
  ToyCorpus s(4);
  auto config = s.config;
  config.vocab_size += 1;
  Rng rng(1);
  EXPECT_THROW(Pretrainer<float>(transformer::init_transformer_weights<float>(config, rng), s.tokenizer, {}, 1),
               ConfigError);
}

TEST(Pretrainer, IdenticalSeedsGiveIdenticalRuns) {
  ToyCorpus s(24);
  PretrainOptions o;
  o.batch_size = 8;
  Pretrainer<float> a(s.weights<float>(), s.tokenizer, o, 7), b(s.weights<float>(), s.tokenizer, o, 7);
  const auto ha = a.train(s.corpus.examples, 5), hb = b.train(s.corpus.examples, 5);
  for (size_t i = 0; i < ha.size(); ++i) {
    EXPECT_EQ(ha[i].loss, hb[i].loss);
    EXPECT_EQ(ha[i].masked, hb[i].masked);
  }
  EXPECT_EQ(snapshot(a.weights()), snapshot(b.weights()));
}

TEST(Pretrainer, BatchGradientMatchesFiniteDifference) {
  ToyCorpus s(6);
  PretrainOptions o;
  o.masking.rate = 0.4;
  const auto w0 = s.weights<double>(8);
  Pretrainer<double> t(w0, s.tokenizer, o, 9);
  Rng rng(11);
  const auto g = t.gradients(s.corpus.examples, rng, false);
  ASSERT_GT(g.metrics.masked, 0);
  ASSERT_GT(g.metrics.negatives, 0);

  auto grads = g.grads;
  std::map<std::string, Matrix<double>*> gmap;
  grads.visit([&](const std::string& n, Matrix<double>& m) { gmap[n] = &m; });
  const std::vector<std::string> probe{"embedding.region_projection.weight", "encoder.layers.1.ffn.in.weight",
                                       "pooler.itm.weight", "pooler.dense.weight", "decoder.vocab.bias",
                                       "embedding.word.weight"};
  for (const auto& name : probe) {
    auto w = w0;
    Matrix<double>* target = nullptr;
    w.visit([&](const std::string& n, Matrix<double>& m) {
      if (n == name) target = &m;
    });
    ASSERT_NE(target, nullptr);
    Eigen::VectorXd a(12), n(12);
    for (Index k = 0; k < 12; ++k) {
      const Index idx = (k * 7919) % target->size();
      double& x = target->data()[idx];
      const double saved = x;
      x = saved + 1e-5;
      const double up = Pretrainer<double>(w, s.tokenizer, o, 9).evaluate(s.corpus.examples, 11).loss;
      x = saved - 1e-5;
      const double down = Pretrainer<double>(w, s.tokenizer, o, 9).evaluate(s.corpus.examples, 11).loss;
      x = saved;
      n(k) = (up - down) / 2e-5;
      a(k) = gmap.at(name)->data()[idx];
    }
    EXPECT_LT((a - n).norm() / std::max(n.norm(), 1e-8), 1e-4) << name;
  }
}

TEST(Pretrainer, ConcurrentStepsAreSerialized) {
  ToyCorpus s(16);
  PretrainOptions o;
  o.batch_size = 4;
  Pretrainer<float> t(s.weights<float>(), s.tokenizer, o, 12);
  const std::span<const PretrainExample> all(s.corpus.examples);
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i) threads.emplace_back([&, i] { t.step(all.subspan(4 * i, 4)); });
  for (auto& th : threads) th.join();
  bool finite = true;
  auto w = t.weights();
  w.visit([&](const std::string&, MatrixXf& m) { finite = finite && m.allFinite(); });
  EXPECT_TRUE(finite);
}

TEST(Pretrainer, TwoHundredStepsReduceLossOnSyntheticCorpus) {
  ToyCorpus s(64);
  PretrainOptions o;
  o.optimizer.total_steps = 200;
  Pretrainer<float> t(s.weights<float>(), s.tokenizer, o, 13);
  const auto before = t.evaluate(s.corpus.examples, 99);
  const auto history = t.train(s.corpus.examples, 200);
  const auto after = t.evaluate(s.corpus.examples, 99);
  ASSERT_EQ(history.size(), 200u);
  EXPECT_LT(after.loss, before.loss);
  EXPECT_LT(after.mlm, before.mlm);
  EXPECT_LT(after.itm, before.itm);
  double first = 0, last = 0;
  for (int i = 0; i < 20; ++i) {
    first += history[i].loss;
    last += history[180 + i].loss;
  }
  EXPECT_LT(last, first);
}

}  // namespace
}  // namespace cvl::pretrain
