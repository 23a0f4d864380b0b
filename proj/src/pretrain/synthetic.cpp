// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/pretrain/synthetic.hpp"

#include "compactvl/core/random.hpp"

#include <array>

namespace cvl::pretrain {

namespace {
constexpr std::array<const char*, 8> kObjects = {"dog", "cat", "car", "tree", "person", "horse", "bird", "boat"};
constexpr std::array<const char*, 5> kColors = {"red", "blue", "green", "white", "black"};
constexpr std::array<const char*, 5> kPlaces = {"grass", "street", "beach", "road", "table"};
}  // namespace

SyntheticCorpus synthetic_corpus(Index images, Index feature_dim, std::uint64_t seed) {
  if (images < 0 || feature_dim < 1) throw std::invalid_argument("synthetic corpus needs a positive feature width");
  Rng rng(seed);
  MatrixXd object_code(static_cast<Index>(kObjects.size()), feature_dim);
  MatrixXd color_code(static_cast<Index>(kColors.size()), feature_dim);
  fill_normal(object_code, 1.0, rng);
  fill_normal(color_code, 0.5, rng);
  std::uniform_int_distribution<int> object(0, kObjects.size() - 1), color(0, kColors.size() - 1),
      place(0, kPlaces.size() - 1), count(2, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.1);

  SyntheticCorpus out;
  std::vector<std::string> texts;
  for (Index i = 0; i < images; ++i) {
    const int n = count(rng), c = color(rng), pl = place(rng);
    auto regions = detector::RegionSet::empty("synthetic-" + std::to_string(i), 64, 64, feature_dim);
    regions.boxes.resize(n, 4);
    regions.features.resize(n, feature_dim);
    std::vector<int> classes;
    for (int k = 0; k < n; ++k) {
      const int o = object(rng);
      classes.push_back(o);
      const double x1 = u(rng) * 40, y1 = u(rng) * 40;
      regions.boxes.row(k) << static_cast<float>(x1), static_cast<float>(y1), static_cast<float>(x1 + 8 + u(rng) * 15),
          static_cast<float>(y1 + 8 + u(rng) * 15);
      regions.scores.push_back(static_cast<float>(1.0 - 0.1 * k));
      regions.class_ids.push_back(static_cast<std::uint16_t>(o + 1));
      regions.tags.emplace_back(kObjects[o]);
      for (Index d = 0; d < feature_dim; ++d)
        regions.features(k, d) = static_cast<float>(object_code(o, d) + color_code(c, d) + noise(rng));
    }
    PretrainRecord r;
    r.image_id = regions.image_id;
    r.caption = std::string("a ") + kColors[c] + " " + kObjects[classes[0]] + " and a " + kObjects[classes[1]] +
                " on the " + kPlaces[pl];
    r.caption_source = CaptionSource::kGroundTruth;
    for (const auto& t : regions.tags) r.tags.push_back({t, TagSource::kDetector});
    r.features = {"synthetic", r.image_id};
    r.id = record_id(r.image_id, r.caption);
    texts.push_back(r.caption);
    out.examples.push_back({std::move(r), std::move(regions)});
  }
  for (const char* o : kObjects) texts.emplace_back(o);
  for (const char* c : kColors) texts.emplace_back(c);
  for (const char* p : kPlaces) texts.emplace_back(p);
  texts.emplace_back("a and on the");
  out.vocab = transformer::Vocabulary::from_texts(texts);
  return out;
}

}  // namespace cvl::pretrain
