// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/detector/region_set.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cvl::pretrain {

enum class TagSource { kDetector, kTeacher, kHuman };
enum class CaptionSource { kGroundTruth, kTeacher };

std::string_view to_string(TagSource s);   // "detector", "teacher", "human"
std::string_view to_string(CaptionSource s);  // "ground-truth", "teacher"
TagSource parse_tag_source(std::string_view s);
CaptionSource parse_caption_source(std::string_view s);

struct Tag {
  std::string text;
  TagSource source = TagSource::kDetector;
  friend bool operator==(const Tag&, const Tag&) = default;
};

/// Where a record's regions live: a region store file and the image id inside it.
struct FeatureRef {
  std::string store;
  std::string key;
  friend bool operator==(const FeatureRef&, const FeatureRef&) = default;
};

struct PretrainRecord {
  std::string id;
  std::string image_id;
  std::string caption;
  CaptionSource caption_source = CaptionSource::kGroundTruth;
  std::vector<Tag> tags;
  FeatureRef features;

  /// Throws std::invalid_argument on an empty id, image id or caption.
  void validate() const;
  std::vector<std::string> tag_texts() const;
  friend bool operator==(const PretrainRecord&, const PretrainRecord&) = default;
};

/// Stable id of an (image, caption) pair.
std::string record_id(std::string_view image_id, std::string_view caption);

/// One JSON object per line; keys are written in sorted order so equal
/// records always serialize to equal bytes.
void write_corpus(const std::filesystem::path& path, const std::vector<PretrainRecord>& records);
std::vector<PretrainRecord> read_corpus(const std::filesystem::path& path);

/// One unlabeled or labeled image offered for ingestion.
struct SourceItem {
  std::string image_id;
  std::optional<std::string> caption;
  std::vector<std::string> human_tags;
};

/// JSON lines with "image_id" and optional "caption" and "human_tags".
std::vector<SourceItem> read_source(const std::filesystem::path& path);

class CaptionProvider {
 public:
  virtual ~CaptionProvider() = default;
  /// A caption for the image, or nullopt to skip it.
  virtual std::optional<std::string> caption(const SourceItem& item, const detector::RegionSet& regions) const = 0;
};

class TagProvider {
 public:
  virtual ~TagProvider() = default;
  virtual std::vector<Tag> tags(const SourceItem& item, const detector::RegionSet& regions) const = 0;
};

/// Deterministic teacher: returns `fixed` when set, otherwise
/// "a photo of <tag> and <tag>" built from the two highest-scoring distinct
/// region tags.
class StubTeacher : public CaptionProvider {
 public:
  explicit StubTeacher(std::optional<std::string> fixed = std::nullopt) : fixed_(std::move(fixed)) {}
  std::optional<std::string> caption(const SourceItem& item, const detector::RegionSet& regions) const override;

 private:
  std::optional<std::string> fixed_;
};

/// Distinct region tags in score order marked as detector predictions,
/// merged with the item's human-verified tags. A tag named by both keeps the
/// human flag.
class DetectorTagger : public TagProvider {
 public:
  std::vector<Tag> tags(const SourceItem& item, const detector::RegionSet& regions) const override;
};

struct IngestOptions {
  /// Keep a source caption when present; otherwise every caption comes from the teacher.
  bool prefer_ground_truth = true;
  std::string feature_store;
};

struct IngestReport {
  std::vector<std::string> skipped;  // image ids
  std::vector<std::string> log;
};

std::vector<PretrainRecord> ingest_distilled(const std::vector<SourceItem>& source,
                                             const std::map<std::string, detector::RegionSet>& features,
                                             const CaptionProvider& teacher, const TagProvider& tagger,
                                             const IngestOptions& options, IngestReport* report = nullptr);

/// Region sets keyed by image id.
std::map<std::string, detector::RegionSet> index_regions(std::vector<detector::RegionSet> sets);

}  // namespace cvl::pretrain
