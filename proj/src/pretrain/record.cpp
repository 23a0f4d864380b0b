// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/pretrain/record.hpp"

#include "compactvl/core/hash.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

namespace cvl::pretrain {

using nlohmann::json;

std::string_view to_string(TagSource s) {
  switch (s) {
    case TagSource::kDetector: return "detector";
    case TagSource::kTeacher: return "teacher";
    case TagSource::kHuman: return "human";
  }
  return "detector";
}

std::string_view to_string(CaptionSource s) {
  return s == CaptionSource::kGroundTruth ? "ground-truth" : "teacher";
}

TagSource parse_tag_source(std::string_view s) {
  if (s == "detector") return TagSource::kDetector;
  if (s == "teacher") return TagSource::kTeacher;
  if (s == "human") return TagSource::kHuman;
  throw std::invalid_argument("unknown tag provenance '" + std::string(s) + "'");
}

CaptionSource parse_caption_source(std::string_view s) {
  if (s == "ground-truth") return CaptionSource::kGroundTruth;
  if (s == "teacher") return CaptionSource::kTeacher;
  throw std::invalid_argument("unknown caption provenance '" + std::string(s) + "'");
}

void PretrainRecord::validate() const {
  if (id.empty()) throw std::invalid_argument("pretrain record without id");
  if (image_id.empty()) throw std::invalid_argument("pretrain record '" + id + "' without image id");
  if (caption.empty()) throw std::invalid_argument("pretrain record '" + id + "' has an empty caption");
  for (const auto& t : tags)
    if (t.text.empty()) throw std::invalid_argument("pretrain record '" + id + "' has an empty tag");
}

std::vector<std::string> PretrainRecord::tag_texts() const {
  std::vector<std::string> out;
  for (const auto& t : tags) out.push_back(t.text);
  return out;
}

std::string record_id(std::string_view image_id, std::string_view caption) {
  std::string key(image_id);
  key.push_back('\0');
  key.append(caption);
  return hex64(fnv1a64(key));
}

namespace {

json to_json(const PretrainRecord& r) {
  json tags = json::array();
  for (const auto& t : r.tags) tags.push_back({{"text", t.text}, {"source", to_string(t.source)}});
  return {{"id", r.id},
          {"image_id", r.image_id},
          {"caption", r.caption},
          {"caption_source", to_string(r.caption_source)},
          {"tags", tags},
          {"features", {{"store", r.features.store}, {"key", r.features.key}}}};
}

PretrainRecord from_json(const json& j) {
  PretrainRecord r;
  r.id = j.at("id").get<std::string>();
  r.image_id = j.at("image_id").get<std::string>();
  r.caption = j.at("caption").get<std::string>();
  r.caption_source = parse_caption_source(j.at("caption_source").get<std::string>());
  for (const auto& t : j.at("tags")) {
    if (!t.contains("source")) throw std::invalid_argument("tag without provenance in record '" + r.id + "'");
    r.tags.push_back({t.at("text").get<std::string>(), parse_tag_source(t.at("source").get<std::string>())});
  }
  r.features.store = j.at("features").at("store").get<std::string>();
  r.features.key = j.at("features").at("key").get<std::string>();
  r.validate();
  return r;
}

template <typename F>
void for_each_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(json::parse(line));
    } catch (const std::exception& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

}  // namespace

void write_corpus(const std::filesystem::path& path, const std::vector<PretrainRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) {
    r.validate();
    out << to_json(r).dump() << '\n';
  }
}

std::vector<PretrainRecord> read_corpus(const std::filesystem::path& path) {
  std::vector<PretrainRecord> out;
  for_each_line(path, [&](const json& j) { out.push_back(from_json(j)); });
  return out;
}

std::vector<SourceItem> read_source(const std::filesystem::path& path) {
  std::vector<SourceItem> out;
  for_each_line(path, [&](const json& j) {
    SourceItem item;
    item.image_id = j.at("image_id").get<std::string>();
    if (j.contains("caption") && !j.at("caption").is_null()) item.caption = j.at("caption").get<std::string>();
    if (j.contains("human_tags")) item.human_tags = j.at("human_tags").get<std::vector<std::string>>();
    out.push_back(std::move(item));
  });
  return out;
}

std::optional<std::string> StubTeacher::caption(const SourceItem&, const detector::RegionSet& regions) const {
  if (fixed_) return fixed_;
  std::vector<std::string> names;
  for (const auto& t : regions.tags) {
    if (std::find(names.begin(), names.end(), t) == names.end()) names.push_back(t);
    if (names.size() == 2) break;
  }
  if (names.empty()) return std::string("a photo");
  if (names.size() == 1) return "a photo of " + names[0];
  return "a photo of " + names[0] + " and " + names[1];
}

std::vector<Tag> DetectorTagger::tags(const SourceItem& item, const detector::RegionSet& regions) const {
  std::vector<Tag> out;
  const std::set<std::string> human(item.human_tags.begin(), item.human_tags.end());
  std::set<std::string> seen;
  for (const auto& t : regions.tags) {
    if (!seen.insert(t).second) continue;
    out.push_back({t, human.count(t) ? TagSource::kHuman : TagSource::kDetector});
  }
  for (const auto& t : item.human_tags)
    if (seen.insert(t).second) out.push_back({t, TagSource::kHuman});
  return out;
}

std::vector<PretrainRecord> ingest_distilled(const std::vector<SourceItem>& source,
                                             const std::map<std::string, detector::RegionSet>& features,
                                             const CaptionProvider& teacher, const TagProvider& tagger,
                                             const IngestOptions& options, IngestReport* report) {
  std::vector<PretrainRecord> out;
  auto skip = [&](const std::string& id, const std::string& why) {
    if (!report) return;
    report->skipped.push_back(id);
    report->log.push_back("skipped " + id + ": " + why);
  };
  for (const auto& item : source) {
    const auto it = features.find(item.image_id);
    if (it == features.end()) {
      skip(item.image_id, "no region features");
      continue;
    }
    PretrainRecord r;
    r.image_id = item.image_id;
    if (options.prefer_ground_truth && item.caption && !item.caption->empty()) {
      r.caption = *item.caption;
      r.caption_source = CaptionSource::kGroundTruth;
    } else {
      auto c = teacher.caption(item, it->second);
      if (!c || c->empty()) {
        skip(item.image_id, "teacher produced no caption");
        continue;
      }
      r.caption = *c;
      r.caption_source = CaptionSource::kTeacher;
    }
    r.tags = tagger.tags(item, it->second);
    r.features = {options.feature_store, item.image_id};
    r.id = record_id(r.image_id, r.caption);
    r.validate();
    out.push_back(std::move(r));
  }
  return out;
}

std::map<std::string, detector::RegionSet> index_regions(std::vector<detector::RegionSet> sets) {
  std::map<std::string, detector::RegionSet> out;
  for (auto& s : sets) {
    const std::string key = s.image_id;
    if (!out.emplace(key, std::move(s)).second) throw std::invalid_argument("duplicate image id '" + key + "' in region store");
  }
  return out;
}

}  // namespace cvl::pretrain
