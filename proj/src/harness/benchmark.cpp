// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/harness/benchmark.hpp"

#include "compactvl/core/mac_counter.hpp"
#include "compactvl/core/random.hpp"
#include "compactvl/cost/arch_json.hpp"
#include "compactvl/detector/extract.hpp"
#include "compactvl/detector/weights.hpp"
#include "compactvl/harness/reference.hpp"
#include "compactvl/heads/heads.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

namespace cvl::harness {

using nlohmann::json;

namespace {

// Special tokens, the detector's class names, then filler words up to the
// transformer's vocabulary size.
transformer::Vocabulary benchmark_vocabulary(const detector::DetectorConfig& det, int size) {
  std::vector<std::string> words;
  const int room = size - 5;
  for (int c = 1; c <= det.num_classes && static_cast<int>(words.size()) < room; ++c) words.push_back(det.class_name(c));
  for (int i = 0; static_cast<int>(words.size()) < room; ++i) words.push_back("w" + std::to_string(i));
  transformer::Vocabulary vocab(words);
  if (vocab.size() != size) throw ConfigError("benchmark: cannot build a vocabulary of size " + std::to_string(size));
  return vocab;
}

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

ModelCost model_cost(const cost::ArchConfig& arch) {
  const auto report = cost::count_arch(arch);
  return {report.name, report.total_params(), report.total_flops()};
}

}  // namespace

cost::ArchConfig resolve_arch(const std::string& ref) {
  const std::filesystem::path p(ref);
  if (p.extension() != ".json") return cost::arch_preset(ref);
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open architecture file " + ref);
  try {
    return cost::arch_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError(ref + ": " + e.what());
  }
}

detector::DetectorConfig resolve_detector(const std::string& ref) {
  auto arch = resolve_arch(ref);
  if (auto* c = std::get_if<detector::DetectorConfig>(&arch)) return *c;
  throw ConfigError("'" + ref + "' is not a detector architecture");
}

transformer::TransformerConfig resolve_transformer(const std::string& ref) {
  auto arch = resolve_arch(ref);
  if (auto* c = std::get_if<transformer::TransformerConfig>(&arch)) return *c;
  throw ConfigError("'" + ref + "' is not a transformer architecture");
}

double StageTiming::mean_ms() const {
  if (samples_ms.empty()) return 0.0;
  return std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / static_cast<double>(samples_ms.size());
}

double StageTiming::std_ms() const {
  if (samples_ms.size() < 2) return 0.0;
  const double m = mean_ms();
  double ss = 0.0;
  for (double v : samples_ms) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(samples_ms.size() - 1));
}

const StageTiming& BenchmarkResult::stage(const std::string& name) const {
  for (const auto& s : stages)
    if (s.name == name) return s;
  throw std::out_of_range("no benchmark stage '" + name + "'");
}

json BenchmarkResult::to_json() const {
  json st = json::array();
  for (const auto& s : stages)
    st.push_back({{"name", s.name},
                  {"mean_ms", s.mean_ms()},
                  {"std_ms", s.std_ms()},
                  {"samples_ms", s.samples_ms},
                  {"macs", s.macs}});
  auto mc = [](const ModelCost& c) { return json{{"name", c.name}, {"params", c.params}, {"flops", c.flops}}; };
  return {{"config_hash", config_hash},
          {"seed", seed},
          {"repetitions", repetitions},
          {"threads", threads},
          {"task", task},
          {"images", images},
          {"stages", st},
          {"cost",
           {{"detector", mc(detector)},
            {"transformer", mc(transformer)},
            {"total_params", detector.params + transformer.params},
            {"total_flops", detector.flops + transformer.flops}}},
          {"fingerprint", fingerprint}};
}

BenchmarkResult run_benchmark(const ExperimentConfig& config) {
  config.validate();
  using transformer::Task;
  if (config.task == Task::kPretrainMlm)
    throw ConfigError("benchmark tasks: pretrain-itm, caption, vqa, nlvr2, retrieval");

  const auto det_config = resolve_detector(config.detector);
  auto tf_config = resolve_transformer(config.transformer);
  tf_config.region_feature_dim = det_config.feature_dim;
  tf_config.validate();
  Eigen::setNbThreads(config.threads);

  const std::uint64_t seed = *config.seed;
  Rng rng(seed);
  const auto det_weights = detector::init_detector_weights<float>(det_config, rng);
  const auto tf_weights = transformer::init_transformer_weights<float>(tf_config, rng);
  const auto vqa_head = heads::VqaHead<float>::init(tf_config.hidden, rng);
  const auto nlvr2_head = heads::Nlvr2Head<float>::init(tf_config.hidden, rng);
  const auto vocab = benchmark_vocabulary(det_config, tf_config.vocab_size);
  const transformer::WhitespaceTokenizer tokenizer(vocab);

  std::vector<detector::Image> images;
  std::vector<std::string> image_ids;
  for (const auto& p : config.inputs) {
    images.push_back(detector::read_ppm(p));
    image_ids.push_back(p.stem().string());
  }
  if (images.empty()) {
    images.push_back(detector::synthetic_image(det_config.input_size, det_config.input_size, seed));
    image_ids.push_back("synthetic");
  }

  // 33 words plus [CLS] and [SEP]: the 35-token text budget.
  std::vector<int> sentence(33);
  std::uniform_int_distribution<int> word(5, vocab.size() - 1);
  for (int& id : sentence) id = word(rng);

  const std::vector<int> fusion_sentence = config.task == Task::kCaption ? std::vector<int>{} : sentence;

  BenchmarkResult r;
  r.config_hash = config.hash();
  r.seed = seed;
  r.repetitions = config.repetitions;
  r.threads = config.threads;
  r.task = std::string(transformer::to_string(config.task));
  r.images = static_cast<int>(images.size());
  r.stages = {{"feature_extraction", {}, 0}, {"fusion_forward", {}, 0}, {"task_head", {}, 0}};
  r.detector = model_cost(det_config);
  r.transformer = model_cost(tf_config);
  r.fingerprint = environment_fingerprint(config.threads);

  const auto n = images.size();
  for (int rep = 0; rep < config.repetitions; ++rep) {
    std::vector<detector::RegionSet> regions;
    std::vector<std::vector<int>> tags;
    {
      MacCountScope macs;
      Timer t;
      for (size_t i = 0; i < n; ++i) regions.push_back(detector::extract_regions(images[i], det_weights, image_ids[i]));
      r.stages[0].samples_ms.push_back(t.elapsed_ms());
      r.stages[0].macs = macs.total();
    }
    for (const auto& rs : regions) tags.push_back(heads::encode_tags(tokenizer, rs.tags));

    std::vector<transformer::TransformerOutput<float>> outputs;
    std::vector<transformer::TransformerOutput<float>> partners;
    {
      MacCountScope macs;
      Timer t;
      for (size_t i = 0; i < n; ++i) {
        const auto input = transformer::assemble_input(regions[i], tags[i], fusion_sentence, config.task, vocab, tf_config);
        outputs.push_back(transformer::forward(tf_weights, input));
        if (config.task == Task::kNlvr2) {
          const size_t j = (i + 1) % n;
          const auto other = transformer::assemble_input(regions[j], tags[j], sentence, Task::kNlvr2, vocab, tf_config);
          partners.push_back(transformer::forward(tf_weights, other));
        }
      }
      r.stages[1].samples_ms.push_back(t.elapsed_ms());
      r.stages[1].macs = macs.total();
    }

    {
      MacCountScope macs;
      Timer t;
      double sink = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const auto& out = outputs[i];
        switch (config.task) {
          case Task::kCaption: {
            heads::CaptionOptions opts;
            opts.max_length = config.caption_max_length;
            sink += static_cast<double>(heads::caption_generate(tf_weights, vocab, regions[i], tags[i], opts).tokens.size());
            break;
          }
          case Task::kVqa: {
            const Vector<float> logits = heads::vqa_logits(vqa_head, out.pooled);
            sink += static_cast<double>(heads::argmax_lowest(logits));
            break;
          }
          case Task::kNlvr2: {
            const Index d = out.pooled.cols();
            const float logit = (nlvr2_head.weight.leftCols(d).cwiseProduct(out.pooled).sum() +
                                 nlvr2_head.weight.rightCols(d).cwiseProduct(partners[i].pooled).sum()) +
                                nlvr2_head.bias(0, 0);
            sink += 1.0 / (1.0 + std::exp(-static_cast<double>(logit)));
            break;
          }
          default: {
            const double margin = static_cast<double>(out.itm_logits(0, 1)) - out.itm_logits(0, 0);
            sink += 1.0 / (1.0 + std::exp(-margin));
            break;
          }
        }
      }
      r.stages[2].samples_ms.push_back(t.elapsed_ms());
      r.stages[2].macs = macs.total();
      if (!std::isfinite(sink)) throw NumericalError("benchmark: non-finite task head output");
    }
  }
  return r;
}

json benchmark_schema() {
  const auto path = data_dir() / "benchmark_result.schema.json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

namespace {

bool has_type(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  return false;
}

void check(const json& v, const json& s, const json& root, const std::string& at, std::vector<std::string>& errors) {
  if (s.contains("$ref")) {
    const auto ref = s.at("$ref").get<std::string>();
    if (!ref.starts_with("#")) throw ConfigError("schema: only local references are supported");
    check(v, root.at(json::json_pointer(ref.substr(1))), root, at, errors);
    return;
  }
  const std::string where = at.empty() ? "/" : at;
  if (s.contains("type") && !has_type(v, s.at("type").get<std::string>())) {
    errors.push_back(where + ": expected " + s.at("type").get<std::string>());
    return;
  }
  if (s.contains("enum") && std::find(s.at("enum").begin(), s.at("enum").end(), v) == s.at("enum").end())
    errors.push_back(where + ": value " + v.dump() + " not in enum");
  if (s.contains("minimum") && v.is_number() && v.get<double>() < s.at("minimum").get<double>())
    errors.push_back(where + ": below minimum " + s.at("minimum").dump());
  if (v.is_object()) {
    if (s.contains("required"))
      for (const auto& key : s.at("required"))
        if (!v.contains(key.get<std::string>())) errors.push_back(where + ": missing '" + key.get<std::string>() + "'");
    const json props = s.value("properties", json::object());
    const bool closed = s.contains("additionalProperties") && s.at("additionalProperties") == false;
    for (const auto& [key, value] : v.items()) {
      if (props.contains(key)) check(value, props.at(key), root, at + "/" + key, errors);
      else if (closed) errors.push_back(where + ": unexpected '" + key + "'");
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s.at("minItems").get<size_t>())
      errors.push_back(where + ": fewer than " + s.at("minItems").dump() + " items");
    if (s.contains("items"))
      for (size_t i = 0; i < v.size(); ++i) check(v[i], s.at("items"), root, at + "/" + std::to_string(i), errors);
  }
}

}  // namespace

std::vector<std::string> validate_schema(const json& instance, const json& schema) {
  std::vector<std::string> errors;
  check(instance, schema, schema, "", errors);
  return errors;
}

}  // namespace cvl::harness
