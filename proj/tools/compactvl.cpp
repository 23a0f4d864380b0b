// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Every verb prints JSON on stdout unless a table
// or markdown format is requested.

#include "compactvl/core/types.hpp"
#include "compactvl/cost/arch_json.hpp"
#include "compactvl/detector/checkpoint.hpp"
#include "compactvl/detector/extract.hpp"
#include "compactvl/detector/weights.hpp"
#include "compactvl/harness/benchmark.hpp"
#include "compactvl/harness/experiment.hpp"
#include "compactvl/harness/reference.hpp"
#include "compactvl/heads/heads.hpp"
#include "compactvl/pretrain/record.hpp"
#include "compactvl/pretrain/synthetic.hpp"
#include "compactvl/pretrain/trainer.hpp"
#include "compactvl/transformer/checkpoint.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace {

using namespace cvl;
using nlohmann::json;
namespace fs = std::filesystem;

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// ------------------------------------------------------------------- cost

json report_json(const cost::CostReport& r) {
  json comps = json::array();
  for (const auto& c : r.components) comps.push_back({{"component", c.name}, {"params", c.params}, {"flops", c.flops}});
  return {{"name", r.name}, {"params", r.total_params()}, {"flops", r.total_flops()}, {"components", comps}};
}

std::string report_table(const cost::CostReport& r) {
  std::ostringstream s;
  s << r.name << "\n" << std::left << std::setw(18) << "component" << std::right << std::setw(12) << "params(M)"
    << std::setw(12) << "FLOPs(B)" << "\n";
  for (const auto& c : r.components)
    s << std::left << std::setw(18) << c.name << std::right << std::setw(12) << fixed(c.params / 1e6, 3)
      << std::setw(12) << fixed(c.flops / 1e9, 3) << "\n";
  s << std::left << std::setw(18) << "total" << std::right << std::setw(12) << fixed(r.total_params() / 1e6, 3)
    << std::setw(12) << fixed(r.total_flops() / 1e9, 3) << "\n";
  return s.str();
}

struct CostArgs {
  std::string config;
  std::optional<Count> regions, tokens, height, width, proposals;
  std::string format = "json";
  std::string baseline;
  std::vector<std::string> configs;
};

cost::CostReport count_with(const cost::ArchConfig& arch, const CostArgs& a) {
  auto input = cost::default_input(arch);
  if (auto* seq = std::get_if<cost::SequenceInput>(&input)) {
    if (a.regions) seq->regions = *a.regions;
    if (a.tokens) seq->text_tokens = *a.tokens;
  } else if (auto* img = std::get_if<cost::ImageInput>(&input)) {
    if (a.height) img->height = *a.height;
    if (a.width) img->width = *a.width;
    if (a.proposals) img->proposals = *a.proposals;
  }
  return cost::count_arch(arch, input);
}

int cost_report(const CostArgs& a) {
  const auto r = count_with(harness::resolve_arch(a.config), a);
  if (a.format == "table") std::cout << report_table(r);
  else emit(report_json(r));
  return 0;
}

int cost_compare(const CostArgs& a) {
  std::vector<cost::CostReport> reports;
  for (const auto& c : a.configs) reports.push_back(count_with(harness::resolve_arch(c), a));
  const auto table = cost::compare(reports, a.baseline);
  if (a.format == "table") {
    std::cout << std::left << std::setw(16) << "name" << std::right << std::setw(12) << "params(M)" << std::setw(12)
              << "FLOPs(B)" << std::setw(10) << "params x" << std::setw(10) << "FLOPs x" << "\n";
    for (const auto& r : table.rows)
      std::cout << std::left << std::setw(16) << r.name << std::right << std::setw(12) << fixed(r.params / 1e6, 3)
                << std::setw(12) << fixed(r.flops / 1e9, 3) << std::setw(10) << fixed(r.params_ratio, 4)
                << std::setw(10) << fixed(r.flops_ratio, 4) << "\n";
    return 0;
  }
  json rows = json::array();
  for (const auto& r : table.rows)
    rows.push_back({{"name", r.name},
                    {"params", r.params},
                    {"flops", r.flops},
                    {"params_ratio", r.params_ratio},
                    {"flops_ratio", r.flops_ratio}});
  emit({{"baseline", table.baseline}, {"rows", rows}});
  return 0;
}

// ------------------------------------------------------------- detection

struct InitArgs {
  std::string detector, transformer, vocab, out;
  std::uint64_t seed = 0;
  std::optional<int> region_dim;
};

int init_weights(const InitArgs& a) {
  Rng rng(a.seed);
  if (!a.detector.empty() == !a.transformer.empty())
    throw ConfigError("init-weights: pass exactly one of --detector or --transformer");
  if (!a.detector.empty()) {
    const auto w = detector::init_detector_weights<float>(harness::resolve_detector(a.detector), rng);
    detector::save_detector(w, a.out);
    emit({{"model", "detector"}, {"config", w.config.name}, {"seed", a.seed}, {"out", a.out}});
    return 0;
  }
  auto config = harness::resolve_transformer(a.transformer);
  if (!a.vocab.empty()) config.vocab_size = transformer::Vocabulary::from_file(a.vocab).size();
  if (a.region_dim) config.region_feature_dim = *a.region_dim;
  const auto w = transformer::init_transformer_weights<float>(config, rng);
  transformer::save_transformer(w, a.out);
  emit({{"model", "transformer"},
        {"config", config.name},
        {"vocab_size", config.vocab_size},
        {"region_feature_dim", config.region_feature_dim},
        {"seed", a.seed},
        {"out", a.out}});
  return 0;
}

struct DetectArgs {
  std::string config = "tee-0", weights, images, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_regions;
};

int detect(const DetectArgs& a) {
  detector::DetectorWeights<float> weights;
  if (!a.weights.empty()) {
    weights = detector::load_detector<float>(a.weights);
  } else if (a.seed) {
    Rng rng(*a.seed);
    weights = detector::init_detector_weights<float>(harness::resolve_detector(a.config), rng);
  } else {
    throw ConfigError("detect: pass --weights, or --seed for random weights");
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.images))
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("detect: no .ppm images in " + a.images);

  detector::ExtractOptions opts;
  opts.max_regions = a.max_regions;
  std::vector<detector::RegionSet> sets;
  json images = json::array();
  for (const auto& f : files) {
    sets.push_back(detector::extract_regions(detector::read_ppm(f), weights, f.stem().string(), opts));
    images.push_back({{"image_id", sets.back().image_id}, {"regions", sets.back().size()}, {"tags", sets.back().tags}});
  }
  detector::write_region_store(a.out, sets);
  emit({{"config", weights.config.name}, {"out", a.out}, {"images", images}});
  return 0;
}

// ------------------------------------------------------------- pretraining

struct IngestArgs {
  std::string source, features, out, teacher_caption;
  bool teacher_only = false;
};

int ingest(const IngestArgs& a) {
  const auto source = pretrain::read_source(a.source);
  const auto regions = pretrain::index_regions(detector::read_region_store(a.features));
  const pretrain::StubTeacher teacher(a.teacher_caption.empty() ? std::nullopt
                                                                : std::optional<std::string>(a.teacher_caption));
  const pretrain::DetectorTagger tagger;
  pretrain::IngestOptions opts;
  opts.prefer_ground_truth = !a.teacher_only;
  opts.feature_store = a.features;
  pretrain::IngestReport report;
  const auto records = pretrain::ingest_distilled(source, regions, teacher, tagger, opts, &report);
  pretrain::write_corpus(a.out, records);
  emit({{"records", records.size()}, {"skipped", report.skipped}, {"log", report.log}, {"out", a.out}});
  return 0;
}

struct PretrainArgs {
  std::string corpus, features, config = "minilm", vocab, out;
  Index steps = 200;
  std::optional<std::uint64_t> seed;
  std::optional<Index> synthetic;
  Index batch_size = 16;
  double lr = 1e-4;
};

int run_pretrain(const PretrainArgs& a) {
  if (!a.seed) throw ConfigError("pretrain: --seed is mandatory");
  std::vector<pretrain::PretrainExample> examples;
  std::optional<transformer::Vocabulary> vocab;
  if (a.synthetic) {
    auto corpus = pretrain::synthetic_corpus(*a.synthetic, 32, *a.seed);
    examples = std::move(corpus.examples);
    vocab = std::move(corpus.vocab);
  } else {
    if (a.corpus.empty() || a.features.empty()) throw ConfigError("pretrain: pass --corpus and --features, or --synthetic");
    const auto records = pretrain::read_corpus(a.corpus);
    examples = pretrain::resolve_examples(records, pretrain::index_regions(detector::read_region_store(a.features)));
    if (examples.empty()) throw ConfigError("pretrain: no record has features in " + a.features);
    if (a.vocab.empty()) {
      std::vector<std::string> texts;
      for (const auto& e : examples) {
        texts.push_back(e.record.caption);
        for (const auto& t : e.record.tag_texts()) texts.push_back(t);
      }
      vocab = transformer::Vocabulary::from_texts(texts);
    }
  }
  if (!a.vocab.empty()) vocab = transformer::Vocabulary::from_file(a.vocab);
  const transformer::WordPieceTokenizer tokenizer(*vocab);

  auto config = harness::resolve_transformer(a.config);
  config.vocab_size = vocab->size();
  config.region_feature_dim = static_cast<int>(examples.front().regions.feature_dim());
  Rng rng(*a.seed);
  auto weights = transformer::init_transformer_weights<float>(config, rng);

  pretrain::PretrainOptions opts;
  opts.batch_size = a.batch_size;
  opts.optimizer.lr = a.lr;
  opts.optimizer.total_steps = a.steps;
  pretrain::Pretrainer<float> trainer(std::move(weights), tokenizer, opts, *a.seed);

  json run_config{{"verb", "pretrain"},      {"corpus", a.corpus}, {"features", a.features},
                  {"config", a.config},      {"steps", a.steps},   {"seed", *a.seed},
                  {"synthetic", a.synthetic ? json(*a.synthetic) : json()},
                  {"batch_size", a.batch_size}, {"lr", a.lr},      {"vocab", a.vocab}};
  const auto dir = harness::prepare_run_dir("pretrain", run_config, *a.seed, 1);
  std::ofstream log(dir / "metrics.jsonl");
  const auto metrics = trainer.train(examples, a.steps, [&](const pretrain::StepMetrics& m) {
    log << json{{"step", m.step}, {"loss", m.loss}, {"mlm", m.mlm}, {"itm", m.itm}, {"lr", m.lr},
                {"grad_norm", m.grad_norm}, {"masked", m.masked}, {"negatives", m.negatives}}
               .dump()
        << "\n";
  });
  const fs::path out = a.out.empty() ? dir / "transformer.cvlt" : fs::path(a.out);
  transformer::save_transformer(trainer.weights(), out);
  fs::path vocab_out = out;
  vocab_out += ".vocab.txt";
  vocab->save(vocab_out);
  json summary{{"run_dir", dir.string()}, {"weights", out.string()}, {"vocab", vocab_out.string()},
               {"examples", examples.size()}, {"steps", metrics.size()}};
  if (!metrics.empty()) {
    summary["first_loss"] = metrics.front().loss;
    summary["last_loss"] = metrics.back().loss;
  }
  emit(summary);
  return 0;
}

// ------------------------------------------------------------ task heads

struct ModelArgs {
  std::string features, weights, vocab, head;
  std::uint64_t seed = 0;
};

struct Loaded {
  transformer::TransformerWeights<float> weights;
  transformer::Vocabulary vocab;
  std::unique_ptr<transformer::WordPieceTokenizer> tokenizer;
  std::vector<detector::RegionSet> sets;
};

Loaded load_model(const ModelArgs& a) {
  if (a.features.empty() || a.weights.empty()) throw ConfigError("pass --features and --weights");
  Loaded m{transformer::load_transformer<float>(a.weights), transformer::Vocabulary(), nullptr, {}};
  fs::path vocab = a.vocab;
  if (vocab.empty()) {
    vocab = a.weights;
    vocab += ".vocab.txt";
  }
  m.vocab = transformer::Vocabulary::from_file(vocab);
  if (m.vocab.size() != m.weights.config.vocab_size)
    throw ConfigError("vocabulary has " + std::to_string(m.vocab.size()) + " tokens but the model expects " +
                      std::to_string(m.weights.config.vocab_size));
  m.tokenizer = std::make_unique<transformer::WordPieceTokenizer>(m.vocab);
  m.sets = detector::read_region_store(a.features);
  return m;
}

std::vector<int> region_tags(const Loaded& m, const detector::RegionSet& rs) {
  pretrain::SourceItem item{rs.image_id, std::nullopt, {}};
  std::vector<std::string> texts;
  for (const auto& t : pretrain::DetectorTagger().tags(item, rs)) texts.push_back(t.text);
  return heads::encode_tags(*m.tokenizer, texts);
}

const detector::RegionSet& find_set(const Loaded& m, const std::string& id) {
  for (const auto& s : m.sets)
    if (s.image_id == id) return s;
  throw ConfigError("no image '" + id + "' in the feature store");
}

template <typename Head>
Head load_head(const std::string& path, Head fallback) {
  if (path.empty()) return fallback;
  const auto archive = TensorArchive::load(path);
  fallback.visit([&](const std::string& name, Matrix<float>& w) {
    Matrix<float> v = archive.get<float>(name);
    if (v.rows() != w.rows() || v.cols() != w.cols()) throw ShapeError("head tensor " + name + " has the wrong shape");
    w = std::move(v);
  });
  return fallback;
}

int caption(const ModelArgs& a, Index max_length, const std::string& image) {
  const auto m = load_model(a);
  heads::CaptionOptions opts;
  opts.max_length = max_length;
  json out = json::array();
  for (const auto& rs : m.sets) {
    if (!image.empty() && rs.image_id != image) continue;
    const auto state = heads::caption_generate(m.weights, m.vocab, rs, region_tags(m, rs), opts);
    out.push_back({{"image_id", rs.image_id},
                   {"caption", m.tokenizer->decode(state.tokens)},
                   {"tokens", state.tokens},
                   {"ended", state.ended}});
  }
  emit(out);
  return 0;
}

int vqa(const ModelArgs& a, const std::string& question, const std::string& image, const std::string& answers_file) {
  const auto m = load_model(a);
  Rng rng(a.seed);
  const auto head = load_head(a.head, heads::VqaHead<float>::init(m.weights.config.hidden, rng));
  std::vector<std::string> answers;
  if (!answers_file.empty()) {
    std::ifstream in(answers_file);
    for (std::string line; std::getline(in, line);) answers.push_back(line);
  }
  const auto q = m.tokenizer->encode(question);
  json out = json::array();
  for (const auto& rs : m.sets) {
    if (!image.empty() && rs.image_id != image) continue;
    const auto p = heads::vqa_predict(m.weights, head, m.vocab, heads::Query{rs, region_tags(m, rs), q});
    const auto idx = static_cast<size_t>(p.answer);
    out.push_back({{"image_id", rs.image_id},
                   {"answer_index", p.answer},
                   {"answer", idx < answers.size() ? answers[idx] : "answer_" + std::to_string(idx)},
                   {"confidence", p.confidence}});
  }
  emit({{"question", question}, {"head", a.head.empty() ? "random:" + std::to_string(a.seed) : a.head}, {"results", out}});
  return 0;
}

int nlvr2(const ModelArgs& a, const std::string& left, const std::string& right, const std::string& statement) {
  const auto m = load_model(a);
  Rng rng(a.seed);
  const auto head = load_head(a.head, heads::Nlvr2Head<float>::init(m.weights.config.hidden, rng));
  const auto& l = find_set(m, left);
  const auto& r = find_set(m, right);
  const auto p = heads::nlvr2_predict(m.weights, head, m.vocab, l, r, region_tags(m, l), region_tags(m, r),
                                      m.tokenizer->encode(statement));
  emit({{"left", left}, {"right", right}, {"statement", statement}, {"label", p.label}, {"confidence", p.confidence}});
  return 0;
}

std::vector<int> parse_ks(const std::string& s) {
  std::vector<int> ks;
  std::stringstream in(s);
  for (std::string part; std::getline(in, part, ',');) {
    const int k = std::stoi(part);
    if (k < 1) throw ConfigError("--k values must be positive");
    ks.push_back(k);
  }
  return ks;
}

int retrieve(const ModelArgs& a, const std::string& captions, const std::string& direction, const std::string& k) {
  auto m = load_model(a);
  if (direction != "t2i" && direction != "i2t") throw ConfigError("--direction must be t2i or i2t");
  const auto ks = parse_ks(k);
  // Captions file: JSON lines {"image_id", "caption"}; each line is one text.
  std::ifstream in(captions);
  if (!in) throw ConfigError("cannot open " + captions);
  std::vector<std::vector<int>> texts;
  std::vector<std::string> raw;
  heads::GroundTruth truth;
  std::map<std::string, Index> image_index;
  for (size_t i = 0; i < m.sets.size(); ++i) image_index[m.sets[i].image_id] = static_cast<Index>(i);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    const auto id = j.at("image_id").get<std::string>();
    const auto it = image_index.find(id);
    if (it == image_index.end()) throw ConfigError("caption for unknown image '" + id + "'");
    truth.emplace_back(it->second, static_cast<Index>(texts.size()));
    raw.push_back(j.at("caption").get<std::string>());
    texts.push_back(m.tokenizer->encode(raw.back()));
  }
  // Images without a caption take no part in either direction.
  std::vector<detector::RegionSet> images;
  std::vector<Index> remap(m.sets.size(), -1);
  for (const auto& [img, txt] : truth)
    if (remap[img] < 0) remap[img] = 0;
  for (size_t i = 0; i < m.sets.size(); ++i)
    if (remap[i] == 0) {
      remap[i] = static_cast<Index>(images.size());
      images.push_back(std::move(m.sets[i]));
    }
  for (auto& [img, txt] : truth) img = remap[img];
  m.sets = std::move(images);
  std::vector<std::vector<int>> tags;
  for (const auto& rs : m.sets) tags.push_back(region_tags(m, rs));
  const auto scores = heads::retrieval_matrix(m.weights, m.vocab, std::span(m.sets), tags, texts);
  const auto dir = direction == "i2t" ? heads::Direction::kImageToText : heads::Direction::kTextToImage;
  const auto results = heads::retrieve(scores, truth, dir, ks);
  json queries = json::array();
  std::map<int, double> recall;
  for (const auto& r : results) {
    json ranked = json::array();
    for (Index c : r.ranked) ranked.push_back(dir == heads::Direction::kImageToText ? json(raw[c]) : json(m.sets[c].image_id));
    queries.push_back({{"query", dir == heads::Direction::kImageToText ? json(m.sets[r.query].image_id) : json(raw[r.query])},
                       {"ranked", ranked}});
    for (const auto& [kk, hit] : r.recall) recall[kk] += hit / static_cast<double>(results.size());
  }
  json rec = json::object();
  for (const auto& [kk, v] : recall) rec["R@" + std::to_string(kk)] = v;
  emit({{"direction", direction}, {"recall", rec}, {"queries", queries}});
  return 0;
}

// ----------------------------------------------------- benchmark/reproduce

int benchmark(const std::string& config_path, std::optional<std::uint64_t> seed) {
  auto config = harness::ExperimentConfig::load(config_path);
  if (seed) config.seed = seed;
  const auto result = harness::run_benchmark(config);
  const auto root = config.output_dir.empty() ? harness::output_root() : config.output_dir;
  const auto dir = harness::prepare_run_dir("benchmark", config.to_json(), *config.seed, config.threads, root);
  const auto j = result.to_json();
  std::ofstream(dir / "benchmark.json") << j.dump(2) << "\n";
  const auto errors = harness::validate_schema(j, harness::benchmark_schema());
  for (const auto& e : errors) std::cerr << "schema: " << e << "\n";
  emit(j);
  return errors.empty() ? 0 : 1;
}

int reproduce(const std::string& target, const std::string& format, const std::string& out) {
  const auto refs = harness::ReferenceValues::load_default();
  std::vector<std::string> targets;
  if (target == "all") targets = harness::reproduction_targets();
  else targets = {target};
  bool ok = true;
  json all = json::array();
  std::string md;
  for (const auto& t : targets) {
    const auto report = harness::reproduce(t, refs);
    ok = ok && report.passed();
    all.push_back(harness::to_json(report));
    md += harness::to_markdown(report);
  }
  if (!out.empty()) harness::run_cost_tables(refs, out);
  if (format == "markdown") std::cout << md;
  else emit(target == "all" ? json{{"passed", ok}, {"tables", all}} : all.front());
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compactvl: compact vision-language pipeline"};
  app.require_subcommand(1);

  CostArgs cost_args;
  auto* cost_cmd = app.add_subcommand("cost", "Parameter and FLOP accounting");
  cost_cmd->require_subcommand(1);
  auto add_inputs = [&](CLI::App* c) {
    c->add_option("--regions", cost_args.regions, "Transformer regions (default 50)");
    c->add_option("--tokens", cost_args.tokens, "Transformer text tokens (default 35)");
    c->add_option("--height", cost_args.height, "Detector input height");
    c->add_option("--width", cost_args.width, "Detector input width");
    c->add_option("--proposals", cost_args.proposals, "RoIs fed to the box head");
    c->add_option("--format", cost_args.format)->check(CLI::IsMember({"table", "json"}));
  };
  auto* report_cmd = cost_cmd->add_subcommand("report", "Cost of one architecture");
  report_cmd->add_option("--config", cost_args.config, "Preset name or architecture JSON")->required();
  add_inputs(report_cmd);
  auto* compare_cmd = cost_cmd->add_subcommand("compare", "Ratios against a baseline");
  compare_cmd->add_option("--baseline", cost_args.baseline, "Baseline report name");
  compare_cmd->add_option("configs", cost_args.configs, "Presets or architecture JSON files")->required();
  add_inputs(compare_cmd);

  InitArgs init_args;
  auto* init_cmd = app.add_subcommand("init-weights", "Write a seeded random checkpoint");
  init_cmd->add_option("--detector", init_args.detector, "Detector preset or JSON");
  init_cmd->add_option("--transformer", init_args.transformer, "Transformer preset or JSON");
  init_cmd->add_option("--vocab", init_args.vocab, "Vocabulary file; sets the vocabulary size");
  init_cmd->add_option("--region-dim", init_args.region_dim, "Region feature width");
  init_cmd->add_option("--seed", init_args.seed)->required();
  init_cmd->add_option("--out", init_args.out)->required();

  DetectArgs detect_args;
  auto* detect_cmd = app.add_subcommand("detect", "Extract region features from PPM images");
  detect_cmd->add_option("--config", detect_args.config, "Detector preset or JSON (used with --seed)");
  detect_cmd->add_option("--weights", detect_args.weights, "Detector checkpoint");
  detect_cmd->add_option("--seed", detect_args.seed, "Random weights when no checkpoint is given");
  detect_cmd->add_option("--images", detect_args.images)->required()->check(CLI::ExistingDirectory);
  detect_cmd->add_option("--out", detect_args.out, "Region store")->required();
  detect_cmd->add_option("--max-regions", detect_args.max_regions);

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "Build a distilled pre-training corpus");
  ingest_cmd->add_option("--source", ingest_args.source, "JSON lines of image_id, caption, human_tags")
      ->required()
      ->check(CLI::ExistingFile);
  ingest_cmd->add_option("--features", ingest_args.features)->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--out", ingest_args.out)->required();
  ingest_cmd->add_option("--teacher-caption", ingest_args.teacher_caption, "Fixed caption from the stub teacher");
  ingest_cmd->add_flag("--teacher-only", ingest_args.teacher_only, "Ignore source captions");

  PretrainArgs pre_args;
  auto* pre_cmd = app.add_subcommand("pretrain", "MLM + ITM pre-training");
  pre_cmd->add_option("--corpus", pre_args.corpus);
  pre_cmd->add_option("--features", pre_args.features);
  pre_cmd->add_option("--synthetic", pre_args.synthetic, "Train on N synthetic images instead");
  pre_cmd->add_option("--config", pre_args.config, "Transformer preset or JSON");
  pre_cmd->add_option("--vocab", pre_args.vocab, "Vocabulary file (default: built from the corpus)");
  pre_cmd->add_option("--steps", pre_args.steps);
  pre_cmd->add_option("--seed", pre_args.seed)->required();
  pre_cmd->add_option("--batch-size", pre_args.batch_size);
  pre_cmd->add_option("--lr", pre_args.lr);
  pre_cmd->add_option("--out", pre_args.out, "Checkpoint path (default: in the run directory)");

  ModelArgs model_args;
  auto add_model = [&](CLI::App* c) {
    c->add_option("--features", model_args.features, "Region store")->required();
    c->add_option("--weights", model_args.weights, "Transformer checkpoint")->required();
    c->add_option("--vocab", model_args.vocab, "Vocabulary (default: <weights>.vocab.txt)");
  };
  auto add_head = [&](CLI::App* c) {
    c->add_option("--head", model_args.head, "Head checkpoint (default: seeded random head)");
    c->add_option("--seed", model_args.seed);
  };

  Index max_length = 20;
  std::string image;
  auto* caption_cmd = app.add_subcommand("caption", "Greedy captioning");
  add_model(caption_cmd);
  caption_cmd->add_option("--max-length", max_length);
  caption_cmd->add_option("--image", image, "Only this image id");

  std::string question, answers;
  auto* vqa_cmd = app.add_subcommand("vqa", "Visual question answering");
  add_model(vqa_cmd);
  add_head(vqa_cmd);
  vqa_cmd->add_option("--question", question)->required();
  vqa_cmd->add_option("--image", image, "Only this image id");
  vqa_cmd->add_option("--answers", answers, "Answer labels, one per line");

  std::string left, right, statement;
  auto* nlvr2_cmd = app.add_subcommand("nlvr2", "Statement over an image pair");
  add_model(nlvr2_cmd);
  add_head(nlvr2_cmd);
  nlvr2_cmd->add_option("--left", left)->required();
  nlvr2_cmd->add_option("--right", right)->required();
  nlvr2_cmd->add_option("--statement", statement)->required();

  std::string captions, direction = "t2i", k = "1,5,10";
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Image-text retrieval");
  add_model(retrieve_cmd);
  retrieve_cmd->add_option("--captions", captions, "JSON lines of image_id and caption")->required();
  retrieve_cmd->add_option("--direction", direction)->check(CLI::IsMember({"t2i", "i2t"}));
  retrieve_cmd->add_option("--k", k, "Comma-separated recall cut-offs");

  std::string bench_config;
  std::optional<std::uint64_t> bench_seed;
  auto* bench_cmd = app.add_subcommand("benchmark", "Timed pipeline run");
  bench_cmd->add_option("--config", bench_config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--seed", bench_seed, "Overrides the config seed");

  std::string target, format = "json", out;
  auto* repro_cmd = app.add_subcommand("reproduce", "Compare cost tables against reference values");
  repro_cmd->add_option("target", target, "table1, table2, table3, table4, table8 or all")->required();
  repro_cmd->add_option("--format", format)->check(CLI::IsMember({"json", "markdown"}));
  repro_cmd->add_option("--out", out, "Also write every table under this directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report_cmd->parsed()) return cost_report(cost_args);
    if (compare_cmd->parsed()) return cost_compare(cost_args);
    if (init_cmd->parsed()) return init_weights(init_args);
    if (detect_cmd->parsed()) return detect(detect_args);
    if (ingest_cmd->parsed()) return ingest(ingest_args);
    if (pre_cmd->parsed()) return run_pretrain(pre_args);
    if (caption_cmd->parsed()) return caption(model_args, max_length, image);
    if (vqa_cmd->parsed()) return vqa(model_args, question, image, answers);
    if (nlvr2_cmd->parsed()) return nlvr2(model_args, left, right, statement);
    if (retrieve_cmd->parsed()) return retrieve(model_args, captions, direction, k);
    if (bench_cmd->parsed()) return benchmark(bench_config, bench_seed);
    if (repro_cmd->parsed()) return reproduce(target, format, out);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 2;
  }
  return 0;
}
