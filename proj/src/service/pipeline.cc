#include "instasent/service/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "instasent/analytics/analytics.h"
#include "instasent/analytics/atlas.h"
#include "instasent/common/checkpoint.h"
#include "instasent/common/digest.h"
#include "instasent/common/error.h"
#include "instasent/common/rng.h"
#include "instasent/corpus/annotation_store.h"
#include "instasent/corpus/clean.h"
#include "instasent/corpus/fixture.h"
#include "instasent/corpus/post_io.h"
#include "instasent/image_model/cnn.h"
#include "instasent/preprocess/enrich.h"
#include "instasent/preprocess/providers.h"
#include "instasent/service/manifest.h"

namespace instasent::service {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr std::uint64_t kSplitSalt = 0x5b1175b1175b1175ULL;

std::string Number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<corpus::PostRecord> LoadCleanPosts(const PipelineConfig& config) {
  const auto path = Layout(config).CleanPosts();
  if (!fs::exists(path)) throw ConfigError("no cleaned corpus at " + path.string() + "; run clean first");
  auto result = corpus::Ingest(path, corpus::PostFormat::kRecordPerLine);
  if (!result.errors.empty())
    throw ConfigError(path.string() + ":" + std::to_string(result.errors.front().line) + ": " +
                      result.errors.front().message);
  return std::move(result.posts);
}

std::map<std::string, std::string> LoadCaptions(const PipelineConfig& config, bool required) {
  const auto path = Layout(config).Captions();
  std::map<std::string, std::string> out;
  if (!fs::exists(path)) {
    if (required) throw ConfigError("no enriched captions at " + path.string() + "; run enrich first");
    return out;
  }
  for (auto& c : preprocess::ParseEnriched(ReadFileBytes(path))) out[c.post_id] = std::move(c.final_text);
  return out;
}

std::vector<corpus::Annotation> LoadAnnotations(const PipelineConfig& config) {
  return corpus::AnnotationStore(config.annotations).LoadEffective();
}

void AddIfExists(RunManifest& m, const PipelineConfig& config, const fs::path& path) {
  if (fs::exists(path)) m.AddInput(config, path);
}

std::string Flat(std::string text) {
  std::replace_if(text.begin(), text.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
  return text;
}

int ParseLabel(const std::string& text, const fs::path& path, int line_no) {
  auto c = corpus::ClassFromInt(std::atoll(text.c_str()));
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos || !c)
    throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": label must be 1-5");
  return corpus::ToInt(*c);
}

// "<label>\t<text>" lines; Random rows are skipped.
std::vector<std::pair<int, std::string>> ReadLabeledText(const fs::path& path) {
  std::istringstream in(ReadFileBytes(path));
  std::vector<std::pair<int, std::string>> out;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected label<TAB>text");
    const int label = ParseLabel(line.substr(0, tab), path, line_no);
    if (label == corpus::ToInt(corpus::SentimentClass::kRandom)) continue;
    out.emplace_back(label - 1, line.substr(tab + 1));
  }
  return out;
}

// "<image path>\t<label>" lines, paths relative to the manifest.
std::vector<image_model::LabeledMaps> ReadLabeledImages(const fs::path& path, const image_model::Shape& input) {
  std::istringstream in(ReadFileBytes(path));
  std::vector<image_model::LabeledMaps> out;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected path<TAB>label");
    const int label = ParseLabel(line.substr(tab + 1), path, line_no);
    if (label == corpus::ToInt(corpus::SentimentClass::kRandom)) continue;
    const auto image = DecodeMediaFile(path.parent_path() / line.substr(0, tab));
    out.push_back({image_model::ImageToMaps(ResizeNearest(image, input.width, input.height)), label - 1});
  }
  return out;
}

std::string HistoryCsv(const std::vector<std::pair<std::string, std::vector<std::array<double, 3>>>>& stages) {
  std::string out = "stage,epoch,loss,accuracy\n";
  for (const auto& [stage, rows] : stages)
    for (const auto& r : rows)
      out += stage + "," + std::to_string(static_cast<int>(r[0])) + "," + Number(r[1]) + "," + Number(r[2]) + "\n";
  return out;
}

template <typename Result>
std::vector<std::array<double, 3>> HistoryRows(const Result& result) {
  std::vector<std::array<double, 3>> rows;
  rows.push_back({0, result.initial_loss, std::nan("")});
  for (const auto& e : result.history) rows.push_back({double(e.epoch), e.loss, e.accuracy});
  return rows;
}

std::vector<text_model::Example> TextExamples(const std::vector<LabeledPost>& posts,
                                              const std::map<std::string, std::string>& captions,
                                              const text_model::Vocabulary& vocab, std::size_t max_len) {
  std::vector<text_model::Example> out;
  for (const auto& lp : posts) {
    if (!corpus::IsTrainingClass(lp.label.caption_class)) continue;
    auto it = captions.find(lp.post.post_id);
    if (it == captions.end()) throw ConfigError("no enriched caption for post " + lp.post.post_id + "; rerun enrich");
    out.push_back({text_model::Tokenize(it->second, vocab, max_len), corpus::TrainingIndex(lp.label.caption_class)});
  }
  return out;
}

std::vector<image_model::LabeledMaps> ImageExamples(const std::vector<LabeledPost>& posts,
                                                    const PipelineConfig& config,
                                                    const image_model::Shape& input) {
  std::vector<image_model::LabeledMaps> out;
  for (const auto& lp : posts) {
    if (!corpus::IsTrainingClass(lp.label.image_class)) continue;
    const auto frame = preprocess::FirstFrame(config.media_root / lp.post.media_path.value_or(""));
    out.push_back({image_model::ImageToMaps(ResizeNearest(frame, input.width, input.height)),
                   corpus::TrainingIndex(lp.label.image_class)});
  }
  return out;
}

ordered_json EvaluationNode(const std::optional<SplitEvaluation>& s) {
  if (!s) return nullptr;
  ordered_json o;
  o["heldout_count"] = s->count;
  o["accuracy"] = s->evaluation.accuracy;
  auto rows = ordered_json::array();
  const auto& m = s->evaluation.confusion;
  for (int t = 0; t < m.num_classes(); ++t) {
    auto row = ordered_json::array();
    for (int p = 0; p < m.num_classes(); ++p) row.push_back(m.at(t, p));
    rows.push_back(row);
  }
  o["confusion"] = rows;
  return o;
}

}  // namespace

Rgb8Image ResizeNearest(const Rgb8Image& image, int width, int height) {
  if (image.width == width && image.height == height) return image;
  if (image.width <= 0 || image.height <= 0) throw CorruptMediaError("empty image");
  Rgb8Image out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const auto* p = image.at(static_cast<int>(static_cast<long long>(x) * image.width / width),
                               static_cast<int>(static_cast<long long>(y) * image.height / height));
      out.set(x, y, p[0], p[1], p[2]);
    }
  return out;
}

corpus::PostFormat PostsFormat(const PipelineConfig& config) {
  return config.posts_format == "tsv" ? corpus::PostFormat::kDelimited : corpus::PostFormat::kRecordPerLine;
}

fs::path RunFixture(const FixtureOptions& options) {
  if (options.n < 1 || options.captions < 0 || options.images < 0)
    throw ArgumentError("fixture sizes must be positive");
  const fs::path dir = fs::absolute(options.out_dir).lexically_normal();
  const auto fx = corpus::GenerateFixture(options.seed, options.n);
  corpus::WriteFixture(fx, dir);

  fs::create_directories(dir / "pretrain" / "images");
  std::string text;
  for (const auto& c : corpus::GenerateLabeledCaptions(options.seed, options.captions))
    text += std::to_string(corpus::ToInt(c.label)) + "\t" + Flat(c.text) + "\n";
  WriteFileBytes(dir / "pretrain" / "captions.tsv", text);
  std::string manifest;
  const auto images = corpus::GenerateLabeledImages(options.seed, options.images);
  for (size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "images/%05zu.png", i);
    WritePng(dir / "pretrain" / name, images[i].image);
    manifest += std::string(name) + "\t" + std::to_string(corpus::ToInt(images[i].label)) + "\n";
  }
  WriteFileBytes(dir / "pretrain" / "images.tsv", manifest);

  const auto config_path = dir / "pipeline.conf";
  WriteFileBytes(config_path, "# instasent fixture --seed " + std::to_string(options.seed) + " --n " +
                                  std::to_string(options.n) +
                                  "\n"
                                  "seed = " + std::to_string(options.seed) +
                                  "\n"
                                  "posts = posts.jsonl\n"
                                  "media_root = .\n"
                                  "annotations = annotations.jsonl\n"
                                  "output_dir = out\n"
                                  "pretrain_text = pretrain/captions.tsv\n"
                                  "pretrain_images = pretrain/images.tsv\n"
                                  "ocr = sidecar\n"
                                  "subtitle = sidecar\n"
                                  "translation = stub\n");
  const auto config = LoadConfig(config_path);
  auto m = StartManifest(config, "fixture");
  for (const auto& p : {dir / "posts.jsonl", dir / "annotations.jsonl", dir / "media",
                        dir / "pretrain" / "captions.tsv", dir / "pretrain" / "images.tsv",
                        dir / "pretrain" / "images", config_path})
    m.AddOutput(config, p);
  WriteManifest(config, m);
  return config_path;
}

void RunIngest(const PipelineConfig& config) {
  const Layout out(config);
  const auto result = corpus::Ingest(config.posts, PostsFormat(config));
  fs::create_directories(out.IngestedPosts().parent_path());
  corpus::ExportPosts(out.IngestedPosts(), result.posts, corpus::PostFormat::kRecordPerLine);
  std::string errors = "line\tmessage\n";
  for (const auto& e : result.errors) errors += std::to_string(e.line) + "\t" + Flat(e.message) + "\n";
  WriteFileBytes(out.IngestErrors(), errors);

  auto m = StartManifest(config, "ingest");
  m.AddInput(config, config.posts);
  m.AddOutput(config, out.IngestedPosts());
  m.AddOutput(config, out.IngestErrors());
  WriteManifest(config, m);
}

corpus::CleanReport RunClean(const PipelineConfig& config) {
  const Layout out(config);
  const auto ingested = corpus::Ingest(config.posts, PostsFormat(config));
  const auto result = corpus::Clean(ingested.posts, config.media_root);
  fs::create_directories(out.CleanPosts().parent_path());
  corpus::ExportPosts(out.CleanPosts(), result.posts, corpus::PostFormat::kRecordPerLine);
  const auto& r = result.report;
  ordered_json report;
  report["unparseable_rows"] = ingested.errors.size();
  report["input_count"] = r.input_count;
  report["removed_duplicates"] = r.removed_duplicates;
  report["removed_incomplete"] = r.removed_incomplete;
  report["removed_corrupted"] = r.removed_corrupted;
  report["output_count"] = r.output_count;
  WriteFileBytes(out.CleanReport(), report.dump(2) + "\n");
  std::string warnings;
  for (const auto& w : result.warnings) warnings += Flat(w) + "\n";
  WriteFileBytes(out.CleanWarnings(), warnings);

  auto m = StartManifest(config, "clean");
  m.AddInput(config, config.posts);
  m.AddInput(config, config.media_root);
  m.AddOutput(config, out.CleanPosts());
  m.AddOutput(config, out.CleanReport());
  m.AddOutput(config, out.CleanWarnings());
  WriteManifest(config, m);
  return r;
}

void RunEnrich(const PipelineConfig& config) {
  const Layout out(config);
  const auto posts = LoadCleanPosts(config);
  preprocess::ProviderSet providers{preprocess::MakeOcrProvider(config.ocr),
                                    preprocess::MakeSubtitleProvider(config.subtitle),
                                    preprocess::MakeTranslationProvider(config.translation)};
  std::vector<preprocess::EnrichedCaption> captions;
  captions.reserve(posts.size());
  for (const auto& p : posts) captions.push_back(preprocess::Enrich(p, providers, config.media_root));
  fs::create_directories(out.Captions().parent_path());
  WriteFileBytes(out.Captions(), preprocess::SerializeEnriched(captions));

  auto m = StartManifest(config, "enrich");
  m.AddInput(config, out.CleanPosts());
  m.AddInput(config, config.media_root);
  m.AddOutput(config, out.Captions());
  WriteManifest(config, m);
}

PostSplit SplitLabeledPosts(const PipelineConfig& config) {
  const auto posts = LoadCleanPosts(config);
  std::map<std::string, const corpus::PostRecord*> by_id;
  for (const auto& p : posts) by_id[p.post_id] = &p;
  std::vector<corpus::Annotation> scoped;
  for (const auto& a : LoadAnnotations(config))
    if (by_id.count(a.post_id)) scoped.push_back(a);
  std::vector<LabeledPost> labeled;
  for (const auto& a : corpus::OnePerPost(scoped)) labeled.push_back({*by_id.at(a.post_id), a});

  Rng rng(config.seed ^ kSplitSalt);
  rng.Shuffle(labeled);
  const auto held = static_cast<size_t>(std::llround(config.holdout * static_cast<double>(labeled.size())));
  PostSplit split;
  split.heldout.assign(labeled.begin(), labeled.begin() + held);
  split.train.assign(labeled.begin() + held, labeled.end());
  return split;
}

void RunTrainText(const PipelineConfig& config, const TextTrainOptions& options) {
  const Layout out(config);
  const auto split = SplitLabeledPosts(config);
  const auto captions = LoadCaptions(config, true);
  auto m = StartManifest(config, "train-text");
  m.AddInput(config, out.CleanPosts());
  m.AddInput(config, out.Captions());
  AddIfExists(m, config, config.annotations);

  text_model::Vocabulary vocab;
  std::optional<text_model::AttentionLstmParams> start;
  std::vector<std::pair<std::string, std::vector<std::array<double, 3>>>> history;
  fs::create_directories(out.TextModel().parent_path());

  if (options.init) {
    auto loaded = text_model::FromCheckpoint(LoadCheckpoint(*options.init));
    start = std::move(loaded.first);
    vocab = std::move(loaded.second);
    m.AddInput(config, *options.init);
  } else {
    std::vector<std::pair<int, std::string>> pretrain;
    if (config.pretrain_text && config.text_pretrain_epochs > 0) {
      pretrain = ReadLabeledText(*config.pretrain_text);
      m.AddInput(config, *config.pretrain_text);
    }
    std::vector<std::string> texts;
    for (const auto& [label, text] : pretrain) texts.push_back(text);
    for (const auto& lp : split.train)
      if (auto it = captions.find(lp.post.post_id); it != captions.end()) texts.push_back(it->second);
    vocab = text_model::Vocabulary::Build(texts);
    if (!pretrain.empty()) {
      std::vector<text_model::Example> corpus;
      for (const auto& [label, text] : pretrain)
        corpus.push_back({text_model::Tokenize(text, vocab, config.text.max_len), label});
      auto cfg = config.text;
      cfg.epochs = config.text_pretrain_epochs;
      cfg.frozen = text_model::FrozenSet::kNone;
      const text_model::ModelDims dims{vocab.size(), config.text_dim, config.text_dim, config.text_dim};
      auto result = text_model::Train(corpus, cfg, dims, std::nullopt);
      SaveCheckpoint(out.TextPretrain(), text_model::ToCheckpoint(result.params, vocab));
      m.AddOutput(config, out.TextPretrain());
      history.emplace_back("pretrain", HistoryRows(result));
      start = std::move(result.params);
    }
  }

  auto cfg = config.text;
  if (options.frozen) cfg.frozen = *options.frozen;
  const auto examples = TextExamples(split.train, captions, vocab, cfg.max_len);
  const text_model::ModelDims dims =
      start ? start->dims() : text_model::ModelDims{vocab.size(), config.text_dim, config.text_dim, config.text_dim};
  auto result = text_model::Train(examples, cfg, dims, start);
  history.emplace_back("finetune", HistoryRows(result));
  SaveCheckpoint(out.TextModel(), text_model::ToCheckpoint(result.params, vocab));
  WriteFileBytes(out.TextHistory(), HistoryCsv(history));
  m.AddOutput(config, out.TextModel());
  m.AddOutput(config, out.TextHistory());
  WriteManifest(config, m);
}

void RunTrainImage(const PipelineConfig& config, const ImageTrainOptions& options) {
  const Layout out(config);
  const auto split = SplitLabeledPosts(config);
  auto m = StartManifest(config, "train-image");
  m.AddInput(config, out.CleanPosts());
  m.AddInput(config, config.media_root);
  AddIfExists(m, config, config.annotations);

  auto spec = image_model::CnnSpec::DeskDefault();
  std::optional<image_model::CnnParams> start;
  std::vector<std::pair<std::string, std::vector<std::array<double, 3>>>> history;
  fs::create_directories(out.ImageModel().parent_path());

  if (options.init) {
    auto loaded = image_model::FromCheckpoint(LoadCheckpoint(*options.init));
    spec = std::move(loaded.first);
    start = std::move(loaded.second);
    m.AddInput(config, *options.init);
  } else if (config.pretrain_images && config.image_pretrain_epochs > 0) {
    m.AddInput(config, *config.pretrain_images);
    const auto corpus = ReadLabeledImages(*config.pretrain_images, spec.input);
    auto cfg = config.image;
    cfg.epochs = config.image_pretrain_epochs;
    spec.frozen_prefix = 0;
    auto result = image_model::FineTune(corpus, spec, cfg, std::nullopt);
    SaveCheckpoint(out.ImagePretrain(), image_model::ToCheckpoint(spec, result.params));
    m.AddOutput(config, out.ImagePretrain());
    history.emplace_back("pretrain", HistoryRows(result));
    start = std::move(result.params);
  }

  spec.frozen_prefix = options.frozen_prefix.value_or(config.image_frozen_prefix);
  spec.Validate();
  const auto examples = ImageExamples(split.train, config, spec.input);
  auto result = image_model::FineTune(examples, spec, config.image, start);
  history.emplace_back("finetune", HistoryRows(result));
  SaveCheckpoint(out.ImageModel(), image_model::ToCheckpoint(spec, result.params));
  WriteFileBytes(out.ImageHistory(), HistoryCsv(history));
  m.AddOutput(config, out.ImageModel());
  m.AddOutput(config, out.ImageHistory());
  WriteManifest(config, m);
}

std::string EvaluationJson(const EvaluationSummary& summary) {
  ordered_json o;
  o["text"] = EvaluationNode(summary.text);
  o["image"] = EvaluationNode(summary.image);
  return o.dump(2) + "\n";
}

EvaluationSummary RunEvaluate(const PipelineConfig& config) {
  const Layout out(config);
  const bool have_text = fs::exists(out.TextModel()), have_image = fs::exists(out.ImageModel());
  if (!have_text && !have_image) throw ConfigError("no trained models under " + out.root.string() + "; run train-text or train-image");
  const auto split = SplitLabeledPosts(config);
  auto m = StartManifest(config, "evaluate");
  m.AddInput(config, out.CleanPosts());
  AddIfExists(m, config, config.annotations);

  EvaluationSummary summary;
  if (have_text) {
    const auto [params, vocab] = text_model::FromCheckpoint(LoadCheckpoint(out.TextModel()));
    m.AddInput(config, out.TextModel());
    m.AddInput(config, out.Captions());
    const auto examples = TextExamples(split.heldout, LoadCaptions(config, true), vocab, config.text.max_len);
    if (!examples.empty())
      summary.text = SplitEvaluation{static_cast<int>(examples.size()), text_model::Evaluate(params, examples)};
  }
  if (have_image) {
    const auto [spec, params] = image_model::FromCheckpoint(LoadCheckpoint(out.ImageModel()));
    m.AddInput(config, out.ImageModel());
    const auto examples = ImageExamples(split.heldout, config, spec.input);
    if (!examples.empty())
      summary.image = SplitEvaluation{static_cast<int>(examples.size()), image_model::Evaluate(params, spec, examples)};
  }
  fs::create_directories(out.Accuracy().parent_path());
  WriteFileBytes(out.Accuracy(), EvaluationJson(summary));
  m.AddOutput(config, out.Accuracy());
  WriteManifest(config, m);
  return summary;
}

void RunReport(const PipelineConfig& config) {
  const Layout out(config);
  const auto posts = LoadCleanPosts(config);
  const auto annotations = LoadAnnotations(config);
  const auto atlas = config.atlas ? analytics::Atlas::Load(*config.atlas) : analytics::Atlas::Builtin();
  analytics::ReportOptions opts;
  opts.country_k = config.report_k;
  opts.bar_cap = config.report_bar_cap;
  opts.likes_cap = config.report_likes_cap;
  const auto reports = analytics::BuildReports(posts, annotations, atlas, opts,
                                               analytics::ParseGeoMetric(config.report_metric),
                                               config.report_resolution);
  fs::remove_all(out.Reports());
  const auto files = analytics::RenderReports(reports, out.Reports(), opts);

  auto m = StartManifest(config, "report");
  m.AddInput(config, out.CleanPosts());
  AddIfExists(m, config, config.annotations);
  if (config.atlas) m.AddInput(config, *config.atlas);
  for (const auto& f : files) m.AddOutput(config, f);
  WriteManifest(config, m);
}

std::unique_ptr<AnnotationService> MakeAnnotationService(const PipelineConfig& config) {
  return std::make_unique<AnnotationService>(LoadCleanPosts(config), LoadCaptions(config, false),
                                             config.media_root, config.annotations);
}

}  // namespace instasent::service
