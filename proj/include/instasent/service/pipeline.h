#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "instasent/common/metrics.h"
#include "instasent/common/raster.h"
#include "instasent/corpus/post_io.h"
#include "instasent/corpus/types.h"
#include "instasent/service/annotation_service.h"
#include "instasent/service/config.h"
#include "instasent/text_model/attention_lstm.h"
#include "instasent/text_model/vocabulary.h"

namespace instasent::service {

// Artifact locations under output_dir.
struct Layout {
  explicit Layout(const PipelineConfig& config) : root(config.output_dir) {}
  std::filesystem::path root;
  std::filesystem::path IngestedPosts() const { return root / "ingest" / "posts.jsonl"; }
  std::filesystem::path IngestErrors() const { return root / "ingest" / "errors.tsv"; }
  std::filesystem::path CleanPosts() const { return root / "clean" / "posts.jsonl"; }
  std::filesystem::path CleanReport() const { return root / "clean" / "report.json"; }
  std::filesystem::path CleanWarnings() const { return root / "clean" / "warnings.txt"; }
  std::filesystem::path Captions() const { return root / "enrich" / "captions.jsonl"; }
  std::filesystem::path TextPretrain() const { return root / "models" / "text_pretrain.ckpt"; }
  std::filesystem::path TextModel() const { return root / "models" / "text.ckpt"; }
  std::filesystem::path TextHistory() const { return root / "models" / "text_history.csv"; }
  std::filesystem::path ImagePretrain() const { return root / "models" / "image_pretrain.ckpt"; }
  std::filesystem::path ImageModel() const { return root / "models" / "image.ckpt"; }
  std::filesystem::path ImageHistory() const { return root / "models" / "image_history.csv"; }
  std::filesystem::path Accuracy() const { return root / "evaluation" / "accuracy.json"; }
  std::filesystem::path Reports() const { return root / "reports"; }
};

struct FixtureOptions {
  std::uint64_t seed = 7;
  int n = 200;
  int captions = 400;  // labeled text for pretraining
  int images = 400;    // labeled images for pretraining
  std::filesystem::path out_dir = ".";
};

// Writes the post fixture, pretraining corpora and a pipeline.conf wired to
// them. Returns the config path.
std::filesystem::path RunFixture(const FixtureOptions& options);

corpus::PostFormat PostsFormat(const PipelineConfig& config);

void RunIngest(const PipelineConfig& config);
corpus::CleanReport RunClean(const PipelineConfig& config);
void RunEnrich(const PipelineConfig& config);

struct TextTrainOptions {
  std::optional<text_model::FrozenSet> frozen;  // overrides text.frozen
  std::optional<std::filesystem::path> init;    // start from this checkpoint, skip pretraining
};
void RunTrainText(const PipelineConfig& config, const TextTrainOptions& options);

struct ImageTrainOptions {
  std::optional<int> frozen_prefix;  // overrides image.frozen_prefix
  std::optional<std::filesystem::path> init;
};
void RunTrainImage(const PipelineConfig& config, const ImageTrainOptions& options);

struct SplitEvaluation {
  int count = 0;
  Evaluation evaluation;
};
struct EvaluationSummary {
  std::optional<SplitEvaluation> text;   // held-out split, when a model exists
  std::optional<SplitEvaluation> image;
};
// Held-out accuracy of whichever trained models exist; writes Accuracy().
EvaluationSummary RunEvaluate(const PipelineConfig& config);
std::string EvaluationJson(const EvaluationSummary& summary);

void RunReport(const PipelineConfig& config);

// Service over the cleaned corpus and enriched captions (when present).
std::unique_ptr<AnnotationService> MakeAnnotationService(const PipelineConfig& config);

// Fine-tuning data shared by training and evaluation.
struct LabeledPost {
  corpus::PostRecord post;
  corpus::Annotation label;
};
struct PostSplit {
  std::vector<LabeledPost> train;
  std::vector<LabeledPost> heldout;
};
// One annotation per cleaned post, shuffled by seed, the first
// round(holdout * n) held out.
PostSplit SplitLabeledPosts(const PipelineConfig& config);

// Nearest-neighbour resampling to width x height.
Rgb8Image ResizeNearest(const Rgb8Image& image, int width, int height);

}  // namespace instasent::service
