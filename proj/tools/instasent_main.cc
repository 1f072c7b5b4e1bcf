#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "instasent/service/annotation_service.h"
#include "instasent/service/config.h"
#include "instasent/service/pipeline.h"

namespace {

using namespace instasent;
using namespace instasent::service;

std::string AccuracyLine(const char* name, const std::optional<SplitEvaluation>& s) {
  if (!s) return std::string(name) + ": no held-out examples or no model\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s: held-out accuracy %.4f over %d posts\n", name, s->evaluation.accuracy, s->count);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instagram reaction analysis pipeline"};
  app.require_subcommand(1);
  std::string config_path = "pipeline.conf";
  auto with_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Pipeline config file")->capture_default_str();
    return sub;
  };

  FixtureOptions fixture;
  std::string fixture_out = ".";
  auto* fixture_cmd = app.add_subcommand("fixture", "Write a synthetic corpus, pretraining data and pipeline.conf");
  fixture_cmd->add_option("--seed", fixture.seed, "Generator seed")->capture_default_str();
  fixture_cmd->add_option("--n", fixture.n, "Posts, including injected defects")->capture_default_str()->check(CLI::PositiveNumber);
  fixture_cmd->add_option("--captions", fixture.captions, "Labeled pretraining captions")->capture_default_str()->check(CLI::NonNegativeNumber);
  fixture_cmd->add_option("--images", fixture.images, "Labeled pretraining images")->capture_default_str()->check(CLI::NonNegativeNumber);
  fixture_cmd->add_option("-o,--out", fixture_out, "Destination directory")->capture_default_str();

  auto* ingest_cmd = with_config(app.add_subcommand("ingest", "Parse raw posts and report malformed rows"));
  auto* clean_cmd = with_config(app.add_subcommand("clean", "Drop duplicate, incomplete and corrupted posts"));
  auto* enrich_cmd = with_config(app.add_subcommand("enrich", "Build final captions from caption, OCR and subtitles"));

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve_cmd = with_config(app.add_subcommand("annotate-serve", "Serve the labeling API"));
  serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str()->check(CLI::Range(0, 65535));

  std::string text_frozen, text_init;
  auto* text_cmd = with_config(app.add_subcommand("train-text", "Pretrain and fine-tune the caption classifier"));
  text_cmd->add_option("--frozen", text_frozen, "none, embeddings or embeddings+lstm")
      ->check(CLI::IsMember({"none", "embeddings", "embeddings+lstm"}));
  text_cmd->add_option("--init", text_init, "Start from this checkpoint instead of pretraining")->check(CLI::ExistingFile);

  int image_frozen = -1;
  std::string image_init;
  auto* image_cmd = with_config(app.add_subcommand("train-image", "Pretrain and fine-tune the image classifier"));
  image_cmd->add_option("--frozen-prefix", image_frozen, "Leading layers held fixed")->check(CLI::NonNegativeNumber);
  image_cmd->add_option("--init", image_init, "Start from this checkpoint instead of pretraining")->check(CLI::ExistingFile);

  auto* eval_cmd = with_config(app.add_subcommand("evaluate", "Held-out accuracy of the trained models"));
  auto* report_cmd = with_config(app.add_subcommand("report", "Geographic, country, overlap and engagement reports"));

  CLI11_PARSE(app, argc, argv);

  try {
    if (fixture_cmd->parsed()) {
      fixture.out_dir = fixture_out;
      std::cout << "wrote " << RunFixture(fixture).string() << "\n";
      return 0;
    }
    const auto config = LoadConfig(config_path);
    const Layout out(config);
    if (ingest_cmd->parsed()) {
      RunIngest(config);
      std::cout << "wrote " << out.IngestedPosts().string() << "\n";
    } else if (clean_cmd->parsed()) {
      const auto r = RunClean(config);
      std::cout << "input " << r.input_count << ", duplicates " << r.removed_duplicates << ", incomplete "
                << r.removed_incomplete << ", corrupted " << r.removed_corrupted << ", kept " << r.output_count << "\n";
    } else if (enrich_cmd->parsed()) {
      RunEnrich(config);
      std::cout << "wrote " << out.Captions().string() << "\n";
    } else if (serve_cmd->parsed()) {
      auto service = MakeAnnotationService(config);
      HttpServer server(*service);
      const int bound = server.Bind(host, port);
      std::cout << "listening on http://" << host << ":" << bound << std::endl;
      server.Serve();
    } else if (text_cmd->parsed()) {
      TextTrainOptions opts;
      if (!text_frozen.empty()) opts.frozen = text_model::ParseFrozenSet(text_frozen);
      if (!text_init.empty()) opts.init = text_init;
      RunTrainText(config, opts);
      std::cout << "wrote " << out.TextModel().string() << "\n";
    } else if (image_cmd->parsed()) {
      ImageTrainOptions opts;
      if (image_frozen >= 0) opts.frozen_prefix = image_frozen;
      if (!image_init.empty()) opts.init = image_init;
      RunTrainImage(config, opts);
      std::cout << "wrote " << out.ImageModel().string() << "\n";
    } else if (eval_cmd->parsed()) {
      const auto summary = RunEvaluate(config);
      std::cout << AccuracyLine("text", summary.text) << AccuracyLine("image", summary.image);
    } else if (report_cmd->parsed()) {
      RunReport(config);
      std::cout << "wrote " << out.Reports().string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
