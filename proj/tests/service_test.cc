#include <cstdlib>
#include <map>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "gtest/gtest.h"
#include "instasent/common/checkpoint.h"
#include "instasent/common/digest.h"
#include "instasent/common/error.h"
#include "instasent/common/rng.h"
#include "instasent/corpus/annotation_store.h"
#include "instasent/corpus/clean.h"
#include "instasent/corpus/fixture.h"
#include "instasent/image_model/cnn.h"
#include "instasent/service/annotation_service.h"
#include "instasent/service/config.h"
#include "instasent/service/manifest.h"
#include "instasent/service/pipeline.h"
#include "instasent/text_model/attention_lstm.h"
#include "instasent/preprocess/enrich.h"
#include "test_util.h"

// After Eigen: the socket headers define macros that clash with its templates.
#include <httplib.h>

namespace instasent::service {
namespace {

namespace fs = std::filesystem;
using corpus::Annotation;
using corpus::SentimentClass;
using json = nlohmann::json;
using testing::TempDir;

// ---------------------------------------------------------------- config

TEST(ConfigTest, ParsesAndResolvesRelativePaths) {
  TempDir dir;
  WriteFileBytes(dir / "p.jsonl", "");
  const auto c = ParseConfig(
      "# comment\n"
      "seed = 11  # trailing\n"
      "posts = p.jsonl\n"
      "text.frozen = embeddings+lstm\n"
      "image.frozen_prefix = 2\n"
      "report.k = 5\n",
      dir.path());
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.posts, dir / "p.jsonl");
  EXPECT_EQ(c.output_dir, dir / "out");
  EXPECT_EQ(c.media_root, dir.path());
  EXPECT_EQ(c.text.frozen, text_model::FrozenSet::kEmbeddingsLstm);
  EXPECT_EQ(c.text.seed, 11u);
  EXPECT_EQ(c.image_frozen_prefix, 2);
  EXPECT_EQ(c.report_k, 5);
  EXPECT_FALSE(c.pretrain_text.has_value());
}

TEST(ConfigTest, RejectsBadInput) {
  TempDir dir;
  WriteFileBytes(dir / "p.jsonl", "");
  EXPECT_THROW(ParseConfig("posts = p.jsonl\n", dir.path()), ConfigError);  // no seed
  EXPECT_THROW(ParseConfig("seed = 1\nposts = p.jsonl\ncolour = red\n", dir.path()), ConfigError);
  EXPECT_THROW(ParseConfig("seed = 1\nposts = p.jsonl\njust words\n", dir.path()), ConfigError);
  EXPECT_THROW(ParseConfig("seed = x\nposts = p.jsonl\n", dir.path()), ConfigError);
  EXPECT_THROW(ParseConfig("seed = -3\nposts = p.jsonl\n", dir.path()), ConfigError);
  EXPECT_THROW(ParseConfig("seed = 1\nposts = missing.jsonl\n", dir.path()), ConfigError);
  EXPECT_THROW(ParseConfig("seed = 1\nposts = p.jsonl\npretrain_text = nope.tsv\n", dir.path()), ConfigError);
  EXPECT_THROW(ParseConfig("seed = 1\nposts = p.jsonl\ntext.frozen = lstm\n", dir.path()), ConfigError);
  EXPECT_THROW(ParseConfig("seed = 1\nposts = p.jsonl\ntext.batch_size = 0\n", dir.path()), ConfigError);
  EXPECT_THROW(ParseConfig("seed = 1\nposts = p.jsonl\nholdout = 1\n", dir.path()), ConfigError);
  EXPECT_THROW(ParseConfig("seed = 1\nposts = p.jsonl\nreport.metric = views\n", dir.path()), ConfigError);
  EXPECT_THROW(LoadConfig(dir / "absent.conf"), ConfigError);
}

TEST(ConfigTest, HashTracksSettingsNotLocation) {
  TempDir a, b;
  WriteFileBytes(a / "p.jsonl", "");
  WriteFileBytes(b / "p.jsonl", "");
  const std::string text = "seed = 3\nposts = p.jsonl\n";
  EXPECT_EQ(ParseConfig(text, a.path()).Hash(), ParseConfig(text, b.path()).Hash());
  EXPECT_EQ(ParseConfig(text, a.path()).Hash(), ParseConfig("posts=p.jsonl\n\nseed=3", a.path()).Hash());
  EXPECT_NE(ParseConfig(text, a.path()).Hash(), ParseConfig(text + "seed = 4\n", a.path()).Hash());
  EXPECT_EQ(ParseConfig(text, a.path()).Hash().size(), 64u);
}

TEST(ConfigTest, EnvironmentOverridesOutputDir) {
  TempDir dir;
  WriteFileBytes(dir / "p.jsonl", "");
  ::setenv(kOutputDirEnv, "elsewhere", 1);
  const auto c = ParseConfig("seed = 1\nposts = p.jsonl\noutput_dir = mine\n", dir.path());
  ::unsetenv(kOutputDirEnv);
  EXPECT_EQ(c.output_dir, dir / "elsewhere");
  EXPECT_EQ(ParseConfig("seed = 1\nposts = p.jsonl\noutput_dir = mine\n", dir.path()).output_dir, dir / "mine");
}

// ---------------------------------------------------------------- annotation API

struct ApiFixture {
  TempDir dir{"api"};
  std::vector<corpus::PostRecord> posts;
  fs::path store;

  explicit ApiFixture(int n = 10, std::uint64_t seed = 5) {
    const auto fx = corpus::GenerateFixture(seed, n);
    corpus::WriteFixture(fx, dir.path());
    posts = corpus::Clean(fx.posts, dir.path()).posts;
    store = dir / "labels.jsonl";
  }
  std::unique_ptr<AnnotationService> Make(UtcSeconds now = 1000) const {
    return std::make_unique<AnnotationService>(posts, std::map<std::string, std::string>{}, dir.path(), store,
                                               [now] { return now; });
  }
};

ApiResponse Get(AnnotationService& s, const std::string& path, std::map<std::string, std::string> query = {}) {
  return s.Handle({"GET", path, std::move(query), ""});
}

ApiResponse Post(AnnotationService& s, const json& body) {
  return s.Handle({"POST", "/annotations", {}, body.dump()});
}

json Label(const std::string& post, int image, int caption, const std::string& annotator) {
  return {{"post_id", post}, {"image_class", image}, {"caption_class", caption}, {"annotator_id", annotator}};
}

TEST(AnnotationApiTest, ProgressCountsOnePost) {
  ApiFixture f;
  ASSERT_EQ(f.posts.size(), 10u);
  auto s = f.Make();
  auto p = json::parse(Get(*s, "/progress").body);
  EXPECT_EQ(p["labeled"], 0);
  EXPECT_EQ(p["total"], 10);
  const auto r = Post(*s, Label(f.posts[3].post_id, 2, 4, "ann"));
  EXPECT_EQ(r.status, 201);
  EXPECT_EQ(json::parse(r.body)["annotation"]["labeled_at"], 1000);
  p = json::parse(Get(*s, "/progress").body);
  EXPECT_EQ(p["labeled"], 1);
  EXPECT_EQ(p["total"], 10);
  EXPECT_EQ(p["image_class"]["2"], 1);
  EXPECT_EQ(p["caption_class"]["4"], 1);
  EXPECT_EQ(p["caption_class"]["2"], 0);
}

TEST(AnnotationApiTest, SecondPostWins) {
  ApiFixture f;
  auto s = f.Make();
  const auto& id = f.posts[0].post_id;
  ASSERT_EQ(Post(*s, Label(id, 1, 1, "ann")).status, 201);
  ASSERT_EQ(Post(*s, Label(id, 3, 5, "ann")).status, 201);
  corpus::AnnotationStore store(f.store);
  EXPECT_EQ(store.LoadAll().size(), 2u);
  const auto effective = store.LoadEffective();
  ASSERT_EQ(effective.size(), 1u);
  EXPECT_EQ(effective[0].image_class, SentimentClass::kPositive);
  EXPECT_EQ(effective[0].caption_class, SentimentClass::kRandom);
  EXPECT_EQ(json::parse(Get(*s, "/progress").body)["labeled"], 1);
}

TEST(AnnotationApiTest, ValidationErrorsLeaveStoreUnchanged) {
  ApiFixture f;
  auto s = f.Make();
  const auto& id = f.posts[0].post_id;
  struct Case {
    std::string body;
    int status;
    std::string code, field;
  };
  auto without = [&](const char* key) {
    auto b = Label(id, 1, 1, "ann");
    b.erase(key);
    return b.dump();
  };
  auto with = [&](const char* key, json v) {
    auto b = Label(id, 1, 1, "ann");
    b[key] = v;
    return b.dump();
  };
  const std::vector<Case> cases = {
      {with("image_class", 9), 400, "validation_error", "image_class"},
      {with("caption_class", 0), 400, "validation_error", "caption_class"},
      {with("image_class", "3"), 400, "validation_error", "image_class"},
      {with("image_class", 2.5), 400, "validation_error", "image_class"},
      {without("caption_class"), 400, "validation_error", "caption_class"},
      {without("image_class"), 400, "validation_error", "image_class"},
      {without("annotator_id"), 400, "validation_error", "annotator_id"},
      {with("post_id", ""), 400, "validation_error", "post_id"},
      {with("labeled_at", "yesterday"), 400, "validation_error", "labeled_at"},
      {"{not json", 400, "malformed_body", ""},
      {"[1,2]", 400, "malformed_body", ""},
      {with("post_id", "no-such-post"), 404, "not_found", "post_id"},
  };
  for (const auto& c : cases) {
    const auto r = s->Handle({"POST", "/annotations", {}, c.body});
    EXPECT_EQ(r.status, c.status) << c.body;
    EXPECT_EQ(r.content_type, "application/json");
    const auto e = json::parse(r.body)["error"];
    EXPECT_EQ(e["code"], c.code) << c.body;
    EXPECT_TRUE(e["message"].is_string());
    if (!c.field.empty()) EXPECT_EQ(e["field"], c.field) << c.body;
  }
  EXPECT_FALSE(fs::exists(f.store));
  EXPECT_EQ(json::parse(Get(*s, "/progress").body)["labeled"], 0);
}

TEST(AnnotationApiTest, RoutingErrorsAreStructured) {
  ApiFixture f;
  auto s = f.Make();
  EXPECT_EQ(Get(*s, "/nowhere").status, 404);
  EXPECT_EQ(json::parse(Get(*s, "/nowhere").body)["error"]["code"], "no_route");
  EXPECT_EQ(s->Handle({"POST", "/progress", {}, ""}).status, 405);
  EXPECT_EQ(Get(*s, "/annotations").status, 405);
  EXPECT_EQ(Get(*s, "/tasks/next").status, 400);
  EXPECT_EQ(json::parse(Get(*s, "/media/nope").body)["error"]["code"], "not_found");
}

TEST(AnnotationApiTest, QueueFollowsCreatedAtAndSkipsOwnLabels) {
  ApiFixture f(30, 9);
  auto s = f.Make();
  auto expected = f.posts;
  std::stable_sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
    return std::pair(*a.created_at, a.post_id) < std::pair(*b.created_at, b.post_id);
  });
  std::set<std::string> served;
  for (size_t i = 0; i < expected.size(); ++i) {
    const auto body = json::parse(Get(*s, "/tasks/next", {{"annotator", "a"}}).body);
    ASSERT_FALSE(body["task"].is_null());
    EXPECT_EQ(body["remaining"], expected.size() - i);
    const std::string id = body["task"]["post_id"];
    EXPECT_EQ(id, expected[i].post_id);
    EXPECT_EQ(body["task"]["media_url"], "/media/" + id);
    EXPECT_TRUE(served.insert(id).second) << "served twice: " << id;
    // Another annotator's label does not remove the post from a's queue.
    if (i + 1 < expected.size()) ASSERT_EQ(Post(*s, Label(expected[i + 1].post_id, 1, 1, "b")).status, 201);
    ASSERT_EQ(Post(*s, Label(id, 2, 2, "a")).status, 201);
  }
  const auto done = json::parse(Get(*s, "/tasks/next", {{"annotator", "a"}}).body);
  EXPECT_TRUE(done["task"].is_null());
  EXPECT_EQ(done["remaining"], 0);
  // b labeled everything except the first post, so that is all b is offered.
  const auto b = json::parse(Get(*s, "/tasks/next", {{"annotator", "b"}}).body);
  EXPECT_EQ(b["task"]["post_id"], expected[0].post_id);
  EXPECT_EQ(b["remaining"], 1);
  EXPECT_EQ(b["task"]["existing"].size(), 1u);
}

TEST(AnnotationApiTest, ShowsEnrichedCaption) {
  ApiFixture f;
  AnnotationService s(f.posts, {{f.posts[0].post_id, "enriched words"}}, f.dir.path(), f.store);
  std::map<std::string, std::string> shown;
  for (size_t i = 0; i < f.posts.size(); ++i) {
    const auto body = json::parse(Get(s, "/tasks/next", {{"annotator", "z"}}).body);
    shown[body["task"]["post_id"]] = body["task"]["final_text"];
    ASSERT_EQ(Post(s, Label(body["task"]["post_id"], 1, 1, "z")).status, 201);
  }
  EXPECT_EQ(shown.at(f.posts[0].post_id), "enriched words");
  EXPECT_EQ(shown.at(f.posts[1].post_id), f.posts[1].caption.value());
}

TEST(AnnotationApiTest, MediaBytesComeFromMediaRoot) {
  ApiFixture f;
  auto s = f.Make();
  for (const auto& p : f.posts) {
    const auto r = Get(*s, "/media/" + p.post_id);
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(r.body, ReadFileBytes(f.dir / *p.media_path));
    EXPECT_EQ(r.content_type, p.media_kind == corpus::MediaKind::kImage ? "image/png" : "application/octet-stream");
    const auto png = Get(*s, "/media/" + p.post_id, {{"as", "png"}});
    ASSERT_EQ(png.status, 200);
    EXPECT_EQ(DecodePng(png.body), DecodeMediaFile(f.dir / *p.media_path));
  }
}

// Independent scan: last record per (post, annotator) in file order, then the
// latest labeled_at per post, ties to the smaller annotator.
std::map<std::string, Annotation> ScanStore(const fs::path& path, const std::set<std::string>& posts) {
  std::map<std::pair<std::string, std::string>, Annotation> last;
  std::istringstream in(ReadFileBytes(path));
  for (std::string line; std::getline(in, line);) {
    const auto o = json::parse(line);
    Annotation a;
    a.post_id = o["post_id"];
    a.annotator_id = o["annotator_id"];
    a.image_class = static_cast<SentimentClass>(o["image_class"].get<int>());
    a.caption_class = static_cast<SentimentClass>(o["caption_class"].get<int>());
    a.labeled_at = o["labeled_at"];
    if (posts.count(a.post_id)) last[{a.post_id, a.annotator_id}] = a;
  }
  std::map<std::string, Annotation> one;
  for (const auto& [key, a] : last) {
    auto it = one.find(a.post_id);
    if (it == one.end() || a.labeled_at > it->second.labeled_at ||
        (a.labeled_at == it->second.labeled_at && a.annotator_id < it->second.annotator_id))
      one[a.post_id] = a;
  }
  return one;
}

TEST(AnnotationApiTest, ProgressAgreesWithStoreScanAndSurvivesRestart) {
  ApiFixture f(40, 21);
  std::set<std::string> ids;
  for (const auto& p : f.posts) ids.insert(p.post_id);
  // Records for posts outside the cleaned corpus are ignored.
  corpus::AnnotationStore(f.store).Append({"ghost", SentimentClass::kNegative, SentimentClass::kNegative, "a", 5});
  Rng rng(77);
  for (int round = 0; round < 4; ++round) {
    auto s = f.Make(static_cast<UtcSeconds>(round));
    for (int i = 0; i < 25; ++i) {
      auto body = Label(f.posts[rng.Below(f.posts.size())].post_id, rng.IntIn(1, 5), rng.IntIn(1, 5),
                        "ann" + std::to_string(rng.IntIn(0, 2)));
      if (rng.Bernoulli(0.5)) body["labeled_at"] = rng.IntIn(0, 3);
      if (rng.Bernoulli(0.1)) body["image_class"] = 6;
      s->Handle({"POST", "/annotations", {}, body.dump()});
    }
    const auto scan = ScanStore(f.store, ids);
    std::array<int, 5> image{}, caption{};
    for (const auto& [id, a] : scan) {
      ++image[corpus::ToInt(a.image_class) - 1];
      ++caption[corpus::ToInt(a.caption_class) - 1];
    }
    // A fresh service replays the store and must report the same state.
    const auto restarted = f.Make();
    for (auto* svc : {s.get(), restarted.get()}) {
      const auto p = json::parse(Get(*svc, "/progress").body);
      EXPECT_EQ(p["labeled"], scan.size());
      EXPECT_EQ(p["total"], f.posts.size());
      for (int c = 0; c < 5; ++c) {
        EXPECT_EQ(p["image_class"][std::to_string(c + 1)], image[c]);
        EXPECT_EQ(p["caption_class"][std::to_string(c + 1)], caption[c]);
      }
    }
  }
}

TEST(AnnotationApiTest, ConcurrentWritersAllLand) {
  ApiFixture f(40, 3);
  auto s = f.Make();
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] {
      for (size_t i = 0; i < f.posts.size(); ++i) {
        Post(*s, Label(f.posts[i].post_id, 1 + (t + i) % 5, 1, "w" + std::to_string(t)));
        Get(*s, "/progress");
        Get(*s, "/tasks/next", {{"annotator", "w" + std::to_string(t)}});
      }
    });
  for (auto& th : threads) th.join();
  corpus::AnnotationStore store(f.store);
  EXPECT_EQ(store.LoadAll().size(), 8 * f.posts.size());
  EXPECT_EQ(store.LoadEffective().size(), 8 * f.posts.size());
  EXPECT_EQ(json::parse(Get(*s, "/progress").body)["labeled"], f.posts.size());
}

TEST(HttpServerTest, ServesApiOverLocalhost) {
  ApiFixture f;
  auto s = f.Make();
  HttpServer server(*s);
  const int port = server.Bind("127.0.0.1", 0);
  std::thread loop([&] { server.Serve(); });
  httplib::Client client("127.0.0.1", port);
  for (int i = 0; i < 50 && !client.Get("/progress"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(20));

  auto progress = client.Get("/progress");
  ASSERT_TRUE(progress);
  EXPECT_EQ(progress->status, 200);
  EXPECT_EQ(json::parse(progress->body)["total"], 10);

  auto next = client.Get("/tasks/next?annotator=web");
  ASSERT_TRUE(next);
  const std::string id = json::parse(next->body)["task"]["post_id"];
  auto media = client.Get("/media/" + id);
  ASSERT_TRUE(media);
  EXPECT_EQ(media->status, 200);

  auto ok = client.Post("/annotations", Label(id, 3, 3, "web").dump(), "application/json");
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 201);
  EXPECT_EQ(ok->get_header_value("Access-Control-Allow-Origin"), "*");
  auto bad = client.Post("/annotations", Label(id, 9, 3, "web").dump(), "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body)["error"]["field"], "image_class");
  EXPECT_EQ(json::parse(client.Get("/progress")->body)["labeled"], 1);
  EXPECT_NE(json::parse(client.Get("/tasks/next?annotator=web")->body)["task"]["post_id"], id);

  server.Stop();
  loop.join();
}

// ---------------------------------------------------------------- pipeline

std::string Hashes(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) out += f.lexically_relative(root).string() + " " + Sha256File(f) + "\n";
  return out;
}

// Small fixture with short training so the suite stays fast.
PipelineConfig SmallPipeline(const fs::path& dir, std::uint64_t seed = 7) {
  FixtureOptions opts;
  opts.seed = seed;
  opts.n = 80;
  opts.captions = 120;
  opts.images = 40;
  opts.out_dir = dir;
  const auto path = RunFixture(opts);
  WriteFileBytes(path, ReadFileBytes(path) +
                           "text.pretrain_epochs = 3\ntext.epochs = 3\n"
                           "image.pretrain_epochs = 1\nimage.epochs = 1\n");
  return LoadConfig(path);
}

TEST(PipelineTest, FixtureCleanReportIsDeterministic) {
  TempDir a("pa"), b("pb");
  for (const auto* d : {&a, &b}) {
    const auto config = SmallPipeline(d->path());
    RunClean(config);
    RunReport(config);
  }
  const auto ha = Hashes(a.path()), hb = Hashes(b.path());
  EXPECT_EQ(ha, hb);
  for (const char* f : {"out/clean/posts.jsonl", "out/clean/report.json", "out/reports/country_report.csv",
                        "out/reports/geo_aggregate.csv", "out/reports/overlap_matrix.csv",
                        "out/reports/engagement_points.csv", "out/reports/geo_heatmap.png",
                        "out/manifests/fixture.json", "out/manifests/clean.json", "out/manifests/report.json"})
    EXPECT_TRUE(fs::exists(a / f)) << f;
  // Re-running in place changes nothing.
  const auto config = LoadConfig(a / "pipeline.conf");
  RunClean(config);
  RunReport(config);
  EXPECT_EQ(Hashes(a.path()), ha);
}

TEST(PipelineTest, ManifestRecordsConfigAndDigests) {
  TempDir dir;
  const auto config = SmallPipeline(dir.path());
  RunClean(config);
  const auto m = json::parse(ReadFileBytes(dir / "out/manifests/clean.json"));
  EXPECT_EQ(m["subcommand"], "clean");
  EXPECT_EQ(m["config_sha256"], config.Hash());
  EXPECT_EQ(m["seed"], 7);
  EXPECT_EQ(m["inputs"][0]["path"], "posts.jsonl");
  EXPECT_EQ(m["inputs"][0]["sha256"], Sha256File(dir / "posts.jsonl"));
  std::set<std::string> outputs;
  for (const auto& o : m["outputs"]) {
    outputs.insert(o["path"].get<std::string>());
    EXPECT_EQ(o["sha256"], Sha256File(dir / o["path"].get<std::string>()));
  }
  EXPECT_TRUE(outputs.count("out/clean/posts.jsonl"));
}

TEST(PipelineTest, SplitIsDeterministicAndDisjoint) {
  TempDir dir;
  const auto config = SmallPipeline(dir.path());
  RunClean(config);
  const auto s1 = SplitLabeledPosts(config), s2 = SplitLabeledPosts(config);
  std::set<std::string> train, held;
  for (const auto& p : s1.train) train.insert(p.post.post_id);
  for (const auto& p : s1.heldout) held.insert(p.post.post_id);
  for (const auto& id : held) EXPECT_FALSE(train.count(id));
  ASSERT_EQ(s1.heldout.size(), s2.heldout.size());
  for (size_t i = 0; i < s1.heldout.size(); ++i) EXPECT_EQ(s1.heldout[i].post.post_id, s2.heldout[i].post.post_id);
  const double total = static_cast<double>(train.size() + held.size());
  EXPECT_EQ(held.size(), static_cast<size_t>(std::llround(0.2 * total)));
}

TEST(PipelineTest, TrainTextKeepsFrozenTensorsOfPretrain) {
  TempDir dir;
  const auto config = SmallPipeline(dir.path());
  RunClean(config);
  RunEnrich(config);
  Layout out(config);
  for (auto frozen : {text_model::FrozenSet::kEmbeddingsLstm, text_model::FrozenSet::kEmbeddings}) {
    RunTrainText(config, {frozen, std::nullopt});
    const auto [pre, pre_vocab] = text_model::FromCheckpoint(LoadCheckpoint(out.TextPretrain()));
    const auto [fine, vocab] = text_model::FromCheckpoint(LoadCheckpoint(out.TextModel()));
    EXPECT_EQ(pre_vocab, vocab);
    std::map<std::string, std::vector<double>> before;
    pre.ForEachTensor([&](const std::string& name, const double* d, Eigen::Index n) { before[name].assign(d, d + n); });
    int changed = 0;
    fine.ForEachTensor([&](const std::string& name, const double* d, Eigen::Index n) {
      const bool same = std::vector<double>(d, d + n) == before[name];
      if (text_model::IsFrozen(frozen, name)) EXPECT_TRUE(same) << name;
      else changed += !same;
    });
    EXPECT_GT(changed, 0);
  }
  // --init skips pretraining and starts from the given checkpoint.
  const auto pre_hash = Sha256File(out.TextPretrain());
  RunTrainText(config, {text_model::FrozenSet::kEmbeddings, out.TextPretrain()});
  EXPECT_EQ(Sha256File(out.TextPretrain()), pre_hash);
}

TEST(PipelineTest, TrainImageKeepsFrozenPrefix) {
  TempDir dir;
  const auto config = SmallPipeline(dir.path());
  RunClean(config);
  RunTrainImage(config, {1, std::nullopt});
  Layout out(config);
  const auto [pre_spec, pre] = image_model::FromCheckpoint(LoadCheckpoint(out.ImagePretrain()));
  const auto [spec, fine] = image_model::FromCheckpoint(LoadCheckpoint(out.ImageModel()));
  EXPECT_EQ(spec.frozen_prefix, 1);
  EXPECT_EQ(fine.layers[0], pre.layers[0]);
  EXPECT_NE(fine.layers.back(), pre.layers.back());
  EXPECT_THROW(RunTrainImage(config, {99, std::nullopt}), ConfigError);
}

TEST(PipelineTest, EvaluateFileMatchesFunction) {
  TempDir dir;
  const auto config = SmallPipeline(dir.path());
  RunClean(config);
  EXPECT_THROW(RunEvaluate(config), ConfigError);  // nothing trained yet
  RunEnrich(config);
  RunTrainText(config, {});
  RunTrainImage(config, {});
  const auto summary = RunEvaluate(config);
  ASSERT_TRUE(summary.text && summary.image);
  const auto file = json::parse(ReadFileBytes(Layout(config).Accuracy()));

  // Recompute directly from the checkpoints and the split.
  const auto split = SplitLabeledPosts(config);
  const auto [params, vocab] = text_model::FromCheckpoint(LoadCheckpoint(Layout(config).TextModel()));
  std::map<std::string, std::string> captions;
  for (auto& c : preprocess::ParseEnriched(ReadFileBytes(Layout(config).Captions()))) captions[c.post_id] = c.final_text;
  std::vector<text_model::Example> text;
  for (const auto& lp : split.heldout)
    if (corpus::IsTrainingClass(lp.label.caption_class))
      text.push_back({text_model::Tokenize(captions.at(lp.post.post_id), vocab), corpus::TrainingIndex(lp.label.caption_class)});
  const auto direct = text_model::Evaluate(params, text);
  EXPECT_EQ(file["text"]["accuracy"].get<double>(), direct.accuracy);
  EXPECT_EQ(file["text"]["heldout_count"], text.size());
  for (int t = 0; t < 4; ++t)
    for (int p = 0; p < 4; ++p) EXPECT_EQ(file["text"]["confusion"][t][p], direct.confusion.at(t, p));
  EXPECT_EQ(file["image"]["accuracy"].get<double>(), summary.image->evaluation.accuracy);
  EXPECT_EQ(ReadFileBytes(Layout(config).Accuracy()), EvaluationJson(summary));
}

TEST(PipelineTest, StagesRequireTheirInputs) {
  TempDir dir;
  const auto config = SmallPipeline(dir.path());
  EXPECT_THROW(RunReport(config), ConfigError);
  EXPECT_THROW(RunEnrich(config), ConfigError);
  RunClean(config);
  EXPECT_THROW(RunTrainText(config, {}), ConfigError);  // no enriched captions
}

TEST(PipelineTest, IngestWritesErrors) {
  TempDir dir;
  WriteFileBytes(dir / "posts.jsonl", "{\"post_id\":\"1\"}\nnot json\n");
  WriteFileBytes(dir / "pipeline.conf", "seed = 1\nposts = posts.jsonl\n");
  const auto config = LoadConfig(dir / "pipeline.conf");
  RunIngest(config);
  EXPECT_EQ(ReadFileBytes(Layout(config).IngestErrors()).substr(0, 15), "line\tmessage\n2\t");
}

TEST(ResizeTest, NearestNeighbour) {
  Rgb8Image img(2, 2);
  img.set(0, 0, 1, 1, 1);
  img.set(1, 0, 2, 2, 2);
  img.set(0, 1, 3, 3, 3);
  img.set(1, 1, 4, 4, 4);
  const auto big = ResizeNearest(img, 4, 4);
  EXPECT_EQ(big.at(3, 0)[0], 2);
  EXPECT_EQ(big.at(0, 3)[0], 3);
  EXPECT_EQ(big.at(2, 2)[0], 4);
  EXPECT_EQ(ResizeNearest(big, 2, 2), img);
}

// ---------------------------------------------------------------- CLI binary

int RunCli(const std::string& args, const fs::path& cwd, std::string* output = nullptr) {
  const auto log = cwd / "cli.log";
  const std::string cmd = "cd '" + cwd.string() + "' && '" INSTASENT_CLI "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) *output = ReadFileBytes(log);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliTest, UsageErrorsExitNonZero) {
  TempDir dir;
  std::string out;
  EXPECT_NE(RunCli("", dir.path(), &out), 0);
  EXPECT_NE(out.find("--help"), std::string::npos);
  EXPECT_NE(RunCli("frobnicate", dir.path(), &out), 0);
  EXPECT_NE(RunCli("clean --bogus-flag", dir.path(), &out), 0);
  EXPECT_NE(RunCli("fixture --n 0", dir.path(), &out), 0);
  EXPECT_NE(RunCli("train-text --frozen lstm", dir.path(), &out), 0);
  EXPECT_NE(RunCli("clean", dir.path(), &out), 0);  // no pipeline.conf
  EXPECT_NE(out.find("error:"), std::string::npos);
  EXPECT_EQ(RunCli("--help", dir.path(), &out), 0);
  for (const char* sub : {"ingest", "clean", "enrich", "annotate-serve", "train-text", "train-image", "evaluate",
                          "report", "fixture"})
    EXPECT_NE(out.find(sub), std::string::npos) << sub;
}

TEST(CliTest, FixtureCleanReportByteIdentical) {
  TempDir a("ca"), b("cb");
  for (const auto* d : {&a, &b}) {
    ASSERT_EQ(RunCli("fixture --seed 7 --n 200 --captions 10 --images 4", d->path()), 0);
    ASSERT_EQ(RunCli("clean", d->path()), 0);
    ASSERT_EQ(RunCli("report", d->path()), 0);
    fs::remove(d->path() / "cli.log");
  }
  EXPECT_EQ(Hashes(a.path()), Hashes(b.path()));
  EXPECT_TRUE(fs::exists(a / "out/reports/country_bar.png"));
  const auto report = json::parse(ReadFileBytes(a / "out/clean/report.json"));
  EXPECT_EQ(report["removed_duplicates"], 10);
  EXPECT_EQ(report["removed_incomplete"], 5);
  EXPECT_EQ(report["removed_corrupted"], 3);
}

}  // namespace
}  // namespace instasent::service
