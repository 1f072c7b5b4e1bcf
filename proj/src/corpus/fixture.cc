#include "instasent/corpus/fixture.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "instasent/common/digest.h"
#include "instasent/common/error.h"
#include "instasent/corpus/annotation_store.h"
#include "instasent/corpus/post_io.h"

namespace instasent::corpus {
namespace {

// 2020-02-16T00:00:00Z .. 2020-03-20T23:59:59Z, the collection window.
constexpr UtcSeconds kWindowStart = 1581811200;
constexpr UtcSeconds kWindowEnd = 1584748799;

const std::array<std::vector<std::string_view>, kNumClasses> kClassWords = {{
    {"meme", "lol", "funny", "joke", "toiletpaper", "beer", "hilarious", "prank", "laugh",
     "lmao", "comedy", "haha"},
    {"news", "update", "cases", "report", "wash", "hands", "masks", "awareness", "closure",
     "announcement", "confirmed", "ministry"},
    {"love", "hope", "grateful", "heroes", "thankyou", "reading", "dancing", "together",
     "nostalgia", "support", "smile", "blessed"},
    {"angry", "blame", "conspiracy", "protest", "fear", "freedom", "government", "lies",
     "xenophobia", "outrage", "dying", "shame"},
    {"sale", "discount", "followme", "giveaway", "shop", "promo", "influencer", "brand",
     "skincare", "outfit", "link", "dm"},
}};

const std::vector<std::string_view> kSharedWords = {
    "corona", "coronavirus", "wuhan", "covid19", "quarantine", "today", "people", "world",
    "stay", "home", "day", "city", "virus", "week", "time", "everyone"};

struct City {
  const char* name;
  double lat;
  double lon;
  double weight;
};

// Each city sits well inside its country in the bundled atlas; jitter is kept
// below the clearance.
const City kCities[] = {
    {"Jakarta", -6.2, 106.8, 9},     {"Beijing", 39.9, 116.4, 8},    {"New York", 40.7, -74.0, 8},
    {"Istanbul", 41.0, 29.0, 7},     {"London", 51.5, -0.1, 6},      {"Berlin", 52.5, 13.4, 6},
    {"Kuala Lumpur", 3.1, 101.7, 5}, {"Rome", 41.9, 12.5, 5},        {"Paris", 48.9, 2.35, 4},
    {"Madrid", 40.4, -3.7, 4},       {"Mumbai", 19.1, 72.9, 4},      {"Sao Paulo", -23.5, -46.6, 3},
    {"Tehran", 35.7, 51.4, 3},       {"Toronto", 43.7, -79.4, 3},    {"Sydney", -33.9, 151.2, 2},
    {"Moscow", 55.8, 37.6, 1},       {"Tokyo", 35.7, 139.7, 2},      {"Mexico City", 19.4, -99.1, 2},
    {"Manila", 14.6, 121.0, 2},      {"Seoul", 37.6, 127.0, 2},
};
constexpr double kCityJitter = 0.3;

std::string Pad(int width, long long value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*lld", width, value);
  return buf;
}

std::string Shortcode(Rng& rng) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_-";
  std::string s(11, ' ');
  for (auto& ch : s) ch = kAlphabet[rng.Below(64)];
  return s;
}

SentimentClass DrawClass(Rng& rng) {
  static constexpr double kWeights[] = {0.25, 0.30, 0.20, 0.15, 0.10};
  double u = rng.Uniform();
  for (int c = 0; c < kNumClasses; ++c) {
    if (u < kWeights[c]) return static_cast<SentimentClass>(c + 1);
    u -= kWeights[c];
  }
  return SentimentClass::kRandom;
}

SentimentClass OtherClass(Rng& rng, SentimentClass c) {
  const int shift = 1 + static_cast<int>(rng.Below(kNumClasses - 1));
  return static_cast<SentimentClass>((ToInt(c) - 1 + shift) % kNumClasses + 1);
}

const City& DrawCity(Rng& rng) {
  double total = 0;
  for (const auto& c : kCities) total += c.weight;
  double u = rng.Uniform() * total;
  for (const auto& c : kCities) {
    if (u < c.weight) return c;
    u -= c.weight;
  }
  return kCities[0];
}

// Likes/comments skew by class: negative posts draw relatively more comments.
void DrawEngagement(Rng& rng, SentimentClass c, PostRecord& p) {
  const double scale = std::exp(rng.Uniform(2.0, 7.5));
  double comment_rate = 0.05;
  switch (c) {
    case SentimentClass::kNegative: comment_rate = 0.6; break;
    case SentimentClass::kPositive: comment_rate = 0.03; break;
    case SentimentClass::kNewsNeutral: comment_rate = 0.08; break;
    default: break;
  }
  p.likes_count = static_cast<std::int64_t>(scale);
  p.comments_count = static_cast<std::int64_t>(scale * comment_rate * rng.Uniform(0.5, 1.5));
}

std::string OcrText(Rng& rng, SentimentClass c) {
  const auto& words = kClassWords[ToInt(c) - 1];
  std::string out;
  const int n = rng.IntIn(2, 5);
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += words[rng.Below(words.size())];
  }
  return out;
}

std::string SrtTimestamp(int seconds) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02d:%02d:%02d,000", seconds / 3600, seconds / 60 % 60,
                seconds % 60);
  return buf;
}

// Cues every 40 s; the later ones fall past the two-minute subtitle cap.
std::string Subtitles(Rng& rng, SentimentClass c) {
  std::string out;
  const int cues = rng.IntIn(2, 5);
  for (int i = 0; i < cues; ++i) {
    const int start = i * 40;
    out += std::to_string(i + 1) + "\n" + SrtTimestamp(start) + " --> " + SrtTimestamp(start + 30) +
           "\n" + OcrText(rng, c) + "\n\n";
  }
  return out;
}

std::string GarbageMedia(Rng& rng, MediaKind kind) {
  std::string bytes = kind == MediaKind::kImage ? std::string("\x89PNG\r\n\x1a\n", 8)
                                                : std::string("VSEQ1 3 32 32 1\n");
  const int n = rng.IntIn(16, 64);
  for (int i = 0; i < n; ++i) bytes.push_back(static_cast<char>(rng.Below(256)));
  return bytes;
}

std::string VideoBytes(Rng& rng, SentimentClass c) {
  FrameSequence video;
  video.fps = 1;
  video.frames.push_back(SynthesizeImage(rng, c));
  // Later frames are deliberately unrelated to the label.
  video.frames.push_back(SynthesizeImage(rng, OtherClass(rng, c)));
  video.frames.push_back(SynthesizeImage(rng, OtherClass(rng, c)));
  return EncodeFrameSequence(video);
}

}  // namespace

std::string SynthesizeCaption(Rng& rng, SentimentClass c) {
  const auto& words = kClassWords[ToInt(c) - 1];
  const int len = rng.IntIn(6, 14);
  std::string out;
  for (int i = 0; i < len; ++i) {
    std::string tok(rng.Bernoulli(0.5) ? words[rng.Below(words.size())]
                                       : kSharedWords[rng.Below(kSharedWords.size())]);
    if (rng.Bernoulli(0.1)) std::transform(tok.begin(), tok.end(), tok.begin(), ::toupper);
    if (rng.Bernoulli(0.1)) tok = "#" + tok;
    if (rng.Bernoulli(0.08)) tok += rng.Bernoulli(0.5) ? "!" : ",";
    if (i) out += ' ';
    out += tok;
  }
  return out;
}

Rgb8Image SynthesizeImage(Rng& rng, SentimentClass c) {
  constexpr int kSize = kFixtureImageSize;
  Rgb8Image img(kSize, kSize);
  const int phase = static_cast<int>(rng.Below(8));
  const double jitter = rng.Uniform(-25, 25);
  auto clamp8 = [](double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  };
  for (int y = 0; y < kSize; ++y) {
    for (int x = 0; x < kSize; ++x) {
      double r = 0, g = 0, b = 0;
      switch (c) {
        case SentimentClass::kMemesHumor: {  // bright checkerboard
          const bool on = (((x + phase) / 4) + ((y + phase) / 4)) % 2 == 0;
          r = on ? 240 : 30;
          g = on ? 220 : 30;
          b = on ? 60 : 200;
          break;
        }
        case SentimentClass::kNewsNeutral: {  // blue/white horizontal bands
          const bool on = ((y + phase) / 4) % 2 == 0;
          r = on ? 235 : 40;
          g = on ? 235 : 80;
          b = on ? 235 : 170;
          break;
        }
        case SentimentClass::kPositive: {  // warm radial glow
          const double dx = x - kSize / 2.0 - (phase - 4), dy = y - kSize / 2.0;
          const double t = std::exp(-(dx * dx + dy * dy) / 120.0);
          r = 150 + 100 * t;
          g = 90 + 140 * t;
          b = 40 + 30 * t;
          break;
        }
        case SentimentClass::kNegative: {  // dark with red diagonals
          const bool on = ((x + y + phase) / 3) % 3 == 0;
          r = on ? 190 : 25;
          g = on ? 20 : 15;
          b = on ? 25 : 20;
          break;
        }
        case SentimentClass::kRandom: {  // pastel vertical bands
          const bool on = ((x + phase) / 5) % 2 == 0;
          r = on ? 230 : 180;
          g = on ? 180 : 230;
          b = on ? 220 : 200;
          break;
        }
      }
      img.set(x, y, clamp8(r + jitter + 18 * rng.Normal()), clamp8(g + jitter + 18 * rng.Normal()),
              clamp8(b + jitter + 18 * rng.Normal()));
    }
  }
  return img;
}

FixtureCorpus GenerateFixture(std::uint64_t seed, int n) {
  if (n < 1) throw ArgumentError("fixture size must be >= 1");
  Rng rng(seed);
  FixtureCorpus fx;
  const int dup = n * kDuplicatePerMille / 1000;
  const int incomplete = n * kIncompletePerMille / 1000;
  const int corrupted = n * kCorruptedPerMille / 1000;
  const int unique = n - dup;

  struct Truth {
    SentimentClass image_class, caption_class;
  };
  std::vector<PostRecord> base;
  std::vector<Truth> truth;
  base.reserve(unique);
  int geo_assigned = 0;
  for (int i = 0; i < unique; ++i) {
    PostRecord p;
    p.post_id = "p" + Pad(6, i + 1);
    p.shortcode = Shortcode(rng);
    p.created_at = kWindowStart + static_cast<UtcSeconds>(rng.Below(kWindowEnd - kWindowStart));
    p.media_kind = (i == 1 || (i > 1 && rng.Bernoulli(0.2))) ? MediaKind::kVideo : MediaKind::kImage;
    p.source_url = "https://www.instagram.com/p/" + *p.shortcode + "/";
    p.image_url_low = "https://cdn.example.invalid/" + *p.shortcode + "_s.jpg";
    p.image_url_high = "https://cdn.example.invalid/" + *p.shortcode + "_l.jpg";
    p.owner_id = std::to_string(1000000 + rng.Below(9000000));

    const SentimentClass caption_class =
        i < kNumClasses ? static_cast<SentimentClass>(i + 1) : DrawClass(rng);
    const SentimentClass image_class =
        rng.Bernoulli(0.85) ? caption_class : OtherClass(rng, caption_class);
    truth.push_back({image_class, caption_class});
    p.caption = SynthesizeCaption(rng, caption_class);
    DrawEngagement(rng, caption_class, p);

    if (rng.Bernoulli(0.65)) {
      if (rng.Bernoulli(0.04)) {
        p.location_name = "At sea";
        p.location = GeoPoint{rng.Uniform(-20, 20), rng.Uniform(-170, -140)};
      } else {
        const City& city = geo_assigned < static_cast<int>(std::size(kCities))
                               ? kCities[geo_assigned]
                               : DrawCity(rng);
        ++geo_assigned;
        p.location_name = city.name;
        p.location = GeoPoint{city.lat + rng.Uniform(-kCityJitter, kCityJitter),
                              city.lon + rng.Uniform(-kCityJitter, kCityJitter)};
      }
    }

    const std::string stem = "media/" + p.post_id;
    if (*p.media_kind == MediaKind::kImage) {
      p.media_path = stem + ".png";
      fx.media.push_back({*p.media_path, EncodePng(SynthesizeImage(rng, image_class))});
      if (rng.Bernoulli(0.3)) fx.media.push_back({stem + ".ocr.txt", OcrText(rng, caption_class)});
    } else {
      p.media_path = stem + ".vseq";
      fx.media.push_back({*p.media_path, VideoBytes(rng, image_class)});
      fx.media.push_back({stem + ".srt", Subtitles(rng, caption_class)});
    }
    base.push_back(std::move(p));
  }

  // Injected defects land on distinct records after the class-coverage prefix.
  std::vector<int> pool;
  for (int i = std::min(unique, kNumClasses); i < unique; ++i) pool.push_back(i);
  rng.Shuffle(pool);
  std::vector<bool> damaged(unique, false);
  size_t cursor = 0;
  static constexpr const char* kDroppable[] = {"caption", "likes_count", "shortcode", "created_at",
                                               "comments_count"};
  for (int k = 0; k < incomplete && cursor < pool.size(); ++k, ++cursor) {
    auto& p = base[pool[cursor]];
    damaged[pool[cursor]] = true;
    const std::string_view field = kDroppable[k % std::size(kDroppable)];
    if (field == "caption") p.caption.reset();
    else if (field == "likes_count") p.likes_count.reset();
    else if (field == "shortcode") p.shortcode.reset();
    else if (field == "created_at") p.created_at.reset();
    else p.comments_count.reset();
    ++fx.injected_incomplete;
  }
  for (int k = 0; k < corrupted && cursor < pool.size(); ++k, ++cursor) {
    const auto& p = base[pool[cursor]];
    damaged[pool[cursor]] = true;
    for (auto& f : fx.media)
      if (f.relative_path == *p.media_path) f.bytes = GarbageMedia(rng, *p.media_kind);
    ++fx.injected_corrupted;
  }

  std::vector<int> sources;
  for (int i = 0; i < unique; ++i)
    if (!damaged[i]) sources.push_back(i);
  rng.Shuffle(sources);
  fx.posts = base;
  for (int k = 0; k < dup && !sources.empty(); ++k) {
    const int src = sources[k % sources.size()];
    PostRecord copy = base[src];
    *copy.created_at += 60 + static_cast<UtcSeconds>(rng.Below(86400));
    copy.likes_count = *copy.likes_count + static_cast<std::int64_t>(rng.Below(50));
    const auto orig =
        std::find_if(fx.posts.begin(), fx.posts.end(),
                     [&](const PostRecord& q) { return q.post_id == copy.post_id; }) -
        fx.posts.begin();
    const auto span = static_cast<std::uint64_t>(fx.posts.size() - orig);
    fx.posts.insert(fx.posts.begin() + orig + 1 + static_cast<long>(rng.Below(span)),
                    std::move(copy));
    ++fx.injected_duplicates;
  }

  for (int i = 0; i < unique; ++i) {
    if (damaged[i] || (i >= kNumClasses && !rng.Bernoulli(0.85))) continue;
    Annotation a;
    a.post_id = base[i].post_id;
    a.image_class = truth[i].image_class;
    a.caption_class = truth[i].caption_class;
    a.annotator_id = "fixture";
    a.labeled_at = kWindowEnd + 86400 + i * 60;
    fx.annotations.push_back(std::move(a));
  }
  return fx;
}

void WriteFixture(const FixtureCorpus& fixture, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "media");
  ExportPosts(dir / "posts.jsonl", fixture.posts, PostFormat::kRecordPerLine);
  WriteAnnotations(dir / "annotations.jsonl", fixture.annotations);
  for (const auto& f : fixture.media) WriteFileBytes(dir / f.relative_path, f.bytes);
}

std::vector<LabeledText> GenerateLabeledCaptions(std::uint64_t seed, int count) {
  Rng rng(seed ^ 0x7e57c0de7e57c0deULL);
  std::vector<LabeledText> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const auto c = static_cast<SentimentClass>(i % kNumTrainingClasses + 1);
    out.push_back({c, SynthesizeCaption(rng, c)});
  }
  rng.Shuffle(out);
  return out;
}

std::vector<LabeledImage> GenerateLabeledImages(std::uint64_t seed, int count) {
  Rng rng(seed ^ 0x1ea9e5ca1ea9e5caULL);
  std::vector<LabeledImage> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const auto c = static_cast<SentimentClass>(i % kNumTrainingClasses + 1);
    out.push_back({c, SynthesizeImage(rng, c)});
  }
  rng.Shuffle(out);
  return out;
}

}  // namespace instasent::corpus
