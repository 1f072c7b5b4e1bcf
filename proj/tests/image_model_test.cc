#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cnn_oracle.h"
#include "instasent/common/error.h"
#include "instasent/common/rng.h"
#include "instasent/image_model/cnn.h"

namespace instasent::image_model {
namespace {

using testing::OracleConvolve;
using testing::OracleForward;
using testing::ToVolume;

FeatureMaps RandomMaps(Rng& rng, int c, int h, int w) {
  FeatureMaps f(c, h, w);
  for (auto& v : f.data) v = rng.Uniform(-1, 1);
  return f;
}

std::vector<double> RandomVec(Rng& rng, size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.Uniform(-scale, scale);
  return v;
}

CnnParams RandomParams(const CnnSpec& spec, std::uint64_t seed, double scale = 0.5) {
  auto p = CnnParams::Zeros(spec);
  Rng rng(seed);
  for (auto& L : p.layers)
    for (auto* t : {&L.weight, &L.bias, &L.weight2, &L.bias2})
      for (auto& x : *t) x = rng.Uniform(-scale, scale);
  return p;
}

// 2x6x6 -> conv 2x2 (3, relu) -> residual 3x3 (3, relu) -> pool -> flatten -> dense 4
CnnSpec SmallSpec(PoolMode pool) {
  CnnSpec s;
  s.input = {2, 6, 6};
  s.layers = {
      {LayerKind::kConv, 2, 2, 2, 3, 1, Activation::kRelu},
      {LayerKind::kResidualBlock, 3, 3, 3, 3, 1, Activation::kRelu},
      {LayerKind::kPool, 2, 2, 3, 3, 2, Activation::kNone, pool},
      {LayerKind::kFlatten, 1, 1, 0, 0, 1},
      {LayerKind::kDense, 1, 1, 3 * 2 * 2, 4, 1, Activation::kNone},
  };
  return s;
}

double MaxAbsDiff(const testing::Volume& a, const FeatureMaps& b) {
  double worst = 0;
  const auto flat = testing::Flatten(a);
  EXPECT_EQ(flat.size(), b.size());
  for (size_t i = 0; i < flat.size(); ++i) worst = std::max(worst, std::abs(flat[i] - b.data[i]));
  return worst;
}

TEST(ConvolveTest, MatchesNestedLoopOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = rng.IntIn(1, 3), n = rng.IntIn(1, 4), kh = rng.IntIn(1, 4), kw = rng.IntIn(1, 4);
    const int h = rng.IntIn(kh, 9), w = rng.IntIn(kw, 9), stride = rng.IntIn(1, 2);
    const auto x = RandomMaps(rng, m, h, w);
    const auto wt = RandomVec(rng, static_cast<size_t>(n) * m * kh * kw);
    const auto b = RandomVec(rng, n);
    const auto y = Convolve(x, wt, b, n, kh, kw, stride);
    EXPECT_LT(MaxAbsDiff(OracleConvolve(ToVolume(x), wt, b, n, kh, kw, stride), y), 1e-10);
    const auto yp = Convolve(x, wt, b, n, kh, kw, 1, 1);
    EXPECT_LT(MaxAbsDiff(OracleConvolve(ToVolume(x), wt, b, n, kh, kw, 1, 1), yp), 1e-10);
  }
}

TEST(ConvolveTest, IdentityKernelAndBiasOnly) {
  Rng rng(3);
  const auto x = RandomMaps(rng, 1, 5, 5);
  // 3x3 kernel with a 1 in the centre picks the interior.
  std::vector<double> centre(9, 0.0);
  centre[4] = 1.0;
  const auto y = Convolve(x, centre, std::vector<double>{0.0}, 1, 3, 3);
  ASSERT_EQ(y.height, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(y.at(0, r, c), x.at(0, r + 1, c + 1));
  const auto b = Convolve(x, std::vector<double>(9, 0.0), std::vector<double>{2.5}, 1, 3, 3);
  for (double v : b.data) EXPECT_EQ(v, 2.5);
}

TEST(ConvolveTest, LinearInInput) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x1 = RandomMaps(rng, 2, 6, 7), x2 = RandomMaps(rng, 2, 6, 7);
    const auto w = RandomVec(rng, 3 * 2 * 3 * 3);
    const std::vector<double> zero(3, 0.0);
    const double a = rng.Uniform(-2, 2), c = rng.Uniform(-2, 2);
    FeatureMaps mix(2, 6, 7);
    for (size_t i = 0; i < mix.size(); ++i) mix.data[i] = a * x1.data[i] + c * x2.data[i];
    const auto y1 = Convolve(x1, w, zero, 3, 3, 3), y2 = Convolve(x2, w, zero, 3, 3, 3);
    const auto ym = Convolve(mix, w, zero, 3, 3, 3);
    for (size_t i = 0; i < ym.size(); ++i) EXPECT_NEAR(ym.data[i], a * y1.data[i] + c * y2.data[i], 1e-12);
  }
}

TEST(ConvolveTest, RejectsMismatchedWeights) {
  FeatureMaps x(2, 4, 4);
  EXPECT_THROW(Convolve(x, std::vector<double>(9), std::vector<double>(1), 1, 3, 3), ConfigError);
  EXPECT_THROW(Convolve(x, std::vector<double>(50), std::vector<double>(1), 1, 5, 5), ConfigError);
}

TEST(SpecTest, DeskDefaultShapes) {
  const auto spec = CnnSpec::DeskDefault();
  const auto shapes = spec.LayerShapes();
  EXPECT_EQ(shapes[0], (Shape{8, 30, 30}));
  EXPECT_EQ(shapes[1], (Shape{8, 15, 15}));
  EXPECT_EQ(shapes[2], (Shape{16, 13, 13}));
  EXPECT_EQ(shapes.back(), (Shape{4, 1, 1}));
  EXPECT_EQ(spec.ConvPrefixLength(), 3);
  EXPECT_EQ(CnnSpec::FromJson(spec.ToJson()).ToJson(), spec.ToJson());
}

TEST(SpecTest, ResidualBlockPreservesShapeAndRejectsChannelChange) {
  auto spec = SmallSpec(PoolMode::kMax);
  const auto shapes = spec.LayerShapes();
  EXPECT_EQ(shapes[0], shapes[1]);
  spec.layers[1].maps_out = 4;
  EXPECT_THROW(spec.Validate(), ConfigError);
  spec = SmallSpec(PoolMode::kMax);
  spec.layers[1].kernel_h = spec.layers[1].kernel_w = 2;
  EXPECT_THROW(spec.Validate(), ConfigError);
  spec = SmallSpec(PoolMode::kMax);
  spec.frozen_prefix = 9;
  EXPECT_THROW(spec.Validate(), ConfigError);
  spec = SmallSpec(PoolMode::kMax);
  spec.layers.back().maps_out = 3;
  EXPECT_THROW(spec.Validate(), ConfigError);
  EXPECT_THROW(CnnSpec::FromJson("{\"layers\": 3}"), ConfigError);
}

TEST(ForwardTest, ZeroDenseIsUniform) {
  const auto spec = SmallSpec(PoolMode::kMax);
  auto p = RandomParams(spec, 1);
  std::fill(p.layers.back().weight.begin(), p.layers.back().weight.end(), 0.0);
  std::fill(p.layers.back().bias.begin(), p.layers.back().bias.end(), 0.0);
  Rng rng(2);
  for (double v : Forward(RandomMaps(rng, 2, 6, 6), spec, p)) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(ForwardTest, MatchesLayerByLayerOracle) {
  Rng rng(9);
  for (auto pool : {PoolMode::kMax, PoolMode::kAverage}) {
    const auto spec = SmallSpec(pool);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto p = RandomParams(spec, seed, 1.0);
      const auto x = RandomMaps(rng, 2, 6, 6);
      const auto y = Forward(x, spec, p);
      const auto want = OracleForward(x, spec, p);
      double sum = 0;
      for (size_t k = 0; k < y.size(); ++k) {
        EXPECT_NEAR(y[k], want[k], 1e-8);
        EXPECT_GT(y[k], 0.0);
        sum += y[k];
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
  const auto desk = CnnSpec::DeskDefault();
  const auto p = CnnParams::Initialize(desk, 4);
  const auto x = RandomMaps(rng, 3, 32, 32);
  const auto y = Forward(x, desk, p), want = OracleForward(x, desk, p);
  for (size_t k = 0; k < y.size(); ++k) EXPECT_NEAR(y[k], want[k], 1e-8);
}

TEST(ForwardTest, RejectsWrongInputShape) {
  const auto spec = SmallSpec(PoolMode::kMax);
  EXPECT_THROW(Forward(FeatureMaps(2, 5, 6), spec, RandomParams(spec, 0)), ConfigError);
  auto p = RandomParams(spec, 0);
  p.layers[0].weight.pop_back();
  EXPECT_THROW(Forward(FeatureMaps(2, 6, 6), spec, p), ConfigError);
}

// Coordinates where the central difference moves when the step shrinks tenfold
// have a ReLU or max-pool kink inside the stencil; they are counted in
// *skipped instead of compared.
double WorstGradientError(const CnnSpec& spec, CnnParams p, const FeatureMaps& x, int label,
                          int* checked, int* skipped = nullptr) {
  constexpr double kEps = 1e-5;
  auto grad = CnnParams::Zeros(spec);
  AccumulateGradient(x, label, spec, p, 1.0, grad);
  double worst = 0;
  for (size_t l = 0; l < p.layers.size(); ++l) {
    auto& P = p.layers[l];
    const auto& G = grad.layers[l];
    for (auto [t, g] : {std::pair{&P.weight, &G.weight}, {&P.bias, &G.bias}, {&P.weight2, &G.weight2},
                        {&P.bias2, &G.bias2}}) {
      for (size_t i = 0; i < t->size(); ++i) {
        const double keep = (*t)[i];
        auto central = [&](double eps) {
          (*t)[i] = keep + eps;
          const double up = Loss(x, label, spec, p);
          (*t)[i] = keep - eps;
          const double down = Loss(x, label, spec, p);
          (*t)[i] = keep;
          return (up - down) / (2 * eps);
        };
        const double numeric = central(kEps), analytic = (*g)[i];
        if (skipped) {
          const double fine = central(kEps / 10);
          if (std::abs(fine - numeric) > 1e-5 * std::max({std::abs(fine), std::abs(numeric), 1e-3})) {
            ++*skipped;
            continue;
          }
        }
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
        ++*checked;
      }
    }
  }
  return worst;
}

TEST(GradientTest, TwoByTwoKernelMatchesCentralDifferences) {
  CnnSpec spec;
  spec.input = {1, 3, 3};
  spec.layers = {{LayerKind::kConv, 2, 2, 1, 1, 1, Activation::kNone},
                 {LayerKind::kFlatten, 1, 1, 0, 0, 1},
                 {LayerKind::kDense, 1, 1, 4, 4, 1, Activation::kNone}};
  Rng rng(21);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    EXPECT_LT(WorstGradientError(spec, RandomParams(spec, seed, 1.0), RandomMaps(rng, 1, 3, 3),
                                 static_cast<int>(seed % 4), &checked),
              1e-4);
  EXPECT_EQ(checked, 5 * (4 + 1 + 16 + 4));
}

TEST(GradientTest, EveryTensorMatchesCentralDifferences) {
  Rng rng(17);
  for (auto pool : {PoolMode::kMax, PoolMode::kAverage}) {
    const auto spec = SmallSpec(pool);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      int checked = 0, skipped = 0;
      const auto p = RandomParams(spec, 40 + seed, 0.3);
      const auto x = RandomMaps(rng, 2, 6, 6);
      // The least likely class keeps the loss away from saturation, where
      // central differences drown in rounding.
      const auto y = Forward(x, spec, p);
      const int label = static_cast<int>(std::min_element(y.begin(), y.end()) - y.begin());
      const double worst = WorstGradientError(spec, p, x, label, &checked, &skipped);
      EXPECT_LT(worst, 1e-4) << "seed " << seed;
      EXPECT_GT(checked, 100);
      EXPECT_LE(skipped, 3);
    }
  }
}

std::vector<LabeledMaps> BlobCorpus(std::uint64_t seed, int n) {
  // Class k brightens quadrant k of channel 0.
  Rng rng(seed);
  std::vector<LabeledMaps> out;
  for (int i = 0; i < n; ++i) {
    LabeledMaps ex{RandomMaps(rng, 2, 6, 6), i % 4};
    for (auto& v : ex.input.data) v *= 0.2;
    const int oy = (ex.label / 2) * 3, ox = (ex.label % 2) * 3;
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) ex.input.at(0, oy + y, ox + x) += 1.0;
    out.push_back(std::move(ex));
  }
  return out;
}

TEST(FineTuneTest, FrozenPrefixIsBitIdenticalAndRestLearns) {
  auto spec = SmallSpec(PoolMode::kMax);
  const auto corpus = BlobCorpus(1, 32);
  const auto init = CnnParams::Initialize(spec, 3);
  FineTuneConfig cfg;
  cfg.epochs = 3;

  spec.frozen_prefix = 0;
  auto all = FineTune(corpus, spec, cfg, init);
  for (size_t l = 0; l < spec.layers.size(); ++l)
    if (!init.layers[l].weight.empty()) EXPECT_NE(all.params.layers[l], init.layers[l]) << l;

  spec.frozen_prefix = spec.ConvPrefixLength();
  auto head = FineTune(corpus, spec, cfg, init);
  for (int l = 0; l < spec.frozen_prefix; ++l) EXPECT_EQ(head.params.layers[l], init.layers[l]) << l;
  EXPECT_NE(head.params.layers.back(), init.layers.back());
}

TEST(FineTuneTest, DeterministicAndLossDecreases) {
  const auto spec = SmallSpec(PoolMode::kAverage);
  const auto corpus = BlobCorpus(2, 48);
  FineTuneConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 0.1;
  const auto a = FineTune(corpus, spec, cfg, std::nullopt);
  const auto b = FineTune(corpus, spec, cfg, std::nullopt);
  EXPECT_EQ(a.params, b.params);
  EXPECT_LT(a.history.back().loss, a.initial_loss);
  EXPECT_GE(a.history.back().accuracy, 0.9);
}

TEST(FineTuneTest, RejectsBadInput) {
  const auto spec = SmallSpec(PoolMode::kMax);
  EXPECT_THROW(FineTune({}, spec, {}, std::nullopt), ArgumentError);
  auto corpus = BlobCorpus(1, 4);
  corpus[0].label = 4;
  EXPECT_THROW(FineTune(corpus, spec, {}, std::nullopt), ArgumentError);
  FineTuneConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(FineTune(BlobCorpus(1, 4), spec, cfg, std::nullopt), ArgumentError);
  cfg = {};
  cfg.learning_rate = 1e300;
  EXPECT_THROW(FineTune(BlobCorpus(1, 16), spec, cfg, std::nullopt), NumericError);
}

TEST(EvaluateTest, AccuracyAndShuffleInvariance) {
  // A dense-only network whose argmax is the index of the largest input.
  CnnSpec spec;
  spec.input = {4, 1, 1};
  spec.layers = {{LayerKind::kFlatten, 1, 1, 0, 0, 1}, {LayerKind::kDense, 1, 1, 4, 4, 1}};
  auto p = CnnParams::Zeros(spec);
  for (int i = 0; i < 4; ++i) p.layers[1].weight[i * 4 + i] = 1.0;
  std::vector<LabeledMaps> items;
  for (int i = 0; i < 10; ++i) {
    FeatureMaps f(4, 1, 1);
    f.data[i % 4] = 1.0;
    items.push_back({f, i < 8 ? i % 4 : (i + 1) % 4});
  }
  const auto ev = Evaluate(p, spec, items);
  EXPECT_DOUBLE_EQ(ev.accuracy, 0.8);
  EXPECT_EQ(ev.confusion.Total(), 10);
  Rng rng(1);
  for (int t = 0; t < 5; ++t) {
    rng.Shuffle(items);
    EXPECT_DOUBLE_EQ(Evaluate(p, spec, items).accuracy, 0.8);
  }
  EXPECT_THROW(Evaluate(p, spec, {}), ArgumentError);
}

TEST(CheckpointTest, RoundTripAndRejection) {
  auto spec = SmallSpec(PoolMode::kAverage);
  spec.frozen_prefix = 2;
  const auto p = RandomParams(spec, 5);
  const auto bytes = EncodeCheckpoint(ToCheckpoint(spec, p));
  const auto [spec2, p2] = FromCheckpoint(DecodeCheckpoint(bytes));
  EXPECT_EQ(spec2.ToJson(), spec.ToJson());
  EXPECT_EQ(p2, p);
  auto ck = ToCheckpoint(spec, p);
  ck.tensors[0].values.pop_back();
  ck.tensors[0].dims[0] -= 1;
  EXPECT_THROW(FromCheckpoint(ck), ConfigError);
  ck = ToCheckpoint(spec, p);
  ck.model_kind = "attention_lstm";
  EXPECT_THROW(FromCheckpoint(ck), ConfigError);
}

TEST(ImageToMapsTest, ScalesBytes) {
  Rgb8Image img;
  img.width = 2;
  img.height = 1;
  img.pixels = {255, 0, 51, 0, 255, 102};
  const auto f = ImageToMaps(img);
  EXPECT_EQ(f.channels, 3);
  EXPECT_DOUBLE_EQ(f.at(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(f.at(2, 0, 0), 0.2);
  EXPECT_DOUBLE_EQ(f.at(1, 0, 1), 1.0);
}

}  // namespace
}  // namespace instasent::image_model
