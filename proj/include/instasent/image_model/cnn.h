#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "instasent/common/checkpoint.h"
#include "instasent/common/metrics.h"
#include "instasent/common/raster.h"

namespace instasent::image_model {

inline constexpr int kNumClasses = 4;

// Channel-major stack of 2-D feature maps: data[(c * height + y) * width + x].
struct FeatureMaps {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FeatureMaps() = default;
  FeatureMaps(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), data(static_cast<size_t>(c) * h * w, fill) {}

  double& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t size() const { return data.size(); }
};

// RGB bytes scaled to [0, 1] per channel.
FeatureMaps ImageToMaps(const Rgb8Image& image);

enum class LayerKind { kConv, kPool, kResidualBlock, kFlatten, kDense };
enum class Activation { kNone, kRelu };
enum class PoolMode { kMax, kAverage };

struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  int kernel_h = 1;
  int kernel_w = 1;
  int maps_in = 0;   // input channels (conv, residual) or input features (dense)
  int maps_out = 0;  // output channels (conv, residual) or output features (dense)
  int stride = 1;
  Activation activation = Activation::kNone;
  PoolMode pool = PoolMode::kMax;  // pool layers only; window is kernel_h x kernel_w
};

struct Shape {
  int channels = 0, height = 0, width = 0;
  int size() const { return channels * height * width; }
  bool operator==(const Shape&) const = default;
};

// Layer stack ending in a dense layer with num_classes outputs, followed by a
// softmax. Conv layers are valid (unpadded) cross-correlations; residual
// blocks are conv-relu-conv with same padding plus the identity skip.
struct CnnSpec {
  Shape input{3, 32, 32};
  std::vector<LayerSpec> layers;
  int frozen_prefix = 0;  // leading layers held fixed by FineTune
  int num_classes = kNumClasses;

  // 32x32x3 -> conv 3x3 (8, relu) -> max pool 2x2 -> conv 3x3 (16, relu)
  // -> flatten -> dense 4.
  static CnnSpec DeskDefault();
  // Index one past the last conv or residual layer.
  int ConvPrefixLength() const;

  // Output shape of every layer. Throws ConfigError if adjacent layers are
  // incompatible, frozen_prefix exceeds the layer count, or the head is not
  // a dense layer with num_classes outputs.
  std::vector<Shape> LayerShapes() const;
  void Validate() const { LayerShapes(); }

  std::string ToJson() const;
  static CnnSpec FromJson(const std::string& text);  // throws ConfigError
};

// Learnable tensors for one layer. Conv weights are laid out
// [maps_out][maps_in][kernel_h][kernel_w]; dense weights [out][in]. Residual
// blocks use weight/bias for the first conv and weight2/bias2 for the second.
struct LayerParams {
  std::vector<double> weight;
  std::vector<double> bias;
  std::vector<double> weight2;
  std::vector<double> bias2;
  bool operator==(const LayerParams&) const = default;
};

struct CnnParams {
  std::vector<LayerParams> layers;

  // He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
  static CnnParams Initialize(const CnnSpec& spec, std::uint64_t seed);
  static CnnParams Zeros(const CnnSpec& spec);
  // Throws ConfigError when tensor sizes disagree with the spec or a value is
  // not finite.
  void Validate(const CnnSpec& spec) const;
  bool operator==(const CnnParams&) const = default;
};

// y_n = sum_m w_{n,m} * x_m + b_n with * the cross-correlation of each input
// map with its kernel. Output is ((H + 2p - kh) / s + 1) x ((W + 2p - kw) / s + 1).
// Throws ConfigError on size mismatches.
FeatureMaps Convolve(const FeatureMaps& x, std::span<const double> weights,
                     std::span<const double> bias, int maps_out, int kernel_h, int kernel_w,
                     int stride = 1, int padding = 0);

std::vector<double> Forward(const FeatureMaps& input, const CnnSpec& spec, const CnnParams& params);
std::vector<double> Forward(const Rgb8Image& image, const CnnSpec& spec, const CnnParams& params);
int Predict(const FeatureMaps& input, const CnnSpec& spec, const CnnParams& params);

double Loss(const FeatureMaps& input, int label, const CnnSpec& spec, const CnnParams& params);
// Adds scale * d(-log y[label])/d(params) into grad (same shapes as params).
// Returns the loss.
double AccumulateGradient(const FeatureMaps& input, int label, const CnnSpec& spec,
                          const CnnParams& params, double scale, CnnParams& grad);

struct LabeledMaps {
  FeatureMaps input;
  int label = 0;  // 0-based training class
};

struct FineTuneConfig {
  std::uint64_t seed = 7;
  double learning_rate = 0.05;
  int epochs = 10;
  int batch_size = 8;
  void Validate() const;  // throws ArgumentError
};

struct EpochStats {
  int epoch = 0;
  double loss = 0;
  double accuracy = 0;
};

struct FineTuneResult {
  CnnParams params;
  double initial_loss = 0;
  std::vector<EpochStats> history;
};

// Minibatch gradient descent on mean cross-entropy; the first
// spec.frozen_prefix layers are never written. Starts from init when given,
// otherwise from Initialize(spec, seed). Throws ArgumentError for an empty
// corpus or bad labels, NumericError on a non-finite loss.
FineTuneResult FineTune(const std::vector<LabeledMaps>& corpus, const CnnSpec& spec,
                        const FineTuneConfig& config, const std::optional<CnnParams>& init);

double MeanLoss(const std::vector<LabeledMaps>& corpus, const CnnSpec& spec, const CnnParams& params);
Evaluation Evaluate(const CnnParams& params, const CnnSpec& spec, const std::vector<LabeledMaps>& labeled);

// model_kind "cnn"; the spec travels as JSON metadata. Tensor names are
// "layer<i>.weight", "layer<i>.bias" (and "...weight2"/"...bias2").
Checkpoint ToCheckpoint(const CnnSpec& spec, const CnnParams& params);
std::pair<CnnSpec, CnnParams> FromCheckpoint(const Checkpoint& ckpt);

}  // namespace instasent::image_model
