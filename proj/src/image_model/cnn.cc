#include "instasent/image_model/cnn.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "instasent/common/error.h"
#include "instasent/common/rng.h"

namespace instasent::image_model {
namespace {

std::vector<double> Softmax(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> e(z.size());
  double s = 0;
  for (size_t i = 0; i < z.size(); ++i) s += (e[i] = std::exp(z[i] - m));
  for (auto& v : e) v /= s;
  return e;
}

void ApplyActivation(Activation a, std::vector<double>& v) {
  if (a == Activation::kRelu)
    for (auto& x : v) x = x > 0 ? x : 0;
}

// dpre = dpost * act'(pre), computed from the post-activation values.
void ActivationBackward(Activation a, const std::vector<double>& post, std::vector<double>& grad) {
  if (a == Activation::kRelu)
    for (size_t i = 0; i < grad.size(); ++i)
      if (post[i] <= 0) grad[i] = 0;
}

int OutDim(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

void ConvBackward(const FeatureMaps& x, std::span<const double> w, const FeatureMaps& dy, int kh,
                  int kw, int stride, int pad, double* dw, double* db, FeatureMaps* dx) {
  const int M = x.channels, N = dy.channels;
  for (int n = 0; n < N; ++n) {
    for (int yo = 0; yo < dy.height; ++yo) {
      for (int xo = 0; xo < dy.width; ++xo) {
        const double g = dy.at(n, yo, xo);
        if (g == 0) continue;
        db[n] += g;
        for (int m = 0; m < M; ++m) {
          const size_t base = (static_cast<size_t>(n) * M + m) * kh * kw;
          for (int i = 0; i < kh; ++i) {
            const int yi = yo * stride + i - pad;
            if (yi < 0 || yi >= x.height) continue;
            for (int j = 0; j < kw; ++j) {
              const int xi = xo * stride + j - pad;
              if (xi < 0 || xi >= x.width) continue;
              dw[base + i * kw + j] += g * x.at(m, yi, xi);
              if (dx) dx->at(m, yi, xi) += g * w[base + i * kw + j];
            }
          }
        }
      }
    }
  }
}

struct LayerTrace {
  FeatureMaps input;
  FeatureMaps output;  // post-activation
  // residual blocks
  FeatureMaps inner;   // relu(conv1(x))
  // pool: flat index into input of each output's source (max mode)
  std::vector<size_t> argmax;
};

struct ForwardState {
  std::vector<LayerTrace> layers;
  std::vector<double> probabilities;
};

FeatureMaps AsMaps(std::vector<double> v) {
  FeatureMaps f(static_cast<int>(v.size()), 1, 1);
  f.data = std::move(v);
  return f;
}

ForwardState RunForward(const FeatureMaps& input, const CnnSpec& spec, const CnnParams& params) {
  const auto shapes = spec.LayerShapes();
  if (input.channels != spec.input.channels || input.height != spec.input.height ||
      input.width != spec.input.width)
    throw ConfigError("input dimensions do not match the network spec");
  params.Validate(spec);
  ForwardState st;
  st.layers.resize(spec.layers.size());
  FeatureMaps cur = input;
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& L = spec.layers[l];
    const auto& P = params.layers[l];
    auto& T = st.layers[l];
    T.input = cur;
    switch (L.kind) {
      case LayerKind::kConv: {
        T.output = Convolve(cur, P.weight, P.bias, L.maps_out, L.kernel_h, L.kernel_w, L.stride, 0);
        ApplyActivation(L.activation, T.output.data);
        break;
      }
      case LayerKind::kResidualBlock: {
        const int pad = (L.kernel_h - 1) / 2;
        T.inner = Convolve(cur, P.weight, P.bias, L.maps_out, L.kernel_h, L.kernel_w, 1, pad);
        ApplyActivation(Activation::kRelu, T.inner.data);
        T.output = Convolve(T.inner, P.weight2, P.bias2, L.maps_out, L.kernel_h, L.kernel_w, 1, pad);
        for (size_t i = 0; i < T.output.size(); ++i) T.output.data[i] += cur.data[i];
        ApplyActivation(L.activation, T.output.data);
        break;
      }
      case LayerKind::kPool: {
        const Shape& s = shapes[l];
        T.output = FeatureMaps(s.channels, s.height, s.width);
        T.argmax.assign(T.output.size(), 0);
        const double area = static_cast<double>(L.kernel_h * L.kernel_w);
        for (int c = 0; c < s.channels; ++c)
          for (int yo = 0; yo < s.height; ++yo)
            for (int xo = 0; xo < s.width; ++xo) {
              double best = -std::numeric_limits<double>::infinity(), sum = 0;
              size_t best_idx = 0;
              for (int i = 0; i < L.kernel_h; ++i)
                for (int j = 0; j < L.kernel_w; ++j) {
                  const int yi = yo * L.stride + i, xi = xo * L.stride + j;
                  const size_t idx = (static_cast<size_t>(c) * cur.height + yi) * cur.width + xi;
                  const double v = cur.data[idx];
                  sum += v;
                  if (v > best) best = v, best_idx = idx;
                }
              const size_t o = (static_cast<size_t>(c) * s.height + yo) * s.width + xo;
              T.output.data[o] = L.pool == PoolMode::kMax ? best : sum / area;
              T.argmax[o] = best_idx;
            }
        break;
      }
      case LayerKind::kFlatten:
        T.output = AsMaps(cur.data);
        break;
      case LayerKind::kDense: {
        const int in = static_cast<int>(cur.size()), out = L.maps_out;
        std::vector<double> y(P.bias);
        for (int o = 0; o < out; ++o) {
          const double* row = &P.weight[static_cast<size_t>(o) * in];
          double acc = 0;
          for (int i = 0; i < in; ++i) acc += row[i] * cur.data[i];
          y[o] += acc;
        }
        ApplyActivation(L.activation, y);
        T.output = AsMaps(std::move(y));
        break;
      }
    }
    cur = T.output;
  }
  st.probabilities = Softmax(cur.data);
  return st;
}

size_t WeightCount(const LayerSpec& L) {
  switch (L.kind) {
    case LayerKind::kConv:
    case LayerKind::kResidualBlock:
      return static_cast<size_t>(L.maps_out) * L.maps_in * L.kernel_h * L.kernel_w;
    case LayerKind::kDense: return static_cast<size_t>(L.maps_out) * L.maps_in;
    default: return 0;
  }
}

size_t BiasCount(const LayerSpec& L) {
  return (L.kind == LayerKind::kConv || L.kind == LayerKind::kResidualBlock ||
          L.kind == LayerKind::kDense)
             ? static_cast<size_t>(L.maps_out)
             : 0;
}

}  // namespace

FeatureMaps ImageToMaps(const Rgb8Image& image) {
  FeatureMaps f(3, image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) f.at(c, y, x) = image.at(x, y)[c] / 255.0;
  return f;
}

CnnSpec CnnSpec::DeskDefault() {
  CnnSpec s;
  s.input = {3, 32, 32};
  s.layers = {
      {LayerKind::kConv, 3, 3, 3, 8, 1, Activation::kRelu},
      {LayerKind::kPool, 2, 2, 8, 8, 2, Activation::kNone, PoolMode::kMax},
      {LayerKind::kConv, 3, 3, 8, 16, 1, Activation::kRelu},
      {LayerKind::kFlatten, 1, 1, 16, 16 * 13 * 13, 1},
      {LayerKind::kDense, 1, 1, 16 * 13 * 13, kNumClasses, 1, Activation::kNone},
  };
  return s;
}

int CnnSpec::ConvPrefixLength() const {
  int last = 0;
  for (size_t i = 0; i < layers.size(); ++i)
    if (layers[i].kind == LayerKind::kConv || layers[i].kind == LayerKind::kResidualBlock)
      last = static_cast<int>(i) + 1;
  return last;
}

std::vector<Shape> CnnSpec::LayerShapes() const {
  auto fail = [](size_t l, const std::string& why) -> void {
    throw ConfigError("layer " + std::to_string(l) + ": " + why);
  };
  if (input.channels < 1 || input.height < 1 || input.width < 1) throw ConfigError("empty input shape");
  if (layers.empty()) throw ConfigError("network has no layers");
  if (frozen_prefix < 0 || frozen_prefix > static_cast<int>(layers.size()))
    throw ConfigError("frozen_prefix exceeds the layer count");
  std::vector<Shape> out;
  Shape cur = input;
  for (size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    if (L.stride < 1) fail(l, "stride must be >= 1");
    switch (L.kind) {
      case LayerKind::kConv:
        if (L.maps_in != cur.channels) fail(l, "maps_in does not match incoming channels");
        if (L.maps_out < 1 || L.kernel_h < 1 || L.kernel_w < 1) fail(l, "bad conv geometry");
        if (L.kernel_h > cur.height || L.kernel_w > cur.width) fail(l, "kernel larger than input");
        cur = {L.maps_out, OutDim(cur.height, L.kernel_h, L.stride, 0),
               OutDim(cur.width, L.kernel_w, L.stride, 0)};
        break;
      case LayerKind::kResidualBlock:
        if (L.maps_in != cur.channels || L.maps_out != cur.channels)
          fail(l, "residual block must preserve the channel count");
        if (L.kernel_h % 2 == 0 || L.kernel_w % 2 == 0 || L.kernel_h != L.kernel_w)
          fail(l, "residual block needs an odd square kernel");
        if (L.stride != 1) fail(l, "residual block stride must be 1");
        break;
      case LayerKind::kPool:
        if (L.kernel_h < 1 || L.kernel_w < 1 || L.kernel_h > cur.height || L.kernel_w > cur.width)
          fail(l, "bad pooling window");
        cur = {cur.channels, OutDim(cur.height, L.kernel_h, L.stride, 0),
               OutDim(cur.width, L.kernel_w, L.stride, 0)};
        break;
      case LayerKind::kFlatten:
        cur = {cur.size(), 1, 1};
        break;
      case LayerKind::kDense:
        if (L.maps_in != cur.size()) fail(l, "dense maps_in does not match incoming features");
        if (L.maps_out < 1) fail(l, "dense layer needs outputs");
        cur = {L.maps_out, 1, 1};
        break;
    }
    out.push_back(cur);
  }
  if (layers.back().kind != LayerKind::kDense || layers.back().maps_out != num_classes)
    throw ConfigError("network must end in a dense layer with num_classes outputs");
  return out;
}

CnnParams CnnParams::Zeros(const CnnSpec& spec) {
  spec.Validate();
  CnnParams p;
  for (const auto& L : spec.layers) {
    LayerParams lp;
    lp.weight.assign(WeightCount(L), 0.0);
    lp.bias.assign(BiasCount(L), 0.0);
    if (L.kind == LayerKind::kResidualBlock) {
      lp.weight2.assign(WeightCount(L), 0.0);
      lp.bias2.assign(BiasCount(L), 0.0);
    }
    p.layers.push_back(std::move(lp));
  }
  return p;
}

CnnParams CnnParams::Initialize(const CnnSpec& spec, std::uint64_t seed) {
  auto p = Zeros(spec);
  Rng rng(seed);
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& L = spec.layers[l];
    const double fan_in = L.kind == LayerKind::kDense
                              ? L.maps_in
                              : static_cast<double>(L.maps_in) * L.kernel_h * L.kernel_w;
    if (fan_in <= 0) continue;
    const double limit = std::sqrt(6.0 / fan_in);
    for (auto& w : p.layers[l].weight) w = rng.Uniform(-limit, limit);
    // Second residual conv starts small so the block begins near identity.
    for (auto& w : p.layers[l].weight2) w = 0.1 * rng.Uniform(-limit, limit);
  }
  return p;
}

void CnnParams::Validate(const CnnSpec& spec) const {
  if (layers.size() != spec.layers.size()) throw ConfigError("parameter/spec layer count mismatch");
  for (size_t l = 0; l < layers.size(); ++l) {
    const auto& L = spec.layers[l];
    const auto& P = layers[l];
    const bool res = L.kind == LayerKind::kResidualBlock;
    if (P.weight.size() != WeightCount(L) || P.bias.size() != BiasCount(L) ||
        P.weight2.size() != (res ? WeightCount(L) : 0) || P.bias2.size() != (res ? BiasCount(L) : 0))
      throw ConfigError("layer " + std::to_string(l) + " tensor sizes do not match the spec");
    for (const auto* v : {&P.weight, &P.bias, &P.weight2, &P.bias2})
      for (double x : *v)
        if (!std::isfinite(x)) throw ConfigError("non-finite parameter in layer " + std::to_string(l));
  }
}

FeatureMaps Convolve(const FeatureMaps& x, std::span<const double> weights,
                     std::span<const double> bias, int maps_out, int kernel_h, int kernel_w,
                     int stride, int padding) {
  const int M = x.channels;
  if (maps_out < 1 || kernel_h < 1 || kernel_w < 1 || stride < 1 || padding < 0)
    throw ConfigError("bad convolution geometry");
  if (weights.size() != static_cast<size_t>(maps_out) * M * kernel_h * kernel_w)
    throw ConfigError("convolution weights do not match maps_out x maps_in x kernel");
  if (bias.size() != static_cast<size_t>(maps_out)) throw ConfigError("convolution bias size mismatch");
  if (x.data.size() != static_cast<size_t>(M) * x.height * x.width)
    throw ConfigError("feature map storage does not match its dimensions");
  if (x.height + 2 * padding < kernel_h || x.width + 2 * padding < kernel_w)
    throw ConfigError("kernel larger than input");
  const int ho = OutDim(x.height, kernel_h, stride, padding);
  const int wo = OutDim(x.width, kernel_w, stride, padding);
  FeatureMaps y(maps_out, ho, wo);
  for (int n = 0; n < maps_out; ++n) {
    for (int yo = 0; yo < ho; ++yo) {
      for (int xo = 0; xo < wo; ++xo) {
        double acc = bias[n];
        for (int m = 0; m < M; ++m) {
          const double* w = &weights[(static_cast<size_t>(n) * M + m) * kernel_h * kernel_w];
          for (int i = 0; i < kernel_h; ++i) {
            const int yi = yo * stride + i - padding;
            if (yi < 0 || yi >= x.height) continue;
            for (int j = 0; j < kernel_w; ++j) {
              const int xi = xo * stride + j - padding;
              if (xi < 0 || xi >= x.width) continue;
              acc += w[i * kernel_w + j] * x.at(m, yi, xi);
            }
          }
        }
        y.at(n, yo, xo) = acc;
      }
    }
  }
  return y;
}

std::vector<double> Forward(const FeatureMaps& input, const CnnSpec& spec, const CnnParams& params) {
  return RunForward(input, spec, params).probabilities;
}

std::vector<double> Forward(const Rgb8Image& image, const CnnSpec& spec, const CnnParams& params) {
  return Forward(ImageToMaps(image), spec, params);
}

int Predict(const FeatureMaps& input, const CnnSpec& spec, const CnnParams& params) {
  const auto y = Forward(input, spec, params);
  return static_cast<int>(std::max_element(y.begin(), y.end()) - y.begin());
}

double Loss(const FeatureMaps& input, int label, const CnnSpec& spec, const CnnParams& params) {
  return -std::log(Forward(input, spec, params)[label]);
}

double AccumulateGradient(const FeatureMaps& input, int label, const CnnSpec& spec,
                          const CnnParams& params, double scale, CnnParams& grad) {
  const auto st = RunForward(input, spec, params);
  std::vector<double> g = st.probabilities;
  g[label] -= 1.0;
  for (auto& v : g) v *= scale;
  FeatureMaps dout = AsMaps(std::move(g));
  // Backpropagation stops below the lowest layer that needs a gradient.
  for (size_t li = spec.layers.size(); li-- > 0;) {
    const auto& L = spec.layers[li];
    const auto& P = params.layers[li];
    auto& G = grad.layers[li];
    const auto& T = st.layers[li];
    const bool need_input_grad = li > 0;
    FeatureMaps din(T.input.channels, T.input.height, T.input.width);
    switch (L.kind) {
      case LayerKind::kDense: {
        ActivationBackward(L.activation, T.output.data, dout.data);
        const int in = static_cast<int>(T.input.size()), out = L.maps_out;
        for (int o = 0; o < out; ++o) {
          const double go = dout.data[o];
          G.bias[o] += go;
          if (go == 0) continue;
          double* gw = &G.weight[static_cast<size_t>(o) * in];
          const double* w = &P.weight[static_cast<size_t>(o) * in];
          for (int i = 0; i < in; ++i) {
            gw[i] += go * T.input.data[i];
            din.data[i] += go * w[i];
          }
        }
        break;
      }
      case LayerKind::kFlatten:
        din.data = dout.data;
        break;
      case LayerKind::kPool: {
        const double area = static_cast<double>(L.kernel_h * L.kernel_w);
        for (int c = 0; c < T.output.channels; ++c)
          for (int yo = 0; yo < T.output.height; ++yo)
            for (int xo = 0; xo < T.output.width; ++xo) {
              const size_t o = (static_cast<size_t>(c) * T.output.height + yo) * T.output.width + xo;
              if (L.pool == PoolMode::kMax) {
                din.data[T.argmax[o]] += dout.data[o];
                continue;
              }
              for (int i = 0; i < L.kernel_h; ++i)
                for (int j = 0; j < L.kernel_w; ++j)
                  din.at(c, yo * L.stride + i, xo * L.stride + j) += dout.data[o] / area;
            }
        break;
      }
      case LayerKind::kConv: {
        ActivationBackward(L.activation, T.output.data, dout.data);
        ConvBackward(T.input, P.weight, dout, L.kernel_h, L.kernel_w, L.stride, 0, G.weight.data(),
                     G.bias.data(), need_input_grad ? &din : nullptr);
        break;
      }
      case LayerKind::kResidualBlock: {
        ActivationBackward(L.activation, T.output.data, dout.data);
        const int pad = (L.kernel_h - 1) / 2;
        FeatureMaps dinner(T.inner.channels, T.inner.height, T.inner.width);
        ConvBackward(T.inner, P.weight2, dout, L.kernel_h, L.kernel_w, 1, pad, G.weight2.data(),
                     G.bias2.data(), &dinner);
        ActivationBackward(Activation::kRelu, T.inner.data, dinner.data);
        ConvBackward(T.input, P.weight, dinner, L.kernel_h, L.kernel_w, 1, pad, G.weight.data(),
                     G.bias.data(), need_input_grad ? &din : nullptr);
        for (size_t i = 0; i < din.size(); ++i) din.data[i] += dout.data[i];
        break;
      }
    }
    dout = std::move(din);
  }
  return -std::log(st.probabilities[label]);
}

}  // namespace instasent::image_model
