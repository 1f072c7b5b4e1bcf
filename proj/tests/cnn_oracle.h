#pragma once

// Reference CNN evaluation with explicit nested vectors indexed [c][y][x].
// Padding is materialized as a zero border rather than bounds checks.

#include <algorithm>
#include <cmath>
#include <vector>

#include "instasent/image_model/cnn.h"

namespace instasent::testing {

using Volume = std::vector<std::vector<std::vector<double>>>;

inline Volume ToVolume(const image_model::FeatureMaps& f) {
  Volume v(f.channels, std::vector<std::vector<double>>(f.height, std::vector<double>(f.width)));
  for (int c = 0; c < f.channels; ++c)
    for (int y = 0; y < f.height; ++y)
      for (int x = 0; x < f.width; ++x) v[c][y][x] = f.data[(c * f.height + y) * f.width + x];
  return v;
}

inline std::vector<double> Flatten(const Volume& v) {
  std::vector<double> out;
  for (const auto& plane : v)
    for (const auto& row : plane) out.insert(out.end(), row.begin(), row.end());
  return out;
}

inline Volume ZeroPad(const Volume& v, int p) {
  if (p == 0) return v;
  const int h = static_cast<int>(v[0].size()), w = static_cast<int>(v[0][0].size());
  Volume out(v.size(), std::vector<std::vector<double>>(h + 2 * p, std::vector<double>(w + 2 * p, 0.0)));
  for (size_t c = 0; c < v.size(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out[c][y + p][x + p] = v[c][y][x];
  return out;
}

inline Volume OracleConvolve(const Volume& in, const std::vector<double>& w, const std::vector<double>& b,
                             int maps_out, int kh, int kw, int stride = 1, int pad = 0) {
  const Volume x = ZeroPad(in, pad);
  const int m_in = static_cast<int>(x.size());
  const int h = static_cast<int>(x[0].size()), wd = static_cast<int>(x[0][0].size());
  const int ho = (h - kh) / stride + 1, wo = (wd - kw) / stride + 1;
  Volume y(maps_out, std::vector<std::vector<double>>(ho, std::vector<double>(wo)));
  for (int n = 0; n < maps_out; ++n)
    for (int r = 0; r < ho; ++r)
      for (int c = 0; c < wo; ++c) {
        double acc = b[n];
        for (int m = 0; m < m_in; ++m)
          for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j)
              acc += w[((n * m_in + m) * kh + i) * kw + j] * x[m][r * stride + i][c * stride + j];
        y[n][r][c] = acc;
      }
  return y;
}

inline void OracleRelu(Volume& v) {
  for (auto& plane : v)
    for (auto& row : plane)
      for (auto& x : row) x = std::max(0.0, x);
}

inline std::vector<double> OracleForward(const image_model::FeatureMaps& input,
                                         const image_model::CnnSpec& spec,
                                         const image_model::CnnParams& params) {
  using image_model::LayerKind;
  Volume v = ToVolume(input);
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& L = spec.layers[l];
    const auto& P = params.layers[l];
    const bool relu = L.activation == image_model::Activation::kRelu;
    switch (L.kind) {
      case LayerKind::kConv:
        v = OracleConvolve(v, P.weight, P.bias, L.maps_out, L.kernel_h, L.kernel_w, L.stride);
        if (relu) OracleRelu(v);
        break;
      case LayerKind::kResidualBlock: {
        const int pad = L.kernel_h / 2;
        Volume a = OracleConvolve(v, P.weight, P.bias, L.maps_out, L.kernel_h, L.kernel_w, 1, pad);
        OracleRelu(a);
        Volume b = OracleConvolve(a, P.weight2, P.bias2, L.maps_out, L.kernel_h, L.kernel_w, 1, pad);
        for (size_t c = 0; c < b.size(); ++c)
          for (size_t y = 0; y < b[c].size(); ++y)
            for (size_t x = 0; x < b[c][y].size(); ++x) b[c][y][x] += v[c][y][x];
        if (relu) OracleRelu(b);
        v = b;
        break;
      }
      case LayerKind::kPool: {
        const int h = static_cast<int>(v[0].size()), w = static_cast<int>(v[0][0].size());
        const int ho = (h - L.kernel_h) / L.stride + 1, wo = (w - L.kernel_w) / L.stride + 1;
        Volume out(v.size(), std::vector<std::vector<double>>(ho, std::vector<double>(wo)));
        for (size_t c = 0; c < v.size(); ++c)
          for (int r = 0; r < ho; ++r)
            for (int q = 0; q < wo; ++q) {
              std::vector<double> window;
              for (int i = 0; i < L.kernel_h; ++i)
                for (int j = 0; j < L.kernel_w; ++j) window.push_back(v[c][r * L.stride + i][q * L.stride + j]);
              double s = 0;
              for (double x : window) s += x;
              out[c][r][q] = L.pool == image_model::PoolMode::kMax
                                 ? *std::max_element(window.begin(), window.end())
                                 : s / static_cast<double>(window.size());
            }
        v = out;
        break;
      }
      case LayerKind::kFlatten: {
        const auto flat = Flatten(v);
        v = Volume(flat.size(), {{0.0}});
        for (size_t i = 0; i < flat.size(); ++i) v[i][0][0] = flat[i];
        break;
      }
      case LayerKind::kDense: {
        const auto x = Flatten(v);
        v = Volume(L.maps_out, {{0.0}});
        for (int o = 0; o < L.maps_out; ++o) {
          double acc = P.bias[o];
          for (size_t i = 0; i < x.size(); ++i) acc += P.weight[o * x.size() + i] * x[i];
          v[o][0][0] = relu ? std::max(0.0, acc) : acc;
        }
        break;
      }
    }
  }
  auto z = Flatten(v);
  double m = z[0];
  for (double x : z) m = std::max(m, x);
  double s = 0;
  for (auto& x : z) s += (x = std::exp(x - m));
  for (auto& x : z) x /= s;
  return z;
}

}  // namespace instasent::testing
