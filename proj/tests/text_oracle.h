#pragma once

// Straight-line reference evaluation of the attention-LSTM classifier using
// nested loops over plain vectors. Reads parameter entries by index only; no
// Eigen arithmetic, so it shares no code path with the implementation.

#include <cmath>
#include <vector>

#include "instasent/text_model/attention_lstm.h"

namespace instasent::testing {

using Grid = std::vector<std::vector<double>>;  // [row][col]

inline Grid ToGrid(const text_model::Matrix& m) {
  Grid g(m.rows(), std::vector<double>(m.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
  return g;
}

inline std::vector<double> ToVec(const text_model::Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline std::vector<double> MatVec(const Grid& m, const std::vector<double>& x) {
  std::vector<double> y(m.size(), 0.0);
  for (size_t i = 0; i < m.size(); ++i)
    for (size_t j = 0; j < x.size(); ++j) y[i] += m[i][j] * x[j];
  return y;
}

inline std::vector<double> NaiveSoftmax(const std::vector<double>& z) {
  double m = z[0];
  for (double v : z) m = v > m ? v : m;
  std::vector<double> e(z.size());
  double s = 0;
  for (size_t i = 0; i < z.size(); ++i) s += (e[i] = std::exp(z[i] - m));
  for (auto& v : e) v /= s;
  return e;
}

struct OracleAttention {
  std::vector<double> alpha;
  std::vector<double> r;
};

// M = tanh([W_h H ; W_v v_a (x) e_N]), alpha = softmax(w^T M), r = H alpha^T,
// with H given as d x N.
inline OracleAttention OracleAttend(const Grid& H, const std::vector<double>& va,
                                    const text_model::AttentionLstmParams& p) {
  const Grid Wh = ToGrid(p.hidden_projection);
  const Grid Wv = ToGrid(p.aspect_projection);
  const auto w = ToVec(p.score_weight);
  const size_t d = H.size(), N = H[0].size(), da = va.size();
  // Build M explicitly, (d + da) x N.
  Grid M(d + da, std::vector<double>(N, 0.0));
  for (size_t i = 0; i < d; ++i)
    for (size_t n = 0; n < N; ++n) {
      double acc = 0;
      for (size_t k = 0; k < d; ++k) acc += Wh[i][k] * H[k][n];
      M[i][n] = std::tanh(acc);
    }
  const auto wv_va = MatVec(Wv, va);
  for (size_t i = 0; i < da; ++i)
    for (size_t n = 0; n < N; ++n) M[d + i][n] = std::tanh(wv_va[i] * 1.0 /* e_N[n] */);
  std::vector<double> scores(N, 0.0);
  for (size_t n = 0; n < N; ++n)
    for (size_t i = 0; i < d + da; ++i) scores[n] += w[i] * M[i][n];
  OracleAttention out;
  out.alpha = NaiveSoftmax(scores);
  out.r.assign(d, 0.0);
  for (size_t i = 0; i < d; ++i)
    for (size_t n = 0; n < N; ++n) out.r[i] += H[i][n] * out.alpha[n];
  return out;
}

inline double Sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Full forward pass: LSTM over [E[tok]; v_a], attention, h*, softmax head.
inline std::vector<double> OracleForward(std::vector<int> tokens,
                                         const text_model::AttentionLstmParams& p) {
  if (tokens.empty()) tokens = {0};
  const Grid E = ToGrid(p.embedding), W = ToGrid(p.gate_input_weight),
             U = ToGrid(p.gate_recurrent_weight), Wp = ToGrid(p.pooled_projection),
             Wx = ToGrid(p.last_state_projection), Ws = ToGrid(p.classifier_weight);
  const auto b = ToVec(p.gate_bias), va = ToVec(p.aspect), bs = ToVec(p.classifier_bias);
  const size_t d = p.hidden_projection.rows(), N = tokens.size();
  Grid H(d, std::vector<double>(N, 0.0));
  std::vector<double> h(d, 0.0), c(d, 0.0);
  for (size_t t = 0; t < N; ++t) {
    std::vector<double> x = E[tokens[t]];
    x.insert(x.end(), va.begin(), va.end());
    std::vector<double> z(4 * d, 0.0);
    for (size_t r = 0; r < 4 * d; ++r) {
      z[r] = b[r];
      for (size_t k = 0; k < x.size(); ++k) z[r] += W[r][k] * x[k];
      for (size_t k = 0; k < d; ++k) z[r] += U[r][k] * h[k];
    }
    for (size_t k = 0; k < d; ++k) {
      const double ig = Sigm(z[k]), fg = Sigm(z[d + k]), og = Sigm(z[2 * d + k]),
                   gg = std::tanh(z[3 * d + k]);
      c[k] = fg * c[k] + ig * gg;
      h[k] = og * std::tanh(c[k]);
      H[k][t] = h[k];
    }
  }
  const auto att = OracleAttend(H, va, p);
  std::vector<double> hstar(d);
  const auto a = MatVec(Wp, att.r), bx = MatVec(Wx, h);
  for (size_t i = 0; i < d; ++i) hstar[i] = std::tanh(a[i] + bx[i]);
  auto logits = MatVec(Ws, hstar);
  for (size_t i = 0; i < logits.size(); ++i) logits[i] += bs[i];
  return NaiveSoftmax(logits);
}

// Relative error used by every gradient check: |a - n| / max(|a|, |n|, 1e-8).
inline double RelativeError(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}

}  // namespace instasent::testing
