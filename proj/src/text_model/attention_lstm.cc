#include "instasent/text_model/attention_lstm.h"

#include <cmath>
#include <cstring>
#include <sstream>

#include "instasent/common/error.h"
#include "instasent/common/rng.h"

namespace instasent::text_model {
namespace {

Vector Softmax(const Vector& z) {
  const double m = z.maxCoeff();
  Vector e = (z.array() - m).exp();
  return e / e.sum();
}

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void FillUniform(Rng& rng, double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) data[i] = rng.Uniform(-0.3, 0.3);
}

void CheckShape(const char* name, Eigen::Index rows, Eigen::Index cols, Eigen::Index want_rows,
                Eigen::Index want_cols) {
  if (rows != want_rows || cols != want_cols) {
    std::ostringstream msg;
    msg << name << " is " << rows << "x" << cols << ", expected " << want_rows << "x" << want_cols;
    throw ConfigError(msg.str());
  }
}

}  // namespace

AttentionLstmParams AttentionLstmParams::Zeros(const ModelDims& d) {
  if (d.vocab_size < 2 || d.word_dim < 1 || d.hidden_dim < 1 || d.aspect_dim < 1 ||
      d.num_classes < 2)
    throw ConfigError("invalid model dimensions");
  const int h = d.hidden_dim;
  AttentionLstmParams p;
  p.embedding = Matrix::Zero(d.vocab_size, d.word_dim);
  p.aspect = Vector::Zero(d.aspect_dim);
  p.gate_input_weight = Matrix::Zero(4 * h, d.word_dim + d.aspect_dim);
  p.gate_recurrent_weight = Matrix::Zero(4 * h, h);
  p.gate_bias = Vector::Zero(4 * h);
  p.hidden_projection = Matrix::Zero(h, h);
  p.aspect_projection = Matrix::Zero(d.aspect_dim, d.aspect_dim);
  p.score_weight = Vector::Zero(h + d.aspect_dim);
  p.pooled_projection = Matrix::Zero(h, h);
  p.last_state_projection = Matrix::Zero(h, h);
  p.classifier_weight = Matrix::Zero(d.num_classes, h);
  p.classifier_bias = Vector::Zero(d.num_classes);
  return p;
}

AttentionLstmParams AttentionLstmParams::Initialize(const ModelDims& dims, std::uint64_t seed) {
  auto p = Zeros(dims);
  Rng rng(seed);
  p.ForEachTensor([&](const std::string& name, double* data, Eigen::Index n) {
    if (name == "gate_bias" || name == "classifier_bias") return;
    FillUniform(rng, data, n);
  });
  return p;
}

ModelDims AttentionLstmParams::dims() const {
  return {static_cast<int>(embedding.rows()), static_cast<int>(embedding.cols()),
          static_cast<int>(hidden_projection.rows()), static_cast<int>(aspect.size()),
          static_cast<int>(classifier_bias.size())};
}

void AttentionLstmParams::Validate() const {
  const auto d = dims();
  const int h = d.hidden_dim, a = d.aspect_dim;
  if (d.vocab_size < 2 || d.word_dim < 1 || h < 1 || a < 1 || d.num_classes < 2)
    throw ConfigError("degenerate model dimensions");
  CheckShape("gate_input_weight", gate_input_weight.rows(), gate_input_weight.cols(), 4 * h,
             d.word_dim + a);
  CheckShape("gate_recurrent_weight", gate_recurrent_weight.rows(), gate_recurrent_weight.cols(),
             4 * h, h);
  CheckShape("gate_bias", gate_bias.size(), 1, 4 * h, 1);
  CheckShape("hidden_projection", hidden_projection.rows(), hidden_projection.cols(), h, h);
  CheckShape("aspect_projection", aspect_projection.rows(), aspect_projection.cols(), a, a);
  CheckShape("score_weight", score_weight.size(), 1, h + a, 1);
  CheckShape("pooled_projection", pooled_projection.rows(), pooled_projection.cols(), h, h);
  CheckShape("last_state_projection", last_state_projection.rows(), last_state_projection.cols(),
             h, h);
  CheckShape("classifier_weight", classifier_weight.rows(), classifier_weight.cols(),
             d.num_classes, h);
  ForEachTensor([](const std::string& name, const double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i)
      if (!std::isfinite(data[i])) throw ConfigError("non-finite value in " + name);
  });
}

void AttentionLstmParams::ForEachTensor(
    const std::function<void(const std::string&, double*, Eigen::Index)>& fn) {
  fn("embedding", embedding.data(), embedding.size());
  fn("aspect", aspect.data(), aspect.size());
  fn("gate_input_weight", gate_input_weight.data(), gate_input_weight.size());
  fn("gate_recurrent_weight", gate_recurrent_weight.data(), gate_recurrent_weight.size());
  fn("gate_bias", gate_bias.data(), gate_bias.size());
  fn("hidden_projection", hidden_projection.data(), hidden_projection.size());
  fn("aspect_projection", aspect_projection.data(), aspect_projection.size());
  fn("score_weight", score_weight.data(), score_weight.size());
  fn("pooled_projection", pooled_projection.data(), pooled_projection.size());
  fn("last_state_projection", last_state_projection.data(), last_state_projection.size());
  fn("classifier_weight", classifier_weight.data(), classifier_weight.size());
  fn("classifier_bias", classifier_bias.data(), classifier_bias.size());
}

void AttentionLstmParams::ForEachTensor(
    const std::function<void(const std::string&, const double*, Eigen::Index)>& fn) const {
  const_cast<AttentionLstmParams*>(this)->ForEachTensor(
      [&](const std::string& name, double* data, Eigen::Index n) { fn(name, data, n); });
}

bool AttentionLstmParams::operator==(const AttentionLstmParams& o) const {
  if (dims() != o.dims()) return false;
  std::vector<const double*> mine;
  std::vector<Eigen::Index> sizes;
  ForEachTensor([&](const std::string&, const double* p, Eigen::Index n) {
    mine.push_back(p);
    sizes.push_back(n);
  });
  size_t k = 0;
  bool same = true;
  o.ForEachTensor([&](const std::string&, const double* p, Eigen::Index n) {
    if (n != sizes[k] || std::memcmp(p, mine[k], sizeof(double) * n) != 0) same = false;
    ++k;
  });
  return same;
}

std::string ToString(FrozenSet f) {
  switch (f) {
    case FrozenSet::kNone: return "none";
    case FrozenSet::kEmbeddings: return "embeddings";
    case FrozenSet::kEmbeddingsLstm: return "embeddings+lstm";
  }
  return "?";
}

std::optional<FrozenSet> ParseFrozenSet(std::string_view text) {
  if (text == "none") return FrozenSet::kNone;
  if (text == "embeddings") return FrozenSet::kEmbeddings;
  if (text == "embeddings+lstm") return FrozenSet::kEmbeddingsLstm;
  return std::nullopt;
}

bool IsFrozen(FrozenSet frozen, const std::string& name) {
  if (frozen == FrozenSet::kNone) return false;
  if (name == "embedding" || name == "aspect") return true;
  return frozen == FrozenSet::kEmbeddingsLstm &&
         (name == "gate_input_weight" || name == "gate_recurrent_weight" || name == "gate_bias");
}

AttentionOutput Attend(const Matrix& hidden, const Vector& aspect, const AttentionLstmParams& p) {
  const Eigen::Index d = p.hidden_projection.rows();
  const Eigen::Index da = p.aspect_projection.rows();
  const Eigen::Index n = hidden.cols();
  if (n == 0) throw ConfigError("attention over an empty sequence");
  CheckShape("hidden states", hidden.rows(), 1, d, 1);
  CheckShape("aspect", aspect.size(), 1, da, 1);
  CheckShape("score_weight", p.score_weight.size(), 1, d + da, 1);
  CheckShape("aspect_projection", p.aspect_projection.rows(), p.aspect_projection.cols(), da, da);
  CheckShape("hidden_projection", p.hidden_projection.rows(), p.hidden_projection.cols(), d, d);

  // w^T M splits into a per-column hidden term and a constant aspect term.
  const Matrix top = (p.hidden_projection * hidden).array().tanh();
  const Vector bottom = (p.aspect_projection * aspect).array().tanh();
  const Vector scores =
      (top.transpose() * p.score_weight.head(d)).array() + p.score_weight.tail(da).dot(bottom);
  AttentionOutput out;
  out.weights = Softmax(scores);
  out.pooled = hidden * out.weights;
  return out;
}

ForwardTrace ForwardWithTrace(const std::vector<int>& tokens, const AttentionLstmParams& p) {
  const auto dims = p.dims();
  const int h = dims.hidden_dim, dw = dims.word_dim, da = dims.aspect_dim;
  ForwardTrace t;
  t.tokens = tokens.empty() ? std::vector<int>{Vocabulary::kPad} : tokens;
  const auto n = static_cast<Eigen::Index>(t.tokens.size());

  t.inputs.resize(dw + da, n);
  t.gates.resize(4 * h, n);
  t.cells.resize(h, n);
  t.hidden.resize(h, n);
  Vector h_prev = Vector::Zero(h), c_prev = Vector::Zero(h);
  for (Eigen::Index s = 0; s < n; ++s) {
    const int tok = t.tokens[s];
    if (tok < 0 || tok >= dims.vocab_size) throw ConfigError("token index outside vocabulary");
    t.inputs.col(s).head(dw) = p.embedding.row(tok).transpose();
    t.inputs.col(s).tail(da) = p.aspect;
    Vector z = p.gate_input_weight * t.inputs.col(s) + p.gate_recurrent_weight * h_prev + p.gate_bias;
    for (int k = 0; k < 3 * h; ++k) z[k] = Sigmoid(z[k]);
    z.tail(h) = z.tail(h).array().tanh();
    const auto i = z.segment(0, h), f = z.segment(h, h), o = z.segment(2 * h, h), g = z.segment(3 * h, h);
    Vector c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
    Vector hs = o.cwiseProduct(c.array().tanh().matrix());
    t.gates.col(s) = z;
    t.cells.col(s) = c;
    t.hidden.col(s) = hs;
    h_prev = hs;
    c_prev = c;
  }

  t.attention = Attend(t.hidden, p.aspect, p);
  t.attention_features.resize(h + da, n);
  t.attention_features.topRows(h) = (p.hidden_projection * t.hidden).array().tanh();
  t.aspect_features = p.aspect_projection * p.aspect;
  const Vector bottom = t.aspect_features.array().tanh();
  t.attention_features.bottomRows(da) = bottom.replicate(1, n);

  t.sentence = (p.pooled_projection * t.attention.pooled + p.last_state_projection * t.hidden.col(n - 1))
                   .array()
                   .tanh();
  t.probabilities = Softmax(p.classifier_weight * t.sentence + p.classifier_bias);
  return t;
}

Vector Forward(const std::vector<int>& tokens, const AttentionLstmParams& params) {
  return ForwardWithTrace(tokens, params).probabilities;
}

int Predict(const std::vector<int>& tokens, const AttentionLstmParams& params) {
  Eigen::Index best;
  Forward(tokens, params).maxCoeff(&best);
  return static_cast<int>(best);
}

double Loss(const std::vector<int>& tokens, int label, const AttentionLstmParams& params) {
  return -std::log(Forward(tokens, params)[label]);
}

void Backward(const ForwardTrace& t, int label, const AttentionLstmParams& p, double scale,
              AttentionLstmParams& g) {
  const auto dims = p.dims();
  const int h = dims.hidden_dim, dw = dims.word_dim, da = dims.aspect_dim;
  const Eigen::Index n = t.hidden.cols();

  // Output layer.
  Vector dlogits = t.probabilities;
  dlogits[label] -= 1.0;
  dlogits *= scale;
  g.classifier_weight.noalias() += dlogits * t.sentence.transpose();
  g.classifier_bias += dlogits;
  const Vector dsentence = p.classifier_weight.transpose() * dlogits;
  const Vector dpre = dsentence.cwiseProduct((1.0 - t.sentence.array().square()).matrix());
  g.pooled_projection.noalias() += dpre * t.attention.pooled.transpose();
  g.last_state_projection.noalias() += dpre * t.hidden.col(n - 1).transpose();
  const Vector dpooled = p.pooled_projection.transpose() * dpre;

  Matrix dhidden = dpooled * t.attention.weights.transpose();
  dhidden.col(n - 1) += p.last_state_projection.transpose() * dpre;

  // Attention.
  const Vector& alpha = t.attention.weights;
  const Vector dalpha = t.hidden.transpose() * dpooled;
  const Vector dscores = alpha.cwiseProduct((dalpha.array() - alpha.dot(dalpha)).matrix());
  g.score_weight.noalias() += t.attention_features * dscores;
  const Matrix dfeatures_pre =
      (p.score_weight * dscores.transpose()).cwiseProduct(
          (1.0 - t.attention_features.array().square()).matrix());
  const auto dtop = dfeatures_pre.topRows(h);
  g.hidden_projection.noalias() += dtop * t.hidden.transpose();
  dhidden.noalias() += p.hidden_projection.transpose() * dtop;
  const Vector daspect_pre = dfeatures_pre.bottomRows(da).rowwise().sum();
  g.aspect_projection.noalias() += daspect_pre * p.aspect.transpose();
  g.aspect += p.aspect_projection.transpose() * daspect_pre;

  // LSTM, backpropagation through time.
  Vector dh_next = Vector::Zero(h), dc_next = Vector::Zero(h);
  Vector dz(4 * h);
  for (Eigen::Index s = n - 1; s >= 0; --s) {
    const auto gates = t.gates.col(s);
    const auto i = gates.segment(0, h), f = gates.segment(h, h), o = gates.segment(2 * h, h),
               gg = gates.segment(3 * h, h);
    const Vector c_prev = s > 0 ? Vector(t.cells.col(s - 1)) : Vector::Zero(h);
    const Vector h_prev = s > 0 ? Vector(t.hidden.col(s - 1)) : Vector::Zero(h);
    const Vector tanh_c = t.cells.col(s).array().tanh();
    const Vector dh = dhidden.col(s) + dh_next;
    const Vector dc =
        dh.cwiseProduct(o).cwiseProduct((1.0 - tanh_c.array().square()).matrix()) + dc_next;
    dz.segment(0, h) = dc.cwiseProduct(gg).cwiseProduct(i.cwiseProduct((1.0 - i.array()).matrix()));
    dz.segment(h, h) =
        dc.cwiseProduct(c_prev).cwiseProduct(f.cwiseProduct((1.0 - f.array()).matrix()));
    dz.segment(2 * h, h) =
        dh.cwiseProduct(tanh_c).cwiseProduct(o.cwiseProduct((1.0 - o.array()).matrix()));
    dz.segment(3 * h, h) = dc.cwiseProduct(i).cwiseProduct((1.0 - gg.array().square()).matrix());

    g.gate_input_weight.noalias() += dz * t.inputs.col(s).transpose();
    g.gate_recurrent_weight.noalias() += dz * h_prev.transpose();
    g.gate_bias += dz;
    const Vector dinput = p.gate_input_weight.transpose() * dz;
    g.embedding.row(t.tokens[s]) += dinput.head(dw).transpose();
    g.aspect += dinput.tail(da);
    dh_next = p.gate_recurrent_weight.transpose() * dz;
    dc_next = dc.cwiseProduct(f);
  }
}

}  // namespace instasent::text_model
