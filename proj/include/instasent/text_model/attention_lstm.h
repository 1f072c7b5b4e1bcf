#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "instasent/common/checkpoint.h"
#include "instasent/common/metrics.h"
#include "instasent/text_model/vocabulary.h"

namespace instasent::text_model {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr int kNumClasses = 4;

struct ModelDims {
  int vocab_size = 2;
  int word_dim = 16;
  int hidden_dim = 16;
  int aspect_dim = 16;
  int num_classes = kNumClasses;

  bool operator==(const ModelDims&) const = default;
};

// Every learnable tensor of the classifier. With d = hidden_dim,
// d_w = word_dim, d_a = aspect_dim and C classes:
//
//   x_t  = [E[token_t]; v_a]                            LSTM input, d_w + d_a
//   H    = [h_1 ... h_N]                                LSTM outputs, d x N
//   M    = tanh([W_h H ; (W_v v_a) 1_N^T])              (d + d_a) x N
//   a    = softmax(w^T M)                               N
//   r    = H a                                          d
//   h*   = tanh(W_p r + W_x h_N)                        d
//   y    = softmax(W_s h* + b_s)                        C
//
// The LSTM is the four-gate cell with gate rows stacked in the order
// input, forget, output, candidate:
//   z = W x_t + U h_{t-1} + b
//   i = sigm(z_i)  f = sigm(z_f)  o = sigm(z_o)  g = tanh(z_g)
//   c_t = f * c_{t-1} + i * g     h_t = o * tanh(c_t),   h_0 = c_0 = 0
struct AttentionLstmParams {
  Matrix embedding;              // E    V x d_w
  Vector aspect;                 // v_a  d_a
  Matrix gate_input_weight;      // W    4d x (d_w + d_a)
  Matrix gate_recurrent_weight;  // U    4d x d
  Vector gate_bias;              // b    4d
  Matrix hidden_projection;      // W_h  d x d
  Matrix aspect_projection;      // W_v  d_a x d_a
  Vector score_weight;           // w    d + d_a
  Matrix pooled_projection;      // W_p  d x d
  Matrix last_state_projection;  // W_x  d x d
  Matrix classifier_weight;      // W_s  C x d
  Vector classifier_bias;        // b_s  C

  // All tensors zero with the given shapes.
  static AttentionLstmParams Zeros(const ModelDims& dims);
  // Weights uniform(-0.3, 0.3), biases zero.
  static AttentionLstmParams Initialize(const ModelDims& dims, std::uint64_t seed);

  ModelDims dims() const;
  // Throws ConfigError on inconsistent shapes or non-finite entries.
  void Validate() const;

  // Visits (name, storage) for every tensor in a fixed order. Storage is
  // row-major contiguous, so a span over data() covers the tensor.
  void ForEachTensor(const std::function<void(const std::string&, double*, Eigen::Index)>& fn);
  void ForEachTensor(
      const std::function<void(const std::string&, const double*, Eigen::Index)>& fn) const;

  bool operator==(const AttentionLstmParams& o) const;
};

// Tensor groups that can be held fixed during fine-tuning.
enum class FrozenSet { kNone, kEmbeddings, kEmbeddingsLstm };
std::string ToString(FrozenSet f);
std::optional<FrozenSet> ParseFrozenSet(std::string_view text);
// Embeddings are {embedding, aspect}; the LSTM group adds the gate tensors.
bool IsFrozen(FrozenSet frozen, const std::string& tensor_name);

struct AttentionOutput {
  Vector weights;  // length N, sums to 1
  Vector pooled;   // d, H * weights
};

// Throws ConfigError when H, aspect and params disagree on shape or N == 0.
AttentionOutput Attend(const Matrix& hidden, const Vector& aspect, const AttentionLstmParams& params);

// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardTrace {
  std::vector<int> tokens;
  Matrix inputs;  // (d_w + d_a) x N
  Matrix gates;   // 4d x N, post-activation
  Matrix cells;   // d x N
  Matrix hidden;  // d x N
  Matrix attention_features;  // M, (d + d_a) x N
  Vector aspect_features;     // W_v v_a before tanh
  AttentionOutput attention;
  Vector sentence;  // h*
  Vector probabilities;
};

// Empty token sequences are classified as a single PAD token.
ForwardTrace ForwardWithTrace(const std::vector<int>& tokens, const AttentionLstmParams& params);
Vector Forward(const std::vector<int>& tokens, const AttentionLstmParams& params);
int Predict(const std::vector<int>& tokens, const AttentionLstmParams& params);

// -log y[label] for a 0-based label.
double Loss(const std::vector<int>& tokens, int label, const AttentionLstmParams& params);

// Adds d(-log y[label])/d(params) * scale into grad.
void Backward(const ForwardTrace& trace, int label, const AttentionLstmParams& params, double scale,
              AttentionLstmParams& grad);

struct Example {
  std::vector<int> tokens;
  int label = 0;  // 0-based training class
};

struct TrainConfig {
  std::uint64_t seed = 7;
  double learning_rate = 0.3;
  int epochs = 20;
  int batch_size = 8;
  FrozenSet frozen = FrozenSet::kNone;
  std::size_t max_len = 300;

  void Validate() const;  // throws ArgumentError
};

struct EpochStats {
  int epoch = 0;
  double loss = 0;      // mean cross-entropy over the training set after the epoch
  double accuracy = 0;  // training-set accuracy after the epoch
};

struct TrainResult {
  AttentionLstmParams params;
  double initial_loss = 0;
  std::vector<EpochStats> history;
};

// Minibatch gradient descent on mean cross-entropy. Deterministic per seed;
// tensors in the frozen set are never written. Throws ArgumentError for an
// empty corpus or labels outside [0, 4), NumericError on a non-finite loss.
TrainResult Train(const std::vector<Example>& corpus, const TrainConfig& config,
                  const ModelDims& dims, const std::optional<AttentionLstmParams>& init);

double MeanLoss(const std::vector<Example>& corpus, const AttentionLstmParams& params);

// Throws ArgumentError for an empty set.
Evaluation Evaluate(const AttentionLstmParams& params, const std::vector<Example>& labeled);

// Checkpoint with model_kind "attention_lstm", dims and vocabulary in the
// metadata. Loading validates every tensor shape against the recorded dims.
Checkpoint ToCheckpoint(const AttentionLstmParams& params, const Vocabulary& vocab);
std::pair<AttentionLstmParams, Vocabulary> FromCheckpoint(const Checkpoint& ckpt);

}  // namespace instasent::text_model
