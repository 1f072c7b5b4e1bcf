#include <cmath>
#include <numeric>
#include <sstream>

#include "instasent/common/error.h"
#include "instasent/common/rng.h"
#include "instasent/text_model/attention_lstm.h"

namespace instasent::text_model {

void TrainConfig::Validate() const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate))
    throw ArgumentError("learning_rate must be a finite non-negative number");
  if (epochs < 1) throw ArgumentError("epochs must be >= 1");
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (max_len < 1) throw ArgumentError("max_len must be >= 1");
}

double MeanLoss(const std::vector<Example>& corpus, const AttentionLstmParams& params) {
  double total = 0;
  for (const auto& ex : corpus) total += Loss(ex.tokens, ex.label, params);
  return total / static_cast<double>(corpus.size());
}

Evaluation Evaluate(const AttentionLstmParams& params, const std::vector<Example>& labeled) {
  if (labeled.empty()) throw ArgumentError("evaluation set is empty");
  Evaluation ev{0, ConfusionMatrix(params.dims().num_classes)};
  for (const auto& ex : labeled) ev.confusion.Add(ex.label, Predict(ex.tokens, params));
  ev.accuracy = ev.confusion.Accuracy();
  return ev;
}

TrainResult Train(const std::vector<Example>& corpus, const TrainConfig& config,
                  const ModelDims& dims, const std::optional<AttentionLstmParams>& init) {
  config.Validate();
  if (corpus.empty()) throw ArgumentError("training corpus is empty");
  for (const auto& ex : corpus)
    if (ex.label < 0 || ex.label >= dims.num_classes)
      throw ArgumentError("training label outside the model's classes");

  TrainResult result;
  result.params = init ? *init : AttentionLstmParams::Initialize(dims, config.seed);
  result.params.Validate();
  if (result.params.dims() != dims) throw ConfigError("initial parameters do not match dims");

  std::vector<Example> data = corpus;
  for (auto& ex : data)
    if (ex.tokens.size() > config.max_len) ex.tokens.resize(config.max_len);

  result.initial_loss = MeanLoss(data, result.params);
  auto& params = result.params;
  AttentionLstmParams grad = AttentionLstmParams::Zeros(dims);
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed ^ 0x5eed5eed5eed5eedULL);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.Shuffle(order);
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      grad.ForEachTensor([](const std::string&, double* p, Eigen::Index n) { std::fill(p, p + n, 0.0); });
      double batch_loss = 0;
      for (size_t k = start; k < end; ++k) {
        const auto& ex = data[order[k]];
        const auto trace = ForwardWithTrace(ex.tokens, params);
        batch_loss -= std::log(trace.probabilities[ex.label]);
        Backward(trace, ex.label, params, scale, grad);
      }
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch starting at " << start
            << " (learning_rate=" << config.learning_rate << ")";
        throw NumericError(msg.str());
      }
      std::vector<const double*> grads;
      grad.ForEachTensor([&](const std::string&, const double* p, Eigen::Index) { grads.push_back(p); });
      size_t idx = 0;
      params.ForEachTensor([&](const std::string& name, double* p, Eigen::Index n) {
        const double* gp = grads[idx++];
        if (IsFrozen(config.frozen, name)) return;
        for (Eigen::Index i = 0; i < n; ++i) p[i] -= config.learning_rate * gp[i];
      });
    }
    const double loss = MeanLoss(data, params);
    if (!std::isfinite(loss)) throw NumericError("non-finite training loss after epoch " + std::to_string(epoch));
    result.history.push_back({epoch, loss, Evaluate(params, data).accuracy});
  }
  return result;
}

Checkpoint ToCheckpoint(const AttentionLstmParams& params, const Vocabulary& vocab) {
  const auto d = params.dims();
  if (d.vocab_size != vocab.size()) throw ConfigError("vocabulary size does not match embedding rows");
  Checkpoint ckpt;
  ckpt.model_kind = "attention_lstm";
  ckpt.metadata = {{"vocab_size", std::to_string(d.vocab_size)},
                   {"word_dim", std::to_string(d.word_dim)},
                   {"hidden_dim", std::to_string(d.hidden_dim)},
                   {"aspect_dim", std::to_string(d.aspect_dim)},
                   {"num_classes", std::to_string(d.num_classes)}};
  std::string joined;
  for (const auto& t : vocab.tokens()) joined += t + "\n";
  ckpt.metadata.emplace_back("vocabulary", joined);
  const auto shapes = [&](const std::string& name) -> std::vector<std::uint64_t> {
    const auto h = static_cast<std::uint64_t>(d.hidden_dim), a = static_cast<std::uint64_t>(d.aspect_dim);
    if (name == "embedding") return {static_cast<std::uint64_t>(d.vocab_size), static_cast<std::uint64_t>(d.word_dim)};
    if (name == "aspect") return {a};
    if (name == "gate_input_weight") return {4 * h, static_cast<std::uint64_t>(d.word_dim) + a};
    if (name == "gate_recurrent_weight") return {4 * h, h};
    if (name == "gate_bias") return {4 * h};
    if (name == "aspect_projection") return {a, a};
    if (name == "score_weight") return {h + a};
    if (name == "classifier_weight") return {static_cast<std::uint64_t>(d.num_classes), h};
    if (name == "classifier_bias") return {static_cast<std::uint64_t>(d.num_classes)};
    return {h, h};
  };
  params.ForEachTensor([&](const std::string& name, const double* p, Eigen::Index n) {
    ckpt.tensors.push_back({name, shapes(name), std::vector<double>(p, p + n)});
  });
  return ckpt;
}

std::pair<AttentionLstmParams, Vocabulary> FromCheckpoint(const Checkpoint& ckpt) {
  if (ckpt.model_kind != "attention_lstm")
    throw ConfigError("checkpoint holds a " + ckpt.model_kind + " model, not attention_lstm");
  auto meta_int = [&](const char* key) {
    try {
      return std::stoi(ckpt.Meta(key));
    } catch (const std::logic_error&) {
      throw ConfigError(std::string("bad checkpoint metadata ") + key);
    }
  };
  ModelDims d{meta_int("vocab_size"), meta_int("word_dim"), meta_int("hidden_dim"),
              meta_int("aspect_dim"), meta_int("num_classes")};
  std::vector<std::string> tokens;
  std::istringstream vs(ckpt.Meta("vocabulary"));
  for (std::string line; std::getline(vs, line);) tokens.push_back(line);
  auto vocab = Vocabulary::FromTokens(std::move(tokens));
  if (vocab.size() != d.vocab_size) throw ConfigError("vocabulary does not match vocab_size");

  auto params = AttentionLstmParams::Zeros(d);
  const auto expected = ToCheckpoint(params, vocab);
  size_t k = 0;
  params.ForEachTensor([&](const std::string& name, double* p, Eigen::Index) {
    const auto& want = expected.tensors[k++];
    const auto& got = ckpt.Require(name, want.dims);
    std::copy(got.values.begin(), got.values.end(), p);
  });
  params.Validate();
  return {std::move(params), std::move(vocab)};
}

}  // namespace instasent::text_model
