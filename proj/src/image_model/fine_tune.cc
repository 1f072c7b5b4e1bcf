#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "instasent/common/error.h"
#include "instasent/common/rng.h"
#include "instasent/image_model/cnn.h"
#include <nlohmann/json.hpp>

namespace instasent::image_model {
namespace {

using Json = nlohmann::ordered_json;

const char* KindName(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kPool: return "pool";
    case LayerKind::kResidualBlock: return "residual_block";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kDense: return "dense";
  }
  return "";
}

LayerKind ParseKind(const std::string& s) {
  if (s == "conv") return LayerKind::kConv;
  if (s == "pool") return LayerKind::kPool;
  if (s == "residual_block") return LayerKind::kResidualBlock;
  if (s == "flatten") return LayerKind::kFlatten;
  if (s == "dense") return LayerKind::kDense;
  throw ConfigError("unknown layer kind '" + s + "'");
}

void ForEachTensor(CnnParams& p, const CnnParams& g,
                   const std::function<void(size_t, std::vector<double>&, const std::vector<double>&)>& fn) {
  for (size_t l = 0; l < p.layers.size(); ++l) {
    fn(l, p.layers[l].weight, g.layers[l].weight);
    fn(l, p.layers[l].bias, g.layers[l].bias);
    fn(l, p.layers[l].weight2, g.layers[l].weight2);
    fn(l, p.layers[l].bias2, g.layers[l].bias2);
  }
}

}  // namespace

std::string CnnSpec::ToJson() const {
  Json j;
  j["input"] = {input.channels, input.height, input.width};
  j["frozen_prefix"] = frozen_prefix;
  j["num_classes"] = num_classes;
  j["layers"] = Json::array();
  for (const auto& L : layers) {
    Json l;
    l["kind"] = KindName(L.kind);
    l["kernel"] = {L.kernel_h, L.kernel_w};
    l["maps_in"] = L.maps_in;
    l["maps_out"] = L.maps_out;
    l["stride"] = L.stride;
    l["activation"] = L.activation == Activation::kRelu ? "relu" : "none";
    if (L.kind == LayerKind::kPool) l["pool"] = L.pool == PoolMode::kMax ? "max" : "average";
    j["layers"].push_back(l);
  }
  return j.dump();
}

CnnSpec CnnSpec::FromJson(const std::string& text) {
  CnnSpec s;
  try {
    const auto j = Json::parse(text);
    const auto& in = j.at("input");
    s.input = {in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>()};
    s.frozen_prefix = j.value("frozen_prefix", 0);
    s.num_classes = j.value("num_classes", kNumClasses);
    for (const auto& l : j.at("layers")) {
      LayerSpec L;
      L.kind = ParseKind(l.at("kind").get<std::string>());
      if (l.contains("kernel")) {
        L.kernel_h = l["kernel"].at(0).get<int>();
        L.kernel_w = l["kernel"].at(1).get<int>();
      }
      L.maps_in = l.value("maps_in", 0);
      L.maps_out = l.value("maps_out", 0);
      L.stride = l.value("stride", 1);
      const auto act = l.value("activation", std::string("none"));
      if (act != "relu" && act != "none") throw ConfigError("unknown activation '" + act + "'");
      L.activation = act == "relu" ? Activation::kRelu : Activation::kNone;
      const auto pool = l.value("pool", std::string("max"));
      if (pool != "max" && pool != "average") throw ConfigError("unknown pool mode '" + pool + "'");
      L.pool = pool == "max" ? PoolMode::kMax : PoolMode::kAverage;
      s.layers.push_back(L);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed network spec: ") + e.what());
  }
  s.Validate();
  return s;
}

void FineTuneConfig::Validate() const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate))
    throw ArgumentError("learning_rate must be a finite non-negative number");
  if (epochs < 1) throw ArgumentError("epochs must be >= 1");
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
}

double MeanLoss(const std::vector<LabeledMaps>& corpus, const CnnSpec& spec, const CnnParams& params) {
  if (corpus.empty()) throw ArgumentError("corpus is empty");
  double total = 0;
  for (const auto& ex : corpus) total += Loss(ex.input, ex.label, spec, params);
  return total / static_cast<double>(corpus.size());
}

Evaluation Evaluate(const CnnParams& params, const CnnSpec& spec, const std::vector<LabeledMaps>& labeled) {
  if (labeled.empty()) throw ArgumentError("evaluation set is empty");
  Evaluation ev{0, ConfusionMatrix(spec.num_classes)};
  for (const auto& ex : labeled) ev.confusion.Add(ex.label, Predict(ex.input, spec, params));
  ev.accuracy = ev.confusion.Accuracy();
  return ev;
}

FineTuneResult FineTune(const std::vector<LabeledMaps>& corpus, const CnnSpec& spec,
                        const FineTuneConfig& config, const std::optional<CnnParams>& init) {
  config.Validate();
  spec.Validate();
  if (corpus.empty()) throw ArgumentError("training corpus is empty");
  for (const auto& ex : corpus)
    if (ex.label < 0 || ex.label >= spec.num_classes)
      throw ArgumentError("training label outside the model's classes");

  FineTuneResult result;
  result.params = init ? *init : CnnParams::Initialize(spec, config.seed);
  result.params.Validate(spec);
  result.initial_loss = MeanLoss(corpus, spec, result.params);

  auto& params = result.params;
  std::vector<size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed ^ 0x1a6e1a6e1a6e1a6eULL);
  const size_t frozen = static_cast<size_t>(spec.frozen_prefix);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.Shuffle(order);
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      CnnParams grad = CnnParams::Zeros(spec);
      double batch_loss = 0;
      for (size_t k = start; k < end; ++k) {
        const auto& ex = corpus[order[k]];
        batch_loss += AccumulateGradient(ex.input, ex.label, spec, params, scale, grad);
      }
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch starting at " << start
            << " (learning_rate=" << config.learning_rate << ")";
        throw NumericError(msg.str());
      }
      ForEachTensor(params, grad, [&](size_t l, std::vector<double>& p, const std::vector<double>& g) {
        if (l < frozen) return;
        for (size_t i = 0; i < p.size(); ++i) p[i] -= config.learning_rate * g[i];
      });
    }
    const double loss = MeanLoss(corpus, spec, params);
    if (!std::isfinite(loss))
      throw NumericError("non-finite training loss after epoch " + std::to_string(epoch));
    result.history.push_back({epoch, loss, Evaluate(params, spec, corpus).accuracy});
  }
  return result;
}

Checkpoint ToCheckpoint(const CnnSpec& spec, const CnnParams& params) {
  params.Validate(spec);
  Checkpoint ckpt;
  ckpt.model_kind = "cnn";
  ckpt.metadata = {{"spec", spec.ToJson()}};
  for (size_t l = 0; l < params.layers.size(); ++l) {
    const auto& P = params.layers[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    auto add = [&](const char* name, const std::vector<double>& v) {
      if (!v.empty()) ckpt.tensors.push_back({prefix + name, {v.size()}, v});
    };
    add("weight", P.weight);
    add("bias", P.bias);
    add("weight2", P.weight2);
    add("bias2", P.bias2);
  }
  return ckpt;
}

std::pair<CnnSpec, CnnParams> FromCheckpoint(const Checkpoint& ckpt) {
  if (ckpt.model_kind != "cnn") throw ConfigError("checkpoint holds a " + ckpt.model_kind + " model, not cnn");
  auto spec = CnnSpec::FromJson(ckpt.Meta("spec"));
  auto params = CnnParams::Zeros(spec);
  size_t expected = 0;
  for (size_t l = 0; l < params.layers.size(); ++l) {
    auto& P = params.layers[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    auto load = [&](const char* name, std::vector<double>& v) {
      if (v.empty()) return;
      v = ckpt.Require(prefix + name, {v.size()}).values;
      ++expected;
    };
    load("weight", P.weight);
    load("bias", P.bias);
    load("weight2", P.weight2);
    load("bias2", P.bias2);
  }
  if (ckpt.tensors.size() != expected) throw ConfigError("checkpoint has unexpected tensors");
  params.Validate(spec);
  return {spec, params};
}

}  // namespace instasent::image_model
