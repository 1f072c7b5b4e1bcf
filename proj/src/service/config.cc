#include "instasent/service/config.h"

#include <cstdlib>
#include <sstream>

#include "instasent/common/digest.h"
#include "instasent/common/error.h"

namespace instasent::service {
namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T Number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
  return out;
}

}  // namespace

const std::map<std::string, std::string>& ConfigDefaults() {
  static const std::map<std::string, std::string> defaults = {
      {"seed", ""},
      {"posts", ""},
      {"posts_format", "jsonl"},
      {"media_root", "."},
      {"annotations", "annotations.jsonl"},
      {"output_dir", "out"},
      {"pretrain_text", ""},
      {"pretrain_images", ""},
      {"atlas", ""},
      {"ocr", "stub"},
      {"subtitle", "stub"},
      {"translation", "stub"},
      {"holdout", "0.2"},
      {"text.learning_rate", "0.3"},
      {"text.epochs", "20"},
      {"text.pretrain_epochs", "20"},
      {"text.batch_size", "8"},
      {"text.frozen", "none"},
      {"text.max_len", "300"},
      {"text.dim", "16"},
      {"image.learning_rate", "0.05"},
      {"image.epochs", "10"},
      {"image.pretrain_epochs", "10"},
      {"image.batch_size", "8"},
      {"image.frozen_prefix", "0"},
      {"report.k", "15"},
      {"report.resolution", "1"},
      {"report.metric", "posts"},
      {"report.bar_cap", "60"},
      {"report.likes_cap", "5000"},
  };
  return defaults;
}

PipelineConfig ParseConfig(std::string_view text, const std::filesystem::path& base_dir) {
  std::map<std::string, std::string> values = ConfigDefaults();
  std::istringstream in{std::string(text)};
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (Trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = Trim(std::string_view(line).substr(0, eq));
    const std::string value = Trim(std::string_view(line).substr(eq + 1));
    if (!values.count(key)) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    values[key] = value;
  }
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) values["output_dir"] = env;

  PipelineConfig c;
  c.base_dir = base_dir;
  c.raw = values;
  auto path = [&](const std::string& key) {
    std::filesystem::path p(values.at(key));
    auto out = (p.is_absolute() ? p : base_dir / p).lexically_normal();
    return out.has_filename() || !out.has_relative_path() ? out : out.parent_path();
  };
  auto optional_path = [&](const std::string& key) -> std::optional<std::filesystem::path> {
    if (values.at(key).empty()) return std::nullopt;
    return path(key);
  };

  if (values["seed"].empty()) throw ConfigError("config is missing the mandatory 'seed'");
  if (values["seed"].find('-') != std::string::npos) throw ConfigError("seed must be non-negative");
  c.seed = Number<std::uint64_t>("seed", values["seed"]);
  if (values["posts"].empty()) throw ConfigError("config is missing 'posts'");
  c.posts = path("posts");
  c.posts_format = values["posts_format"];
  if (c.posts_format != "jsonl" && c.posts_format != "tsv")
    throw ConfigError("posts_format must be jsonl or tsv");
  c.media_root = path("media_root");
  c.annotations = path("annotations");
  c.output_dir = path("output_dir");
  c.pretrain_text = optional_path("pretrain_text");
  c.pretrain_images = optional_path("pretrain_images");
  c.atlas = optional_path("atlas");
  c.ocr = values["ocr"];
  c.subtitle = values["subtitle"];
  c.translation = values["translation"];
  c.holdout = Number<double>("holdout", values["holdout"]);
  if (!(c.holdout >= 0 && c.holdout < 1)) throw ConfigError("holdout must be in [0, 1)");

  c.text.seed = c.seed;
  c.text.learning_rate = Number<double>("text.learning_rate", values["text.learning_rate"]);
  c.text.epochs = Number<int>("text.epochs", values["text.epochs"]);
  c.text.batch_size = Number<int>("text.batch_size", values["text.batch_size"]);
  c.text.max_len = Number<std::size_t>("text.max_len", values["text.max_len"]);
  c.text_pretrain_epochs = Number<int>("text.pretrain_epochs", values["text.pretrain_epochs"]);
  c.text_dim = Number<int>("text.dim", values["text.dim"]);
  auto frozen = text_model::ParseFrozenSet(values["text.frozen"]);
  if (!frozen) throw ConfigError("text.frozen must be none, embeddings or embeddings+lstm");
  c.text.frozen = *frozen;
  try {
    c.text.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("text settings: ") + e.what());
  }
  if (c.text_pretrain_epochs < 0 || c.text_dim < 1) throw ConfigError("text.pretrain_epochs/text.dim out of range");

  c.image.seed = c.seed;
  c.image.learning_rate = Number<double>("image.learning_rate", values["image.learning_rate"]);
  c.image.epochs = Number<int>("image.epochs", values["image.epochs"]);
  c.image.batch_size = Number<int>("image.batch_size", values["image.batch_size"]);
  c.image_pretrain_epochs = Number<int>("image.pretrain_epochs", values["image.pretrain_epochs"]);
  c.image_frozen_prefix = Number<int>("image.frozen_prefix", values["image.frozen_prefix"]);
  try {
    c.image.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("image settings: ") + e.what());
  }
  if (c.image_pretrain_epochs < 0 || c.image_frozen_prefix < 0)
    throw ConfigError("image.pretrain_epochs/image.frozen_prefix out of range");

  c.report_k = Number<int>("report.k", values["report.k"]);
  c.report_resolution = Number<double>("report.resolution", values["report.resolution"]);
  c.report_metric = values["report.metric"];
  c.report_bar_cap = Number<std::int64_t>("report.bar_cap", values["report.bar_cap"]);
  c.report_likes_cap = Number<std::int64_t>("report.likes_cap", values["report.likes_cap"]);
  if (c.report_k < 1 || !(c.report_resolution > 0) || c.report_bar_cap < 1 || c.report_likes_cap < 0)
    throw ConfigError("report settings out of range");
  if (c.report_metric != "posts" && c.report_metric != "likes" && c.report_metric != "comments")
    throw ConfigError("report.metric must be posts, likes or comments");

  // Inputs must exist up front; outputs are created on demand.
  for (const auto& [key, p] : {std::pair{"posts", std::optional(c.posts)}, {"media_root", std::optional(c.media_root)},
                               {"pretrain_text", c.pretrain_text}, {"pretrain_images", c.pretrain_images},
                               {"atlas", c.atlas}})
    if (p && !std::filesystem::exists(*p))
      throw ConfigError(std::string("config key '") + key + "': " + p->string() + " does not exist");
  return c;
}

PipelineConfig LoadConfig(const std::filesystem::path& path) {
  std::string text;
  try {
    text = ReadFileBytes(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  auto base = std::filesystem::absolute(path).parent_path();
  return ParseConfig(text, base);
}

std::string PipelineConfig::Canonical() const {
  std::string out;
  for (const auto& [k, v] : raw) out += k + " = " + v + "\n";
  return out;
}

std::string PipelineConfig::Hash() const { return Sha256Hex(Canonical()); }

}  // namespace instasent::service
