#include "instasent/preprocess/enrich.h"

#include <sstream>

#include <nlohmann/json.hpp>

#include "instasent/common/digest.h"
#include "instasent/common/error.h"
#include "instasent/preprocess/text.h"

namespace instasent::preprocess {

using ordered_json = nlohmann::ordered_json;

Rgb8Image FirstFrame(const std::filesystem::path& media_path) {
  return DecodeMediaFile(media_path);
}

EnrichedCaption Enrich(const corpus::PostRecord& post, const ProviderSet& providers,
                       const std::filesystem::path& media_root) {
  EnrichedCaption out;
  out.post_id = post.post_id;
  out.base_caption = post.caption.value_or("");

  auto record_failure = [&](const TextProvider& p, const std::exception& e) {
    out.provider_errors.push_back(std::string(ToString(p.kind())) + "/" + p.name() + ": " +
                                  e.what());
  };

  if (post.media_path) {
    const MediaInput media{media_root / *post.media_path,
                           post.media_kind.value_or(corpus::MediaKind::kImage)};
    if (providers.ocr) {
      try {
        auto text = providers.ocr->ExtractText(media);
        if (!text.empty()) out.ocr_text = std::move(text);
      } catch (const std::exception& e) {
        record_failure(*providers.ocr, e);
      }
    }
    if (providers.subtitle && media.kind == corpus::MediaKind::kVideo) {
      try {
        auto text = CappedSubtitleText(providers.subtitle->Transcribe(media));
        if (!text.empty()) out.subtitle_text = std::move(text);
      } catch (const std::exception& e) {
        record_failure(*providers.subtitle, e);
      }
    }
  }

  std::string merged = out.base_caption;
  for (const auto* part : {&out.ocr_text, &out.subtitle_text}) {
    if (!*part) continue;
    if (!merged.empty()) merged.push_back(' ');
    merged += **part;
  }

  if (providers.translation) {
    try {
      auto t = providers.translation->Translate(merged);
      merged = std::move(t.text);
      out.translated = t.translated;
    } catch (const std::exception& e) {
      record_failure(*providers.translation, e);
    }
  }

  out.final_text = Trim300(merged);
  out.token_count = WordCount(out.final_text);
  return out;
}

std::string SerializeEnriched(const std::vector<EnrichedCaption>& captions) {
  std::string out;
  for (const auto& c : captions) {
    ordered_json o;
    o["post_id"] = c.post_id;
    o["base_caption"] = c.base_caption;
    if (c.ocr_text) o["ocr_text"] = *c.ocr_text;
    if (c.subtitle_text) o["subtitle_text"] = *c.subtitle_text;
    o["translated"] = c.translated;
    o["final_text"] = c.final_text;
    o["token_count"] = c.token_count;
    if (!c.provider_errors.empty()) o["provider_errors"] = c.provider_errors;
    out += o.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

std::vector<EnrichedCaption> ParseEnriched(std::string_view text) {
  std::vector<EnrichedCaption> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto o = ordered_json::parse(line, nullptr, false);
    if (o.is_discarded() || !o.is_object() || !o.contains("post_id") ||
        !o.contains("final_text"))
      throw ArgumentError("malformed enriched caption line");
    EnrichedCaption c;
    c.post_id = o["post_id"].get<std::string>();
    c.base_caption = o.value("base_caption", "");
    if (o.contains("ocr_text")) c.ocr_text = o["ocr_text"].get<std::string>();
    if (o.contains("subtitle_text")) c.subtitle_text = o["subtitle_text"].get<std::string>();
    c.translated = o.value("translated", false);
    c.final_text = o["final_text"].get<std::string>();
    c.token_count = o.value("token_count", WordCount(c.final_text));
    if (o.contains("provider_errors"))
      c.provider_errors = o["provider_errors"].get<std::vector<std::string>>();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace instasent::preprocess
