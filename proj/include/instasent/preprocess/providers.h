#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "instasent/corpus/types.h"

namespace instasent::preprocess {

enum class ProviderKind { kOcr, kSubtitle, kTranslation };

std::string_view ToString(ProviderKind kind);
std::optional<ProviderKind> ParseProviderKind(std::string_view text);

// Subtitle text beyond this offset is discarded.
inline constexpr double kSubtitleCapSeconds = 120.0;

struct SubtitleCue {
  double start_seconds = 0;
  double end_seconds = 0;
  std::string text;
};

// SubRip-style blocks: index line, "HH:MM:SS,mmm --> HH:MM:SS,mmm", text lines.
std::vector<SubtitleCue> ParseSrt(std::string_view text);
// Joins the text of cues starting before kSubtitleCapSeconds.
std::string CappedSubtitleText(const std::vector<SubtitleCue>& cues);

struct MediaInput {
  std::filesystem::path path;
  corpus::MediaKind kind = corpus::MediaKind::kImage;
};

struct Translation {
  std::string text;
  bool translated = false;
};

class TextProvider {
 public:
  virtual ~TextProvider() = default;
  virtual ProviderKind kind() const = 0;
  virtual std::string name() const = 0;
};

class OcrProvider : public TextProvider {
 public:
  ProviderKind kind() const override { return ProviderKind::kOcr; }
  virtual std::string ExtractText(const MediaInput& media) const = 0;
};

class SubtitleProvider : public TextProvider {
 public:
  ProviderKind kind() const override { return ProviderKind::kSubtitle; }
  virtual std::vector<SubtitleCue> Transcribe(const MediaInput& media) const = 0;
};

class TranslationProvider : public TextProvider {
 public:
  ProviderKind kind() const override { return ProviderKind::kTranslation; }
  virtual Translation Translate(std::string_view text) const = 0;
};

struct ProviderSet {
  std::shared_ptr<const OcrProvider> ocr;
  std::shared_ptr<const SubtitleProvider> subtitle;
  std::shared_ptr<const TranslationProvider> translation;

  // Offline stubs: empty OCR, no subtitles, identity translation.
  static ProviderSet Stubs();
};

// binding is "stub", "sidecar" (reads <media stem>.ocr.txt / <media stem>.srt
// next to the media file), or the name of an executable. Executables receive
// the media path (ocr, subtitle) or a temp file holding the text
// (translation) as their single argument and answer on stdout; subtitle
// executables answer in SubRip form.
std::shared_ptr<const OcrProvider> MakeOcrProvider(const std::string& binding);
std::shared_ptr<const SubtitleProvider> MakeSubtitleProvider(const std::string& binding);
std::shared_ptr<const TranslationProvider> MakeTranslationProvider(const std::string& binding);

}  // namespace instasent::preprocess
