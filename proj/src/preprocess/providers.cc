#include "instasent/preprocess/providers.h"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "instasent/common/digest.h"
#include "instasent/common/error.h"

namespace instasent::preprocess {
namespace {

std::optional<double> ParseSrtTime(std::string_view s) {
  // HH:MM:SS,mmm (a '.' separator is also accepted)
  int h, m, sec, ms = 0;
  const std::string tmp(s);
  if (std::sscanf(tmp.c_str(), "%d:%d:%d%*[,.]%d", &h, &m, &sec, &ms) < 3) return std::nullopt;
  return h * 3600.0 + m * 60.0 + sec + ms / 1000.0;
}

std::string Trimmed(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string ShellQuote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out.push_back(c);
  }
  return out + "'";
}

// Runs `program arg`, returns stdout; throws IoError on nonzero exit.
std::string RunExecutable(const std::string& program, const std::string& arg) {
  const std::string cmd = ShellQuote(program) + " " + ShellQuote(arg) + " 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw IoError("cannot start provider " + program);
  std::string out;
  std::array<char, 4096> buf;
  size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  if (status != 0) throw IoError("provider " + program + " exited with status " + std::to_string(status));
  return out;
}

std::filesystem::path Sidecar(const std::filesystem::path& media, const char* suffix) {
  auto p = media;
  p.replace_extension(suffix);
  return p;
}

class StubOcr final : public OcrProvider {
 public:
  std::string name() const override { return "stub"; }
  std::string ExtractText(const MediaInput&) const override { return {}; }
};

class SidecarOcr final : public OcrProvider {
 public:
  std::string name() const override { return "sidecar"; }
  std::string ExtractText(const MediaInput& media) const override {
    const auto path = Sidecar(media.path, ".ocr.txt");
    return std::filesystem::exists(path) ? Trimmed(ReadFileBytes(path)) : std::string();
  }
};

class ExecOcr final : public OcrProvider {
 public:
  explicit ExecOcr(std::string program) : program_(std::move(program)) {}
  std::string name() const override { return program_; }
  std::string ExtractText(const MediaInput& media) const override {
    return Trimmed(RunExecutable(program_, media.path.string()));
  }

 private:
  std::string program_;
};

class StubSubtitle final : public SubtitleProvider {
 public:
  std::string name() const override { return "stub"; }
  std::vector<SubtitleCue> Transcribe(const MediaInput&) const override { return {}; }
};

class SidecarSubtitle final : public SubtitleProvider {
 public:
  std::string name() const override { return "sidecar"; }
  std::vector<SubtitleCue> Transcribe(const MediaInput& media) const override {
    const auto path = Sidecar(media.path, ".srt");
    return std::filesystem::exists(path) ? ParseSrt(ReadFileBytes(path))
                                         : std::vector<SubtitleCue>{};
  }
};

class ExecSubtitle final : public SubtitleProvider {
 public:
  explicit ExecSubtitle(std::string program) : program_(std::move(program)) {}
  std::string name() const override { return program_; }
  std::vector<SubtitleCue> Transcribe(const MediaInput& media) const override {
    return ParseSrt(RunExecutable(program_, media.path.string()));
  }

 private:
  std::string program_;
};

class IdentityTranslation final : public TranslationProvider {
 public:
  std::string name() const override { return "stub"; }
  Translation Translate(std::string_view text) const override { return {std::string(text), false}; }
};

class ExecTranslation final : public TranslationProvider {
 public:
  explicit ExecTranslation(std::string program) : program_(std::move(program)) {}
  std::string name() const override { return program_; }
  Translation Translate(std::string_view text) const override {
    char tmpl[] = "/tmp/instasent_translate_XXXXXX";
    const int fd = ::mkstemp(tmpl);
    if (fd < 0) throw IoError("cannot create temp file for translation");
    ::close(fd);
    const std::filesystem::path tmp(tmpl);
    std::string out;
    try {
      WriteFileBytes(tmp, text);
      out = Trimmed(RunExecutable(program_, tmp.string()));
    } catch (...) {
      std::filesystem::remove(tmp);
      throw;
    }
    std::filesystem::remove(tmp);
    const bool changed = out != Trimmed(text);
    return {std::move(out), changed};
  }

 private:
  std::string program_;
};

}  // namespace

std::string_view ToString(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::kOcr: return "ocr";
    case ProviderKind::kSubtitle: return "subtitle";
    case ProviderKind::kTranslation: return "translation";
  }
  return "?";
}

std::optional<ProviderKind> ParseProviderKind(std::string_view text) {
  if (text == "ocr") return ProviderKind::kOcr;
  if (text == "subtitle") return ProviderKind::kSubtitle;
  if (text == "translation") return ProviderKind::kTranslation;
  return std::nullopt;
}

std::vector<SubtitleCue> ParseSrt(std::string_view text) {
  std::vector<SubtitleCue> cues;
  std::istringstream in{std::string(text)};
  std::string line;
  SubtitleCue* current = nullptr;
  while (std::getline(in, line)) {
    const std::string t = Trimmed(line);
    if (t.empty()) {
      current = nullptr;
      continue;
    }
    const auto arrow = t.find("-->");
    if (arrow != std::string::npos) {
      auto start = ParseSrtTime(Trimmed(t.substr(0, arrow)));
      auto end = ParseSrtTime(Trimmed(t.substr(arrow + 3)));
      if (!start || !end) continue;
      cues.push_back({*start, *end, {}});
      current = &cues.back();
      continue;
    }
    if (!current) continue;  // index line
    if (!current->text.empty()) current->text.push_back(' ');
    current->text += t;
  }
  return cues;
}

std::string CappedSubtitleText(const std::vector<SubtitleCue>& cues) {
  std::string out;
  for (const auto& c : cues) {
    if (c.start_seconds >= kSubtitleCapSeconds || c.text.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += c.text;
  }
  return out;
}

ProviderSet ProviderSet::Stubs() {
  return {std::make_shared<StubOcr>(), std::make_shared<StubSubtitle>(),
          std::make_shared<IdentityTranslation>()};
}

std::shared_ptr<const OcrProvider> MakeOcrProvider(const std::string& binding) {
  if (binding.empty() || binding == "stub") return std::make_shared<StubOcr>();
  if (binding == "sidecar") return std::make_shared<SidecarOcr>();
  return std::make_shared<ExecOcr>(binding);
}

std::shared_ptr<const SubtitleProvider> MakeSubtitleProvider(const std::string& binding) {
  if (binding.empty() || binding == "stub") return std::make_shared<StubSubtitle>();
  if (binding == "sidecar") return std::make_shared<SidecarSubtitle>();
  return std::make_shared<ExecSubtitle>(binding);
}

std::shared_ptr<const TranslationProvider> MakeTranslationProvider(const std::string& binding) {
  if (binding.empty() || binding == "stub") return std::make_shared<IdentityTranslation>();
  return std::make_shared<ExecTranslation>(binding);
}

}  // namespace instasent::preprocess
