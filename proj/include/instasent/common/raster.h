#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace instasent {

// 8-bit interleaved RGB image, row-major.
struct Rgb8Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  Rgb8Image() = default;
  Rgb8Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, fill) {}

  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[(static_cast<size_t>(y) * width + x) * 3];
  }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = at(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
  bool operator==(const Rgb8Image&) const = default;
};

// PNG encode/decode through libpng. Decoding throws CorruptMediaError.
std::string EncodePng(const Rgb8Image& image);
Rgb8Image DecodePng(const std::string& bytes);
void WritePng(const std::filesystem::path& path, const Rgb8Image& image);
Rgb8Image ReadPng(const std::filesystem::path& path);

// Frame-sequence video container (.vseq):
//   ASCII header line "VSEQ1 <frames> <width> <height> <fps>\n"
//   followed by frames * width * height * 3 bytes of RGB, frame-major.
struct FrameSequence {
  int fps = 1;
  std::vector<Rgb8Image> frames;
};

std::string EncodeFrameSequence(const FrameSequence& video);
FrameSequence DecodeFrameSequence(const std::string& bytes);

// Reads .png or .vseq based on the extension and returns the first frame.
// Throws CorruptMediaError for undecodable or zero-frame media.
Rgb8Image DecodeMediaFile(const std::filesystem::path& path);

}  // namespace instasent
