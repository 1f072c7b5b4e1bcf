#include "instasent/common/raster.h"

#include <png.h>

#include <cstring>
#include <sstream>

#include "instasent/common/digest.h"
#include "instasent/common/error.h"

namespace instasent {
namespace {

struct PngReadCursor {
  const std::string* bytes;
  size_t pos;
};

void ReadCallback(png_structp png, png_bytep out, png_size_t len) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->bytes->size()) png_error(png, "truncated png");
  std::memcpy(out, cur->bytes->data() + cur->pos, len);
  cur->pos += len;
}

void WriteCallback(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

void FlushCallback(png_structp) {}

[[noreturn]] void PngErrorFn(png_structp, png_const_charp msg) { throw CorruptMediaError(msg); }
void PngWarnFn(png_structp, png_const_charp) {}

}  // namespace

std::string EncodePng(const Rgb8Image& image) {
  if (image.width <= 0 || image.height <= 0) throw ArgumentError("cannot encode empty image");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, PngErrorFn, PngWarnFn);
  png_infop info = png_create_info_struct(png);
  std::string out;
  try {
    png_set_write_fn(png, &out, WriteCallback, FlushCallback);
    png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y)
      png_write_row(png, const_cast<png_bytep>(image.at(0, y)));
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

Rgb8Image DecodePng(const std::string& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0)
    throw CorruptMediaError("not a png");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, PngErrorFn, PngWarnFn);
  png_infop info = png_create_info_struct(png);
  PngReadCursor cursor{&bytes, 0};
  Rgb8Image image;
  try {
    png_set_read_fn(png, &cursor, ReadCallback);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    if (png_get_rowbytes(png, info) != static_cast<size_t>(w) * 3)
      throw CorruptMediaError("unexpected png row layout");
    image = Rgb8Image(w, h);
    for (int y = 0; y < h; ++y) png_read_row(png, image.at(0, y), nullptr);
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void WritePng(const std::filesystem::path& path, const Rgb8Image& image) {
  WriteFileBytes(path, EncodePng(image));
}

Rgb8Image ReadPng(const std::filesystem::path& path) { return DecodePng(ReadFileBytes(path)); }

std::string EncodeFrameSequence(const FrameSequence& video) {
  const int w = video.frames.empty() ? 0 : video.frames.front().width;
  const int h = video.frames.empty() ? 0 : video.frames.front().height;
  std::ostringstream out;
  out << "VSEQ1 " << video.frames.size() << ' ' << w << ' ' << h << ' ' << video.fps << '\n';
  for (const auto& f : video.frames) {
    if (f.width != w || f.height != h) throw ArgumentError("frame size mismatch in sequence");
    out.write(reinterpret_cast<const char*>(f.pixels.data()),
              static_cast<std::streamsize>(f.pixels.size()));
  }
  return out.str();
}

FrameSequence DecodeFrameSequence(const std::string& bytes) {
  const auto eol = bytes.find('\n');
  if (eol == std::string::npos || bytes.compare(0, 6, "VSEQ1 ") != 0)
    throw CorruptMediaError("not a frame sequence");
  std::istringstream header(bytes.substr(6, eol - 6));
  long long frames = -1, w = -1, h = -1, fps = -1;
  header >> frames >> w >> h >> fps;
  if (!header || frames < 0 || w < 0 || h < 0 || fps <= 0)
    throw CorruptMediaError("bad frame sequence header");
  if (frames == 0) throw CorruptMediaError("frame sequence has no frames");
  if (w == 0 || h == 0) throw CorruptMediaError("frame sequence has empty frames");
  const size_t frame_bytes = static_cast<size_t>(w) * static_cast<size_t>(h) * 3;
  if (bytes.size() - eol - 1 != frame_bytes * static_cast<size_t>(frames))
    throw CorruptMediaError("frame sequence payload size mismatch");
  FrameSequence video;
  video.fps = static_cast<int>(fps);
  video.frames.reserve(static_cast<size_t>(frames));
  const auto* payload = reinterpret_cast<const std::uint8_t*>(bytes.data() + eol + 1);
  for (long long i = 0; i < frames; ++i) {
    Rgb8Image f(static_cast<int>(w), static_cast<int>(h));
    std::memcpy(f.pixels.data(), payload + i * frame_bytes, frame_bytes);
    video.frames.push_back(std::move(f));
  }
  return video;
}

Rgb8Image DecodeMediaFile(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = ReadFileBytes(path);
  } catch (const IoError& e) {
    throw CorruptMediaError(e.what());
  }
  if (path.extension() == ".vseq") {
    auto video = DecodeFrameSequence(bytes);
    return std::move(video.frames.front());
  }
  return DecodePng(bytes);
}

}  // namespace instasent
