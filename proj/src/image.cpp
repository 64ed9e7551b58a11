#include "eyecontact/image.hpp"

#include "eyecontact/error.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

namespace eyecontact {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image::Image(int w, int h, int c)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * c, 0) {}

Image read_png(const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw Error(ErrorCode::Io, "cannot read PNG " + path + ": " + img.message);
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image out(static_cast<int>(img.width), static_cast<int>(img.height), gray ? 1 : 3);
  if (!png_image_finish_read(&img, nullptr, out.data.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorCode::Io, "cannot decode PNG " + path + ": " + img.message);
  }
  return out;
}

void write_png(const Image& image, const std::string& path) {
  if (image.channels != 1 && image.channels != 3)
    throw Error(ErrorCode::InvalidArgument, "PNG output needs 1 or 3 channels");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  if (!png_image_write_to_stdio(&img, f.get(), 0, image.data.data(), 0, nullptr))
    throw Error(ErrorCode::Io, "cannot encode PNG " + path + ": " + img.message);
}

}  // namespace eyecontact
