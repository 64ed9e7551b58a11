#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace eyecontact {

/// Row-major 8-bit image with 1 or 3 interleaved channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, int c);

  std::uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const Image&) const = default;
};

Image read_png(const std::string& path);
void write_png(const Image& image, const std::string& path);

}  // namespace eyecontact
