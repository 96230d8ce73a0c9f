#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

namespace detbench {

/// 8-bit RGB raster, row-major, tightly packed.
struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0);

  std::uint8_t at(int y, int x, int ch) const {
    return pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                   static_cast<std::size_t>(x)) *
                      3 +
                  static_cast<std::size_t>(ch)];
  }
  std::uint8_t& at(int y, int x, int ch) {
    return pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                   static_cast<std::size_t>(x)) *
                      3 +
                  static_cast<std::size_t>(ch)];
  }
};

/// Decodes any PNG color type to 8-bit RGB.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

/// Width/height from the IHDR chunk alone; nullopt when not a readable PNG.
std::optional<std::pair<int, int>> probe_png_size(const std::filesystem::path& path);

}  // namespace detbench
