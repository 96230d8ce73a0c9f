#include "detbench/image.hpp"

#include <cstdio>
#include <fstream>
#include <memory>

#include <png.h>

#include "detbench/errors.hpp"

namespace detbench {

Image::Image(int w, int h, std::uint8_t fill) : width(w), height(h) {
  if (w < 1 || h < 1) raise(Errc::shape_mismatch, "image dims must be >= 1");
  pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) raise(Errc::missing_file, "cannot open " + path.string());

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    raise(Errc::decode_error, "not a PNG: " + path.string());
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) raise(Errc::decode_error, "png reader init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    raise(Errc::decode_error, "png reader init failed");
  }
  Image img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(Errc::decode_error, "corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  // Normalize everything to 8-bit RGB.
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  if (w < 1 || h < 1 || w > (1u << 16) || h > (1u << 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(Errc::decode_error, "unreasonable PNG dims in " + path.string());
  }
  img = Image(static_cast<int>(w), static_cast<int>(h));
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(Errc::decode_error, "unexpected row layout in " + path.string());
  }
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) {
    rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * w * 3;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.width < 1 || image.height < 1 ||
      image.pixels.size() !=
          static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height) * 3) {
    raise(Errc::shape_mismatch, "image buffer does not match its dims");
  }
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) raise(Errc::io_error, "cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) raise(Errc::io_error, "png writer init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    raise(Errc::io_error, "png writer init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    raise(Errc::io_error, "png write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(image.pixels.data() +
                              static_cast<std::size_t>(y) * static_cast<std::size_t>(image.width) * 3);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::optional<std::pair<int, int>> probe_png_size(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  unsigned char hdr[24];
  if (!in.read(reinterpret_cast<char*>(hdr), sizeof(hdr))) return std::nullopt;
  if (png_sig_cmp(hdr, 0, 8) != 0) return std::nullopt;
  const auto be32 = [&](int off) {
    return (static_cast<std::uint32_t>(hdr[off]) << 24) |
           (static_cast<std::uint32_t>(hdr[off + 1]) << 16) |
           (static_cast<std::uint32_t>(hdr[off + 2]) << 8) | static_cast<std::uint32_t>(hdr[off + 3]);
  };
  return std::make_pair(static_cast<int>(be32(16)), static_cast<int>(be32(20)));
}

}  // namespace detbench
