#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace vista {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}

  std::uint8_t* at(std::size_t x, std::size_t y) { return pixels.data() + (y * width + x) * 3; }
  const std::uint8_t* at(std::size_t x, std::size_t y) const {
    return pixels.data() + (y * width + x) * 3;
  }

  /// Copy of the w x h rectangle at (x, y).
  Image crop(std::size_t x, std::size_t y, std::size_t w, std::size_t h) const;

  friend bool operator==(const Image&, const Image&) = default;
};

std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(std::span<const std::uint8_t> bytes);

/// Throws IoError when the file cannot be written or read.
void write_png(const Image& img, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

/// Renders ASCII text with a fixed 5x7 bitmap font (6x8 cell per glyph at
/// scale 1), clipped to the given pixel rectangle.
void draw_text(Image& img, std::string_view text, std::size_t x, std::size_t y,
               std::size_t clip_x, std::size_t clip_y, std::size_t clip_w, std::size_t clip_h,
               const std::uint8_t rgb[3], std::size_t scale = 1);

}  // namespace vista
