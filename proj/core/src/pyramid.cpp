#include <algorithm>
#include <cstring>

#include "vista/atlas.hpp"
#include "vista/error.hpp"

namespace vista::atlas {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

Image PyramidLevel::tile(std::size_t tx, std::size_t ty, std::size_t tile_px) const {
  const std::size_t x = tx * tile_px;
  const std::size_t y = ty * tile_px;
  return image.crop(x, y, std::min(tile_px, image.width - x), std::min(tile_px, image.height - y));
}

Image downsample(const Image& src) {
  Image out(ceil_div(src.width, 2), ceil_div(src.height, 2));
  for (std::size_t y = 0; y < out.height; ++y) {
    const std::size_t y0 = 2 * y;
    const std::size_t y1 = std::min(y0 + 1, src.height - 1);
    for (std::size_t x = 0; x < out.width; ++x) {
      const std::size_t x0 = 2 * x;
      const std::size_t x1 = std::min(x0 + 1, src.width - 1);
      const unsigned count = (x1 != x0 ? 2u : 1u) * (y1 != y0 ? 2u : 1u);
      for (int c = 0; c < 3; ++c) {
        unsigned sum = src.at(x0, y0)[c];
        if (x1 != x0) sum += src.at(x1, y0)[c];
        if (y1 != y0) sum += src.at(x0, y1)[c];
        if (x1 != x0 && y1 != y0) sum += src.at(x1, y1)[c];
        out.at(x, y)[c] = static_cast<std::uint8_t>((sum + count / 2) / count);
      }
    }
  }
  return out;
}

std::size_t pyramid_level_count(std::size_t width, std::size_t height, std::size_t tile_px) {
  std::size_t tiles = std::max(ceil_div(width, tile_px), ceil_div(height, tile_px));
  std::size_t levels = 1;
  while (tiles > 1) {
    tiles = ceil_div(tiles, 2);
    ++levels;
  }
  return levels;
}

TilePyramid build_tile_pyramid(const Image& panorama, std::size_t tile_px) {
  if (tile_px < 64) throw ValidationError("pyramid: tile size must be >= 64");
  if (panorama.width == 0 || panorama.height == 0) throw ValidationError("pyramid: empty panorama");
  TilePyramid pyr;
  pyr.tile_px = tile_px;
  Image current = panorama;
  for (std::size_t z = 0;; ++z) {
    PyramidLevel level;
    level.z = z;
    level.tiles_x = ceil_div(current.width, tile_px);
    level.tiles_y = ceil_div(current.height, tile_px);
    const bool last = level.tiles_x == 1 && level.tiles_y == 1;
    Image next = last ? Image{} : downsample(current);
    level.image = std::move(current);
    pyr.levels.push_back(std::move(level));
    if (last) break;
    current = std::move(next);
  }
  return pyr;
}

void write_pyramid(const TilePyramid& pyramid, const std::filesystem::path& dir) {
  std::error_code ec;
  for (const auto& level : pyramid.levels) {
    for (std::size_t tx = 0; tx < level.tiles_x; ++tx) {
      const auto col = dir / std::to_string(level.z) / std::to_string(tx);
      std::filesystem::create_directories(col, ec);
      if (ec) throw IoError("cannot create " + col.string() + ": " + ec.message());
      for (std::size_t ty = 0; ty < level.tiles_y; ++ty) {
        write_png(level.tile(tx, ty, pyramid.tile_px), col / (std::to_string(ty) + ".png"));
      }
    }
  }
}

Image reassemble_level(const std::filesystem::path& dir, std::size_t z, std::size_t tiles_x,
                       std::size_t tiles_y) {
  std::vector<Image> tiles;
  std::size_t width = 0;
  std::size_t height = 0;
  for (std::size_t ty = 0; ty < tiles_y; ++ty) {
    for (std::size_t tx = 0; tx < tiles_x; ++tx) {
      tiles.push_back(read_png(dir / std::to_string(z) / std::to_string(tx) /
                               (std::to_string(ty) + ".png")));
      if (ty == 0) width += tiles.back().width;
      if (tx == 0) height += tiles.back().height;
    }
  }
  Image out(width, height);
  std::size_t y = 0;
  for (std::size_t ty = 0; ty < tiles_y; ++ty) {
    std::size_t x = 0;
    const std::size_t row_h = tiles[ty * tiles_x].height;
    for (std::size_t tx = 0; tx < tiles_x; ++tx) {
      const Image& t = tiles[ty * tiles_x + tx];
      if (t.height != row_h || x + t.width > width || y + t.height > height) {
        throw ValidationError("pyramid: level " + std::to_string(z) + " tiles do not fit together");
      }
      for (std::size_t r = 0; r < t.height; ++r) {
        std::memcpy(out.at(x, y + r), t.at(0, r), t.width * 3);
      }
      x += t.width;
    }
    if (x != width) throw ValidationError("pyramid: ragged tile row");
    y += row_h;
  }
  return out;
}

}  // namespace vista::atlas
