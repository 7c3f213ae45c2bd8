#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "vista/cartography.hpp"
#include "vista/corpus.hpp"
#include "vista/image.hpp"
#include "vista/layout.hpp"
#include "vista/neighbors.hpp"
#include "vista/renderer.hpp"

namespace vista::atlas {

inline constexpr const char* kSchemaVersion = "vista-atlas/1";

struct PyramidLevel {
  std::size_t z = 0;
  std::size_t tiles_x = 0;
  std::size_t tiles_y = 0;
  Image image;

  /// Tile (tx, ty); edge tiles may be smaller than tile_px.
  Image tile(std::size_t tx, std::size_t ty, std::size_t tile_px) const;
};

/// Level 0 is full resolution; each further level halves it until a single
/// tile covers the image.
struct TilePyramid {
  std::size_t tile_px = 256;
  std::vector<PyramidLevel> levels;
};

/// 2x2 box filter with round-half-up; odd edges average the pixels present.
Image downsample(const Image& src);

TilePyramid build_tile_pyramid(const Image& panorama, std::size_t tile_px = 256);

/// 1 + ceil(log2(max(tiles_x, tiles_y))) for the level-0 tile counts.
std::size_t pyramid_level_count(std::size_t width, std::size_t height, std::size_t tile_px);

/// Writes tiles/{z}/{x}/{y}.png under `dir`.
void write_pyramid(const TilePyramid& pyramid, const std::filesystem::path& dir);

/// Stitches a level's tiles (read from `dir`) back into one image.
Image reassemble_level(const std::filesystem::path& dir, std::size_t z, std::size_t tiles_x,
                       std::size_t tiles_y);

struct AtlasBundle {
  std::filesystem::path dir;
  std::filesystem::path manifest;
  std::size_t items = 0;
  std::size_t clusters = 0;
  std::size_t levels = 0;
};

struct BundleContents {
  const corpus::LatentSlice& slice;
  const layout::Embedding2D& embedding;
  const cartography::ClusterSet& clusters;
  const std::vector<cartography::ClusterEdge>& connections;
  const neighbors::GainCurve& gain_curve;
  const TilePyramid& pyramid;
  const render::Provenance& provenance;
};

/// Manifest text with sorted keys; identical inputs give identical bytes.
std::string manifest_json(const BundleContents& contents);

/// Writes atlas.json and the tile pyramid into `out_dir`.
AtlasBundle export_bundle(const BundleContents& contents, const std::filesystem::path& out_dir);

/// Checks a bundle on disk against the schema: required keys, item
/// coordinates inside the bounds, cluster ids, and one PNG per pyramid tile
/// with the expected level/tile counts. Throws ValidationError.
AtlasBundle validate_bundle(const std::filesystem::path& dir);

}  // namespace vista::atlas
