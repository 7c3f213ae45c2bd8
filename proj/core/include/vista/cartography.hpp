#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vista/layout.hpp"
#include "vista/metric.hpp"
#include "vista/neighbors.hpp"

namespace vista::cartography {

using layout::Bounds;
using layout::Embedding2D;
using metric::Point2;

/// Gaussian kernel density sampled at grid cell centers. Row-major, row 0
/// at bounds.min_y.
struct DensityField {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> cells;
  Bounds bounds;
  double bandwidth = 0.0;

  double at(std::size_t cx, std::size_t cy) const { return cells[cy * width + cx]; }
  double cell_width() const { return bounds.width() / static_cast<double>(width); }
  double cell_height() const { return bounds.height() / static_cast<double>(height); }
  Point2 cell_center(std::size_t cx, std::size_t cy) const;
  /// Cell containing p; points outside the bounds clamp to the border cells.
  std::pair<std::size_t, std::size_t> cell_of(const Point2& p) const;
};

/// Default kernel bandwidth: 2% of the bounds diagonal.
double default_bandwidth(const Bounds& b);

/// Kernel support radius in bandwidths. Cells farther than this from every
/// point have density exactly 0.
inline constexpr double kKernelRadius = 3.0;

/// grid_w >= 8 columns; the row count follows the bounds aspect. `padding`
/// grows the bounds on every side before gridding.
DensityField estimate_density(const Embedding2D& emb, std::size_t grid_w, double bandwidth,
                              double padding = 0.0);

using Ring = std::vector<Point2>;

struct Cluster {
  std::uint32_t id = 0;
  /// Cell indices (cy * width + cx), ascending.
  std::vector<std::size_t> cells;
  /// Item indices, ascending.
  std::vector<std::size_t> members;
  std::size_t medoid = 0;
  /// Closed rings in map units; the first is the exterior, the rest holes.
  std::vector<Ring> outline;

  friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct ClusterSet {
  std::vector<Cluster> clusters;
  /// Cluster id for every item.
  std::vector<std::uint32_t> assignment;

  friend bool operator==(const ClusterSet&, const ClusterSet&) = default;
};

/// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

/// Connected (4-neighborhood) regions of cells above the `quantile` of the
/// positive cell values. Points outside every region join the nearest one.
/// Regions that end up with no members are discarded.
ClusterSet extract_clusters(const DensityField& field, const Embedding2D& emb,
                            const metric::DistanceMatrix& dist, double quantile = 0.6);

/// Index of the member minimizing summed distance to the others (smallest
/// index on ties).
std::size_t medoid_of(std::span<const std::size_t> members, const metric::DistanceMatrix& dist);

/// Boundary rings of a cell region on the field's grid.
std::vector<Ring> trace_outline(const DensityField& field, std::span<const std::size_t> cells);

struct ClusterEdge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  double strength = 0.0;

  friend bool operator==(const ClusterEdge&, const ClusterEdge&) = default;
};

/// Directed kNN edges crossing each cluster pair, divided by the smaller
/// cluster size. Sorted by descending strength, then (a, b).
std::vector<ClusterEdge> cluster_connections(const ClusterSet& cs, const neighbors::KnnGraph& g);

struct TileGrid {
  Bounds bounds;
  std::size_t tiles_x = 0;
  std::size_t tiles_y = 0;
  /// Item indices per tile, row-major (ty * tiles_x + tx), ascending.
  std::vector<std::vector<std::size_t>> tiles;

  const std::vector<std::size_t>& tile(std::size_t tx, std::size_t ty) const {
    return tiles[ty * tiles_x + tx];
  }
};

/// Tile column/row of p under half-open intervals; the max edge belongs to
/// the last tile.
std::pair<std::size_t, std::size_t> tile_of(const Point2& p, const Bounds& b,
                                            std::size_t tiles_x, std::size_t tiles_y);

TileGrid assign_items(const Embedding2D& emb, std::size_t tiles_x, std::size_t tiles_y);

/// Items for a region's prompt rotation. With at least min_points + 1 items
/// the single worst outlier (largest summed distance) is dropped. The rest
/// are ordered by distance to their medoid. `max_count` caps the result
/// (0 = no cap) but never below min(min_points, |items|).
std::vector<std::size_t> choose_representatives(std::span<const std::size_t> items,
                                                const metric::DistanceMatrix& dist,
                                                std::size_t min_points = 4,
                                                std::size_t max_count = 0);

struct PixelBox {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t w = 0;
  std::size_t h = 0;

  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

struct RenderRegion {
  std::string id;
  std::size_t tile_x = 0;
  std::size_t tile_y = 0;
  PixelBox bbox;
  std::vector<std::size_t> representatives;
  /// Item index prompting the region at each diffusion step.
  std::vector<std::size_t> schedule;

  friend bool operator==(const RenderRegion&, const RenderRegion&) = default;
};

struct RenderPlan {
  std::size_t steps = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  /// Map rectangle covered by the panorama.
  Bounds bounds;
  std::vector<RenderRegion> regions;

  friend bool operator==(const RenderPlan&, const RenderPlan&) = default;
};

/// Round-robin schedule: step s uses reps[s mod |reps|].
std::vector<std::size_t> round_robin(std::span<const std::size_t> reps, std::size_t steps);

/// One region per non-empty tile; `reps` is indexed like grid.tiles.
RenderPlan build_render_plan(const TileGrid& grid,
                             const std::vector<std::vector<std::size_t>>& reps,
                             std::size_t steps, std::size_t width_px, std::size_t height_px);

/// Pixel rectangle of tile (tx, ty) on a width x height panorama.
PixelBox tile_pixels(std::size_t tx, std::size_t ty, std::size_t tiles_x, std::size_t tiles_y,
                     std::size_t width, std::size_t height);

}  // namespace vista::cartography
