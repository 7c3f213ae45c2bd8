#include "vista/cartography.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "vista/error.hpp"

namespace vista::cartography {

Point2 DensityField::cell_center(std::size_t cx, std::size_t cy) const {
  return {bounds.min_x + (static_cast<double>(cx) + 0.5) * cell_width(),
          bounds.min_y + (static_cast<double>(cy) + 0.5) * cell_height()};
}

std::pair<std::size_t, std::size_t> DensityField::cell_of(const Point2& p) const {
  auto index = [](double offset, double size, std::size_t count) {
    const double f = std::floor(offset / size);
    if (!(f > 0.0)) return std::size_t{0};
    return std::min(count - 1, static_cast<std::size_t>(f));
  };
  return {index(p.x - bounds.min_x, cell_width(), width),
          index(p.y - bounds.min_y, cell_height(), height)};
}

double default_bandwidth(const Bounds& b) { return 0.02 * std::hypot(b.width(), b.height()); }

DensityField estimate_density(const Embedding2D& emb, std::size_t grid_w, double bandwidth,
                              double padding) {
  if (grid_w < 8) throw ValidationError("density: grid width must be >= 8");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw ValidationError("density: bandwidth must be positive");
  }
  if (padding < 0.0) throw ValidationError("density: padding must be >= 0");
  if (emb.coords.empty()) throw ValidationError("density: empty embedding");
  Bounds b = layout::bounds_of(emb.coords);
  b.min_x -= padding;
  b.min_y -= padding;
  b.max_x += padding;
  b.max_y += padding;
  if (!(b.width() > 0.0) || !(b.height() > 0.0)) {
    throw ValidationError("density: degenerate bounds (points do not span both axes)");
  }

  DensityField f;
  f.bounds = b;
  f.bandwidth = bandwidth;
  f.width = grid_w;
  f.height = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(grid_w) * b.height() / b.width())));
  f.cells.assign(f.width * f.height, 0.0);

  // The kernel factorizes into x and y terms.
  const std::size_t n = emb.size();
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  std::vector<double> kx(n * f.width);
  std::vector<double> ky(n * f.height);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t cx = 0; cx < f.width; ++cx) {
      const double dx = f.cell_center(cx, 0).x - emb.coords[p].x;
      kx[p * f.width + cx] = std::exp(-dx * dx * inv);
    }
    for (std::size_t cy = 0; cy < f.height; ++cy) {
      const double dy = f.cell_center(0, cy).y - emb.coords[p].y;
      ky[p * f.height + cy] = std::exp(-dy * dy * inv);
    }
  }
  // exp(-r^2 / 2h^2) at r = kKernelRadius * h; smaller products lie outside
  // the kernel support.
  const double cutoff = std::exp(-0.5 * kKernelRadius * kKernelRadius);
  for (std::size_t cy = 0; cy < f.height; ++cy) {
    for (std::size_t cx = 0; cx < f.width; ++cx) {
      double s = 0.0;
      for (std::size_t p = 0; p < n; ++p) {
        const double k = kx[p * f.width + cx] * ky[p * f.height + cy];
        if (k >= cutoff) s += k;
      }
      f.cells[cy * f.width + cx] = s;
    }
  }
  return f;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(values.size() - 1, lo + 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::size_t medoid_of(std::span<const std::size_t> members, const metric::DistanceMatrix& dist) {
  if (members.empty()) throw ValidationError("medoid of an empty set");
  std::size_t best = members[0];
  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t a : members) {
    double s = 0.0;
    for (std::size_t b : members) s += dist(a, b);
    if (s < best_sum || (s == best_sum && a < best)) {
      best_sum = s;
      best = a;
    }
  }
  return best;
}

namespace {

struct Vertex {
  std::int64_t x;
  std::int64_t y;
  friend bool operator==(const Vertex&, const Vertex&) = default;
};

std::uint64_t vertex_key(const Vertex& v) {
  return (static_cast<std::uint64_t>(v.x) << 32) | static_cast<std::uint64_t>(v.y & 0xffffffff);
}

double ring_area(const std::vector<Vertex>& ring) {
  double a = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    a += static_cast<double>(ring[i].x * ring[i + 1].y - ring[i + 1].x * ring[i].y);
  }
  return 0.5 * a;
}

}  // namespace

std::vector<Ring> trace_outline(const DensityField& field, std::span<const std::size_t> cells) {
  std::vector<char> in(field.width * field.height, 0);
  for (auto c : cells) in[c] = 1;
  auto inside = [&](std::int64_t cx, std::int64_t cy) {
    if (cx < 0 || cy < 0 || cx >= static_cast<std::int64_t>(field.width) ||
        cy >= static_cast<std::int64_t>(field.height)) {
      return false;
    }
    return in[static_cast<std::size_t>(cy) * field.width + static_cast<std::size_t>(cx)] != 0;
  };

  // Directed boundary edges, region on the right-hand side when viewed with
  // y pointing down.
  struct Edge {
    Vertex from;
    Vertex to;
  };
  std::vector<Edge> edges;
  for (auto c : cells) {
    const auto cx = static_cast<std::int64_t>(c % field.width);
    const auto cy = static_cast<std::int64_t>(c / field.width);
    if (!inside(cx, cy - 1)) edges.push_back({{cx, cy}, {cx + 1, cy}});
    if (!inside(cx + 1, cy)) edges.push_back({{cx + 1, cy}, {cx + 1, cy + 1}});
    if (!inside(cx, cy + 1)) edges.push_back({{cx + 1, cy + 1}, {cx, cy + 1}});
    if (!inside(cx - 1, cy)) edges.push_back({{cx, cy + 1}, {cx, cy}});
  }
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> outgoing;
  for (std::size_t e = 0; e < edges.size(); ++e) outgoing[vertex_key(edges[e].from)].push_back(e);

  std::vector<char> used(edges.size(), 0);
  std::vector<std::vector<Vertex>> loops;
  for (std::size_t start = 0; start < edges.size(); ++start) {
    if (used[start]) continue;
    std::vector<Vertex> loop{edges[start].from};
    std::size_t cur = start;
    for (;;) {
      used[cur] = 1;
      const Vertex at = edges[cur].to;
      loop.push_back(at);
      if (at == loop.front()) break;
      const std::int64_t dx = edges[cur].to.x - edges[cur].from.x;
      const std::int64_t dy = edges[cur].to.y - edges[cur].from.y;
      // At pinch points prefer the turn that hugs the current cell, so
      // diagonal neighbours stay in separate rings.
      const std::int64_t dirs[3][2] = {{-dy, dx}, {dx, dy}, {dy, -dx}};
      std::size_t next = edges.size();
      for (const auto& d : dirs) {
        for (auto e : outgoing[vertex_key(at)]) {
          if (used[e]) continue;
          if (edges[e].to.x - edges[e].from.x == d[0] && edges[e].to.y - edges[e].from.y == d[1]) {
            next = e;
            break;
          }
        }
        if (next != edges.size()) break;
      }
      if (next == edges.size()) break;
      cur = next;
    }
    // Drop collinear vertices.
    std::vector<Vertex> simple;
    for (std::size_t i = 0; i + 1 < loop.size(); ++i) {
      const Vertex& prev = loop[(i + loop.size() - 2) % (loop.size() - 1)];
      const Vertex& v = loop[i];
      const Vertex& nxt = loop[i + 1];
      const std::int64_t cross = (v.x - prev.x) * (nxt.y - v.y) - (v.y - prev.y) * (nxt.x - v.x);
      if (cross != 0) simple.push_back(v);
    }
    if (simple.empty()) continue;
    simple.push_back(simple.front());
    loops.push_back(std::move(simple));
  }
  if (loops.empty()) return {};

  std::size_t outer = 0;
  for (std::size_t l = 1; l < loops.size(); ++l) {
    if (std::abs(ring_area(loops[l])) > std::abs(ring_area(loops[outer]))) outer = l;
  }
  std::rotate(loops.begin(), loops.begin() + static_cast<std::ptrdiff_t>(outer),
              loops.begin() + static_cast<std::ptrdiff_t>(outer) + 1);

  std::vector<Ring> rings;
  for (const auto& loop : loops) {
    Ring r;
    r.reserve(loop.size());
    for (const auto& v : loop) {
      r.push_back({field.bounds.min_x + static_cast<double>(v.x) * field.cell_width(),
                   field.bounds.min_y + static_cast<double>(v.y) * field.cell_height()});
    }
    rings.push_back(std::move(r));
  }
  return rings;
}

ClusterSet extract_clusters(const DensityField& field, const Embedding2D& emb,
                            const metric::DistanceMatrix& dist, double q) {
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("clusters: quantile must lie in (0, 1)");
  if (dist.size() != emb.size()) {
    throw ValidationError("clusters: distance matrix and embedding sizes differ");
  }
  std::vector<double> positive;
  for (double v : field.cells)
    if (v > 0.0) positive.push_back(v);
  if (positive.empty()) throw ValidationError("clusters: density field has no positive cells");
  const double threshold = quantile(std::move(positive), q);

  const std::size_t w = field.width;
  const std::size_t h = field.height;
  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> label(w * h, kNone);
  std::vector<std::vector<std::size_t>> regions;
  for (std::size_t c = 0; c < w * h; ++c) {
    if (label[c] != kNone || !(field.cells[c] > threshold)) continue;
    const auto id = static_cast<std::uint32_t>(regions.size());
    std::vector<std::size_t> region;
    std::vector<std::size_t> stack{c};
    label[c] = id;
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      region.push_back(cur);
      const std::size_t cx = cur % w;
      const std::size_t cy = cur / w;
      auto visit = [&](std::size_t nb) {
        if (label[nb] == kNone && field.cells[nb] > threshold) {
          label[nb] = id;
          stack.push_back(nb);
        }
      };
      if (cx > 0) visit(cur - 1);
      if (cx + 1 < w) visit(cur + 1);
      if (cy > 0) visit(cur - w);
      if (cy + 1 < h) visit(cur + w);
    }
    std::sort(region.begin(), region.end());
    regions.push_back(std::move(region));
  }
  if (regions.empty()) {
    throw ValidationError("clusters: no cell exceeds the density threshold");
  }

  auto rect_distance = [&](const Point2& p, std::size_t cell) {
    const double cw = field.cell_width();
    const double ch = field.cell_height();
    const double x0 = field.bounds.min_x + static_cast<double>(cell % w) * cw;
    const double y0 = field.bounds.min_y + static_cast<double>(cell / w) * ch;
    const double dx = std::max({x0 - p.x, 0.0, p.x - (x0 + cw)});
    const double dy = std::max({y0 - p.y, 0.0, p.y - (y0 + ch)});
    return std::hypot(dx, dy);
  };

  std::vector<std::uint32_t> region_of(emb.size());
  std::vector<std::vector<std::size_t>> members(regions.size());
  for (std::size_t i = 0; i < emb.size(); ++i) {
    const auto [cx, cy] = field.cell_of(emb.coords[i]);
    std::uint32_t r = label[cy * w + cx];
    if (r == kNone) {
      double best = std::numeric_limits<double>::infinity();
      for (std::uint32_t k = 0; k < regions.size(); ++k) {
        for (auto cell : regions[k]) {
          const double d = rect_distance(emb.coords[i], cell);
          if (d < best) {
            best = d;
            r = k;
          }
        }
      }
    }
    region_of[i] = r;
    members[r].push_back(i);
  }

  ClusterSet cs;
  cs.assignment.resize(emb.size());
  std::vector<std::uint32_t> renumber(regions.size(), kNone);
  for (std::size_t r = 0; r < regions.size(); ++r) {
    if (members[r].empty()) continue;
    Cluster c;
    c.id = static_cast<std::uint32_t>(cs.clusters.size());
    renumber[r] = c.id;
    c.cells = regions[r];
    c.members = members[r];
    c.medoid = medoid_of(c.members, dist);
    c.outline = trace_outline(field, c.cells);
    cs.clusters.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < emb.size(); ++i) cs.assignment[i] = renumber[region_of[i]];
  return cs;
}

std::vector<ClusterEdge> cluster_connections(const ClusterSet& cs, const neighbors::KnnGraph& g) {
  if (g.n() != cs.assignment.size()) {
    throw ValidationError("connections: graph and cluster assignment sizes differ");
  }
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> counts;
  for (std::size_t i = 0; i < g.n(); ++i) {
    const auto ci = cs.assignment[i];
    for (auto j : g.neighbors(i)) {
      const auto cj = cs.assignment[j];
      if (ci == cj) continue;
      ++counts[{std::min(ci, cj), std::max(ci, cj)}];
    }
  }
  std::vector<ClusterEdge> out;
  for (const auto& [pair, count] : counts) {
    const std::size_t smaller = std::min(cs.clusters[pair.first].members.size(),
                                         cs.clusters[pair.second].members.size());
    out.push_back({pair.first, pair.second,
                   static_cast<double>(count) / static_cast<double>(smaller)});
  }
  std::stable_sort(out.begin(), out.end(), [](const ClusterEdge& x, const ClusterEdge& y) {
    return x.strength > y.strength;
  });
  return out;
}

std::pair<std::size_t, std::size_t> tile_of(const Point2& p, const Bounds& b, std::size_t tiles_x,
                                            std::size_t tiles_y) {
  auto index = [](double v, double lo, double extent, std::size_t count) {
    if (!(extent > 0.0)) return std::size_t{0};
    const double f = std::floor((v - lo) * static_cast<double>(count) / extent);
    if (!(f > 0.0)) return std::size_t{0};
    return std::min(count - 1, static_cast<std::size_t>(f));
  };
  return {index(p.x, b.min_x, b.width(), tiles_x), index(p.y, b.min_y, b.height(), tiles_y)};
}

TileGrid assign_items(const Embedding2D& emb, std::size_t tiles_x, std::size_t tiles_y) {
  if (tiles_x < 1 || tiles_y < 1) throw ValidationError("tiles: need at least one tile per axis");
  TileGrid grid;
  grid.bounds = emb.bounds;
  grid.tiles_x = tiles_x;
  grid.tiles_y = tiles_y;
  grid.tiles.resize(tiles_x * tiles_y);
  for (std::size_t i = 0; i < emb.size(); ++i) {
    const auto [tx, ty] = tile_of(emb.coords[i], emb.bounds, tiles_x, tiles_y);
    grid.tiles[ty * tiles_x + tx].push_back(i);
  }
  return grid;
}

std::vector<std::size_t> choose_representatives(std::span<const std::size_t> items,
                                                const metric::DistanceMatrix& dist,
                                                std::size_t min_points, std::size_t max_count) {
  if (items.empty()) throw ValidationError("representatives: empty item set");
  std::vector<std::size_t> pool(items.begin(), items.end());
  if (pool.size() >= min_points + 1) {
    std::size_t worst = 0;
    double worst_sum = -1.0;
    for (std::size_t a = 0; a < pool.size(); ++a) {
      double s = 0.0;
      for (std::size_t b : pool) s += dist(pool[a], b);
      if (s > worst_sum) {
        worst_sum = s;
        worst = a;
      }
    }
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  const std::size_t center = medoid_of(pool, dist);
  std::stable_sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
    const double da = dist(center, a);
    const double db = dist(center, b);
    if (da != db) return da < db;
    return a < b;
  });
  if (center != pool.front()) {
    // The medoid leads even when another item ties it at distance zero.
    pool.erase(std::find(pool.begin(), pool.end(), center));
    pool.insert(pool.begin(), center);
  }
  if (max_count != 0) {
    const std::size_t keep = std::max(max_count, std::min(min_points, pool.size()));
    if (pool.size() > keep) pool.resize(keep);
  }
  return pool;
}

std::vector<std::size_t> round_robin(std::span<const std::size_t> reps, std::size_t steps) {
  if (reps.empty()) throw ValidationError("schedule: no representatives");
  std::vector<std::size_t> out(steps);
  for (std::size_t s = 0; s < steps; ++s) out[s] = reps[s % reps.size()];
  return out;
}

PixelBox tile_pixels(std::size_t tx, std::size_t ty, std::size_t tiles_x, std::size_t tiles_y,
                     std::size_t width, std::size_t height) {
  const std::size_t x0 = tx * width / tiles_x;
  const std::size_t x1 = (tx + 1) * width / tiles_x;
  const std::size_t y0 = ty * height / tiles_y;
  const std::size_t y1 = (ty + 1) * height / tiles_y;
  return {x0, y0, x1 - x0, y1 - y0};
}

RenderPlan build_render_plan(const TileGrid& grid,
                             const std::vector<std::vector<std::size_t>>& reps,
                             std::size_t steps, std::size_t width_px, std::size_t height_px) {
  if (steps < 1) throw ValidationError("render plan: steps must be >= 1");
  if (width_px == 0 || height_px == 0) throw ValidationError("render plan: zero-size panorama");
  if (width_px < grid.tiles_x || height_px < grid.tiles_y) {
    throw ValidationError("render plan: panorama smaller than one pixel per tile");
  }
  if (reps.size() != grid.tiles.size()) {
    throw ValidationError("render plan: representative lists do not match the tile grid");
  }
  RenderPlan plan;
  plan.steps = steps;
  plan.width = width_px;
  plan.height = height_px;
  plan.bounds = grid.bounds;
  for (std::size_t ty = 0; ty < grid.tiles_y; ++ty) {
    for (std::size_t tx = 0; tx < grid.tiles_x; ++tx) {
      const auto& items = grid.tile(tx, ty);
      if (items.empty()) continue;
      const auto& r = reps[ty * grid.tiles_x + tx];
      if (r.empty()) {
        throw ValidationError("render plan: non-empty tile without representatives");
      }
      for (auto item : r) {
        if (std::find(items.begin(), items.end(), item) == items.end()) {
          throw ValidationError("render plan: representative outside its tile");
        }
      }
      RenderRegion region;
      region.id = "t" + std::to_string(tx) + "_" + std::to_string(ty);
      region.tile_x = tx;
      region.tile_y = ty;
      region.bbox = tile_pixels(tx, ty, grid.tiles_x, grid.tiles_y, width_px, height_px);
      region.representatives = r;
      region.schedule = round_robin(r, steps);
      plan.regions.push_back(std::move(region));
    }
  }
  return plan;
}

}  // namespace vista::cartography
