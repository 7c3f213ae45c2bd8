#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "vista/cartography.hpp"
#include "vista/error.hpp"
#include "vista/random.hpp"

using namespace vista;
using namespace vista::cartography;

namespace {

std::vector<Point2> blob(Point2 c, double sigma, std::size_t n, Rng& rng) {
  std::vector<Point2> out(n);
  for (auto& p : out) p = {c.x + sigma * rng.normal(), c.y + sigma * rng.normal()};
  return out;
}

double shoelace(const Ring& r) {
  double a = 0.0;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) a += r[i].x * r[i + 1].y - r[i + 1].x * r[i].y;
  return 0.5 * a;
}

DensityField flat_field(std::size_t w, std::size_t h, double value) {
  DensityField f;
  f.width = w;
  f.height = h;
  f.bounds = {0, 0, static_cast<double>(w), static_cast<double>(h)};
  f.bandwidth = 1.0;
  f.cells.assign(w * h, value);
  return f;
}

bool is_local_max(const DensityField& f, std::size_t cx, std::size_t cy) {
  const double v = f.at(cx, cy);
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const auto x = static_cast<std::int64_t>(cx) + dx;
      const auto y = static_cast<std::int64_t>(cy) + dy;
      if (x < 0 || y < 0 || x >= static_cast<std::int64_t>(f.width) ||
          y >= static_cast<std::int64_t>(f.height))
        continue;
      if (f.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) >= v) return false;
    }
  return v > 0.0;
}

}  // namespace

TEST_CASE("estimate_density") {
  SUBCASE("single point peaks at its own cell") {
    // Padding is symmetric, so the point sits at the grid center; an odd
    // grid puts that center inside a cell instead of on a corner.
    const auto emb = test::embedding_of({{3.3, 7.1}});
    const auto f = estimate_density(emb, 33, 0.5, 4.0);
    REQUIRE(f.height == 33);
    const auto best = std::max_element(f.cells.begin(), f.cells.end()) - f.cells.begin();
    const auto [cx, cy] = f.cell_of({3.3, 7.1});
    CHECK(static_cast<std::size_t>(best) == cy * f.width + cx);
  }
  SUBCASE("two separated points give two maxima") {
    const auto emb = test::embedding_of({{0, 0}, {10, 5}});
    const auto f = estimate_density(emb, 64, 0.8, 2.0);
    std::size_t maxima = 0;
    for (std::size_t cy = 0; cy < f.height; ++cy)
      for (std::size_t cx = 0; cx < f.width; ++cx) maxima += is_local_max(f, cx, cy);
    CHECK(maxima == 2);
  }
  SUBCASE("total mass matches the Gaussian integral") {
    Rng rng(5);
    std::vector<Point2> pts;
    for (int i = 0; i < 50; ++i) pts.push_back({rng.uniform(0, 20), rng.uniform(0, 10)});
    const double bw = 0.6;
    const auto f = estimate_density(test::embedding_of(pts), 200, bw, 4 * bw);
    const double mass = std::accumulate(f.cells.begin(), f.cells.end(), 0.0) * f.cell_width() *
                        f.cell_height();
    const double expected = 50 * 2 * 3.141592653589793 * bw * bw;
    CHECK(std::abs(mass - expected) < 0.05 * expected);
  }
  SUBCASE("adding a point never lowers a cell") {
    Rng rng(6);
    auto pts = blob({5, 5}, 2.0, 40, rng);
    pts.push_back({-10, -10});
    pts.push_back({20, 20});
    const auto before = estimate_density(test::embedding_of(pts), 48, 1.0);
    pts.push_back({4.0, 6.0});
    const auto after = estimate_density(test::embedding_of(pts), 48, 1.0);
    REQUIRE(before.bounds == after.bounds);
    for (std::size_t c = 0; c < before.cells.size(); ++c) CHECK(after.cells[c] >= before.cells[c]);
  }
  SUBCASE("far cells are exactly zero") {
    const auto f = estimate_density(test::embedding_of({{0, 0}, {100, 50}}), 100, 1.0);
    CHECK(f.at(50, f.height / 2) == 0.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(estimate_density(test::embedding_of({{1, 1}, {1, 1}}), 16, 1.0), ValidationError);
    CHECK_THROWS_AS(estimate_density(test::embedding_of({{0, 0}, {1, 1}}), 4, 1.0), ValidationError);
    CHECK_THROWS_AS(estimate_density(test::embedding_of({{0, 0}, {1, 1}}), 16, 0.0), ValidationError);
  }
  CHECK(default_bandwidth({0, 0, 30, 40}) == doctest::Approx(1.0));
}

TEST_CASE("quantile and medoid") {
  CHECK(quantile({4, 1, 3, 2}, 0.5) == 2.5);
  CHECK(quantile({1, 2, 3, 4, 5}, 0.25) == 2.0);
  CHECK_THROWS_AS(quantile({}, 0.5), ValidationError);

  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<Point2> pts(n);
    for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
    const auto d = metric::euclidean_distances(pts);
    std::vector<std::size_t> members(n);
    std::iota(members.begin(), members.end(), 0);
    std::size_t want = 0;
    double best = 1e300;
    for (std::size_t a = 0; a < n; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) s += d(a, b);
      if (s < best) best = s, want = a;
    }
    CHECK(medoid_of(members, d) == want);
  }
}

TEST_CASE("trace_outline") {
  DensityField f = flat_field(6, 5, 1.0);
  SUBCASE("single cell") {
    const std::vector<std::size_t> cells{2 * 6 + 3};
    const auto rings = trace_outline(f, cells);
    REQUIRE(rings.size() == 1);
    CHECK(rings[0].size() == 5);
    CHECK(rings[0].front() == rings[0].back());
    CHECK(std::abs(shoelace(rings[0])) == 1.0);
  }
  SUBCASE("L shape") {
    const std::vector<std::size_t> cells{0, 1, 6};
    const auto rings = trace_outline(f, cells);
    REQUIRE(rings.size() == 1);
    CHECK(rings[0].size() == 7);
    CHECK(std::abs(shoelace(rings[0])) == 3.0);
  }
  SUBCASE("ring with a hole") {
    std::vector<std::size_t> cells;
    for (std::size_t y = 1; y <= 3; ++y)
      for (std::size_t x = 1; x <= 3; ++x)
        if (!(x == 2 && y == 2)) cells.push_back(y * 6 + x);
    const auto rings = trace_outline(f, cells);
    REQUIRE(rings.size() == 2);
    CHECK(std::abs(shoelace(rings[0])) == 9.0);
    CHECK(std::abs(shoelace(rings[1])) == 1.0);
  }
}

TEST_CASE("extract_clusters") {
  SUBCASE("two blobs") {
    Rng rng(10);
    auto pts = blob({10, 10}, 1.0, 200, rng);
    const auto b = blob({30, 12}, 1.0, 200, rng);
    pts.insert(pts.end(), b.begin(), b.end());
    const auto emb = test::embedding_of(pts);
    const auto d = metric::euclidean_distances(pts);
    const auto f = estimate_density(emb, 128, default_bandwidth(emb.bounds));
    const auto cs = extract_clusters(f, emb, d);
    REQUIRE(cs.clusters.size() == 2);
    for (std::size_t blob_id = 0; blob_id < 2; ++blob_id) {
      std::map<std::uint32_t, int> votes;
      for (std::size_t i = blob_id * 200; i < blob_id * 200 + 200; ++i) ++votes[cs.assignment[i]];
      int top = 0;
      for (auto [_, v] : votes) top = std::max(top, v);
      CHECK(top >= 190);
    }
    std::size_t covered = 0;
    for (const auto& c : cs.clusters) {
      covered += c.members.size();
      CHECK(std::find(c.members.begin(), c.members.end(), c.medoid) != c.members.end());
      CHECK(c.medoid == medoid_of(c.members, d));
      CHECK_FALSE(c.outline.empty());
      for (auto m : c.members) CHECK(cs.assignment[m] == c.id);
    }
    CHECK(covered == pts.size());
  }
  SUBCASE("single blob") {
    Rng rng(11);
    const auto pts = blob({0, 0}, 1.0, 300, rng);
    const auto emb = test::embedding_of(pts);
    const auto f = estimate_density(emb, 64, default_bandwidth(emb.bounds) * 4);
    const auto cs = extract_clusters(f, emb, metric::euclidean_distances(pts));
    REQUIRE(cs.clusters.size() == 1);
    CHECK(cs.clusters[0].members.size() == 300);
  }
  SUBCASE("no cell above the threshold") {
    const auto emb = test::embedding_of({{0, 0}, {6, 5}});
    const auto d = metric::euclidean_distances(emb.coords);
    CHECK_THROWS_AS(extract_clusters(flat_field(6, 5, 1.0), emb, d, 0.6), ValidationError);
    CHECK_THROWS_AS(extract_clusters(flat_field(6, 5, 1.0), emb, d, 1.0), ValidationError);
  }
}

TEST_CASE("cluster_connections") {
  ClusterSet cs;
  cs.clusters.resize(2);
  cs.clusters[0].id = 0;
  cs.clusters[0].members = {0, 1, 2};
  cs.clusters[1].id = 1;
  cs.clusters[1].members = {3, 4, 5};
  cs.assignment = {0, 0, 0, 1, 1, 1};
  auto graph = [](std::vector<std::uint32_t> nb) {
    return neighbors::KnnGraph(6, 1, std::move(nb), std::vector<double>(6, 1.0));
  };
  CHECK(cluster_connections(cs, graph({1, 2, 0, 4, 5, 3})).empty());

  const auto edges = cluster_connections(cs, graph({3, 4, 5, 4, 5, 3}));
  REQUIRE(edges.size() == 1);
  CHECK(edges[0].a == 0);
  CHECK(edges[0].b == 1);
  CHECK(edges[0].strength >= 1.0);

  ClusterSet one;
  one.clusters.resize(1);
  one.clusters[0].members = {0, 1, 2, 3, 4, 5};
  one.assignment.assign(6, 0);
  CHECK(cluster_connections(one, graph({1, 2, 0, 4, 5, 3})).empty());
}

TEST_CASE("tiles") {
  const Bounds b{0, 0, 2, 2};
  CHECK(tile_of({1, 1}, b, 2, 2) == std::pair<std::size_t, std::size_t>{1, 1});
  CHECK(tile_of({2, 2}, b, 2, 2) == std::pair<std::size_t, std::size_t>{1, 1});
  CHECK(tile_of({0, 0}, b, 2, 2) == std::pair<std::size_t, std::size_t>{0, 0});
  CHECK(tile_of({0.999, 1.0}, b, 2, 2) == std::pair<std::size_t, std::size_t>{0, 1});
  CHECK(tile_of({177.77, 100}, Bounds{0, 0, 177.77, 100}, 16, 9) ==
        std::pair<std::size_t, std::size_t>{15, 8});

  Rng rng(12);
  std::vector<Point2> pts(500);
  for (auto& p : pts) p = {rng.uniform(0, 16), rng.uniform(0, 9)};
  pts.push_back({16, 9});
  const auto grid = assign_items(test::embedding_of(pts), 16, 9);
  std::size_t total = 0;
  std::vector<int> seen(pts.size(), 0);
  for (const auto& t : grid.tiles) {
    total += t.size();
    for (auto i : t) ++seen[i];
  }
  CHECK(total == pts.size());
  CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
  CHECK(grid.tile(15, 8).back() == pts.size() - 1);
  CHECK_THROWS_AS(assign_items(test::embedding_of(pts), 0, 3), ValidationError);

  CHECK(tile_pixels(0, 0, 3, 1, 100, 10) == PixelBox{0, 0, 33, 10});
  CHECK(tile_pixels(2, 0, 3, 1, 100, 10) == PixelBox{66, 0, 34, 10});
}

TEST_CASE("choose_representatives") {
  std::vector<Point2> pts;
  for (int i = 0; i < 9; ++i) pts.push_back({static_cast<double>(i % 3), static_cast<double>(i / 3)});
  pts.push_back({50, 50});
  const auto d = metric::euclidean_distances(pts);

  std::vector<std::size_t> all(10);
  std::iota(all.begin(), all.end(), 0);
  const auto reps = choose_representatives(all, d);
  CHECK(reps.size() == 9);
  CHECK(std::find(reps.begin(), reps.end(), 9) == reps.end());
  CHECK(reps.front() == 4);  // grid center is the medoid

  const std::vector<std::size_t> three{0, 1, 9};
  auto r3 = choose_representatives(three, d);
  std::sort(r3.begin(), r3.end());
  CHECK(r3 == three);

  const std::vector<std::size_t> one{7};
  CHECK(choose_representatives(one, d) == one);

  const std::vector<std::size_t> five{0, 1, 2, 3, 9};
  CHECK(choose_representatives(five, d).size() == 4);

  CHECK(choose_representatives(all, d, 4, 2).size() == 4);
  CHECK(choose_representatives(all, d, 4, 6).size() == 6);
  CHECK_THROWS_AS(choose_representatives(std::vector<std::size_t>{}, d), ValidationError);
}

TEST_CASE("round-robin schedules") {
  for (std::size_t r = 1; r <= 16; ++r) {
    std::vector<std::size_t> reps(r);
    std::iota(reps.begin(), reps.end(), 100);
    for (std::size_t steps = 1; steps <= 200; ++steps) {
      const auto s = round_robin(reps, steps);
      REQUIRE(s.size() == steps);
      std::map<std::size_t, std::size_t> uses;
      for (auto x : s) ++uses[x];
      std::size_t lo = steps, hi = 0;
      for (auto x : reps) {
        lo = std::min(lo, uses[x]);
        hi = std::max(hi, uses[x]);
      }
      CHECK(hi - lo <= 1);
      std::size_t distinct = 0;
      for (auto x : reps) distinct += uses[x] > 0;
      CHECK(distinct == std::min(r, steps));
    }
  }
  const std::vector<std::size_t> four{1, 2, 3, 4};
  const auto s = round_robin(four, 100);
  for (auto x : four) CHECK(std::count(s.begin(), s.end(), x) == 25);
  const std::vector<std::size_t> single{7};
  CHECK(round_robin(single, 100) == std::vector<std::size_t>(100, 7));
  CHECK_THROWS_AS(round_robin(std::vector<std::size_t>{}, 3), ValidationError);
}

TEST_CASE("build_render_plan") {
  const auto emb = test::embedding_of({{0, 0}, {0.5, 0.2}, {0.2, 0.4}, {3.9, 1.9}, {4, 2}});
  const auto grid = assign_items(emb, 4, 2);
  const auto d = metric::euclidean_distances(emb.coords);
  std::vector<std::vector<std::size_t>> reps(grid.tiles.size());
  for (std::size_t t = 0; t < grid.tiles.size(); ++t)
    if (!grid.tiles[t].empty()) reps[t] = choose_representatives(grid.tiles[t], d);
  const auto plan = build_render_plan(grid, reps, 10, 400, 200);
  REQUIRE(plan.regions.size() == 2);
  CHECK(plan.regions[0].id == "t0_0");
  CHECK(plan.regions[0].bbox == PixelBox{0, 0, 100, 100});
  CHECK(plan.regions[1].id == "t3_1");
  CHECK(plan.regions[1].bbox == PixelBox{300, 100, 100, 100});
  CHECK(plan.bounds == emb.bounds);
  for (const auto& r : plan.regions) {
    CHECK(r.schedule.size() == 10);
    for (auto item : r.schedule) {
      CHECK(std::find(r.representatives.begin(), r.representatives.end(), item) !=
            r.representatives.end());
    }
  }
  CHECK_THROWS_AS(build_render_plan(grid, reps, 10, 0, 200), ValidationError);
  CHECK_THROWS_AS(build_render_plan(grid, reps, 0, 400, 200), ValidationError);
  auto wrong = reps;
  wrong[0] = {3};
  CHECK_THROWS_AS(build_render_plan(grid, wrong, 10, 400, 200), ValidationError);
}
