// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/helpers.hpp"
#include "vista/cartography.hpp"
#include "vista/layout.hpp"
#include "vista/neighbors.hpp"
#include "vista/pipeline.hpp"
#include "vista/random.hpp"
#include "vista/renderer.hpp"
#include "vista/synthetic.hpp"

namespace fs = std::filesystem;
using namespace vista;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

metric::DistanceMatrix uniform_points(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<metric::Point2> pts(n);
  for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
  return metric::euclidean_distances(pts);
}

// Shared synthetic run used by criteria 7, 8, 10, 11 and 12.
struct SyntheticRun {
  test::TempDir dir;
  atlas::PipelineConfig cfg;
  corpus::LatentSlice slice;
  metric::DistanceMatrix dist;
  layout::Embedding2D emb;
  atlas::MapArtifacts map;
  neighbors::GainCurve fidelity;
  double seconds = 0.0;
  std::string error;

  fs::path work() const { return cfg.output_dir / "intermediate"; }
};

atlas::PipelineConfig synthetic_config(const fs::path& corpus, const fs::path& out) {
  atlas::PipelineConfig cfg;
  cfg.corpus = corpus;
  cfg.dim = 32;
  cfg.latent_id = 31;
  cfg.selection = corpus::SelectionTarget::count(1000);
  cfg.layout.workers = 1;
  cfg.cartography.grid_w = 256;
  cfg.cartography.quantile = 0.6;
  cfg.panorama.width = 1024;
  cfg.panorama.height = 576;
  cfg.panorama.steps = 100;
  cfg.output_dir = out;
  cfg.set_seed(42);
  return cfg;
}

void prepare_synthetic(SyntheticRun& r) {
  synthetic::ClusterSpec spec;
  corpus::write_corpus(synthetic::clustered_corpus(spec), r.dir / "corpus.jsonl");
  r.cfg = synthetic_config(r.dir / "corpus.jsonl", r.dir / "run1");
  const auto start = std::chrono::steady_clock::now();
  try {
    std::ostringstream log;
    atlas::run_pipeline(r.cfg, log);
  } catch (const std::exception& e) {
    r.error = e.what();
    return;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.slice = corpus::load_slice(r.work() / atlas::files::kSlice);
  r.dist = atlas::load_distances(r.work() / atlas::files::kDistances);
  for (const auto& row : layout::read_embedding_csv(r.work() / atlas::files::kEmbedding)) {
    r.emb.coords.push_back(row.p);
  }
  r.emb.bounds = layout::bounds_of(r.emb.coords);
  r.map = atlas::load_map(r.work() / atlas::files::kMap);
  r.fidelity = neighbors::read_gain_csv(r.work() / atlas::files::kFidelity, r.slice.size());
}

SyntheticRun& synthetic_run() {
  static SyntheticRun run;
  static bool ready = false;
  if (!ready) {
    ready = true;
    prepare_synthetic(run);
  }
  if (!run.error.empty()) throw std::runtime_error("synthetic pipeline failed: " + run.error);
  return run;
}

double gain_at(const neighbors::GainCurve& c, double fraction) {
  for (const auto& p : c.points)
    if (std::abs(p.k_fraction - fraction) < 1e-12) return p.gain;
  throw std::runtime_error("fraction missing from curve");
}

Outcome perfect_alignment() {
  const auto d = uniform_points(1000, 1);
  const std::vector<double> fr{0.01, 0.05, 0.09};
  const auto curve = neighbors::gain_curve(d, d, fr, 0);
  double worst = 0.0;
  bool ks = true;
  const std::size_t want_k[] = {10, 50, 90};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& p = curve.points[i];
    ks = ks && p.k == want_k[i];
    worst = std::max(worst, std::abs(p.gain - (1.0 - static_cast<double>(p.k) / 999.0)));
  }
  return {ks && worst <= 1e-12, fmt("max |gain - (1 - k/999)| = %.3g", worst)};
}

Outcome chance_calibration() {
  const std::vector<double> fr{0.01, 0.05, 0.10};
  std::vector<double> mean(3, 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto curve = neighbors::gain_curve(uniform_points(2000, 100 + seed),
                                             uniform_points(2000, 200 + seed), fr, 0);
    for (std::size_t i = 0; i < 3; ++i) mean[i] += curve.points[i].gain / 5.0;
  }
  const double worst = std::max({std::abs(mean[0]), std::abs(mean[1]), std::abs(mean[2])});
  return {worst <= 0.02, fmt("mean gain at 1/5/10%%: %+.4f %+.4f %+.4f", mean[0], mean[1], mean[2])};
}

Outcome misalignment_floor() {
  // Ring of 101 points; the second space places point i at position 10 i mod 101,
  // so its nearest neighbors sit 10 or more steps away on the original ring.
  const std::size_t n = 101;
  metric::DistanceMatrix a(n), b(n);
  auto ring = [&](std::size_t x, std::size_t y) {
    const std::size_t d = x > y ? x - y : y - x;
    return static_cast<double>(std::min(d, n - d));
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      a(i, j) = ring(i, j);
      b(i, j) = ring(10 * i % n, 10 * j % n);
    }
  const std::vector<double> fr{0.02, 0.04, 0.08};
  const auto curve = neighbors::gain_curve(a, b, fr);
  bool ok = true;
  std::string detail;
  for (const auto& p : curve.points) {
    const double floor = -neighbors::chance_level(p.k, n);
    ok = ok && p.mknn == 0.0 && p.gain == floor;
    detail += fmt("k=%.0f gain=%.6f floor=%.6f  ", static_cast<double>(p.k), p.gain, floor);
  }
  return {ok, detail};
}

Outcome knn_oracle() {
  Rng rng(2024);
  std::size_t mismatches = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 + rng.below(199);
    const std::size_t k = 1 + rng.below(n - 1);
    std::vector<metric::Point2> pts(n);
    // Coarse grid coordinates create many exact distance ties.
    for (auto& p : pts) p = {static_cast<double>(rng.below(12)), static_cast<double>(rng.below(12))};
    const auto d = metric::euclidean_distances(pts);
    const auto g = neighbors::knn_exact(d, k, t % 2 ? 0 : 1);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::uint32_t> order;
      for (std::uint32_t j = 0; j < n; ++j)
        if (j != i) order.push_back(j);
      std::sort(order.begin(), order.end(), [&](std::uint32_t x, std::uint32_t y) {
        return d(i, x) != d(i, y) ? d(i, x) < d(i, y) : x < y;
      });
      const auto got = g.neighbors(i);
      mismatches += !std::equal(got.begin(), got.end(), order.begin());
    }
  }
  return {mismatches == 0, fmt("%.0f mismatched rows over 20 instances", double(mismatches))};
}

Outcome gradient_check() {
  const auto ab = layout::fit_ab(0.1, 1.0);
  Rng rng(77);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    // Small embedding with attractive and repulsive edges; compare the full
    // objective's gradient over every coordinate.
    const std::size_t n = 6;
    std::vector<metric::Point2> x(n);
    for (auto& p : x) p = {rng.uniform(-4, 4), rng.uniform(-4, 4)};
    struct Edge {
      std::size_t i, j;
      bool attract;
      double w;
    };
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        edges.push_back({i, j, rng.uniform() < 0.5, rng.uniform(0.1, 1.0)});
    auto loss = [&](const std::vector<metric::Point2>& y) {
      double s = 0.0;
      for (const auto& e : edges)
        s += e.w * (e.attract ? layout::attractive_loss(y[e.i], y[e.j], ab)
                              : layout::repulsive_loss(y[e.i], y[e.j], ab));
      return s;
    };
    std::vector<double> analytic(2 * n, 0.0);
    for (const auto& e : edges) {
      const auto g = e.attract ? layout::attractive_gradient(x[e.i], x[e.j], ab)
                               : layout::repulsive_gradient(x[e.i], x[e.j], ab);
      analytic[2 * e.i] += e.w * g.x;
      analytic[2 * e.i + 1] += e.w * g.y;
      analytic[2 * e.j] -= e.w * g.x;
      analytic[2 * e.j + 1] -= e.w * g.y;
    }
    std::vector<double> numeric(2 * n);
    const double h = 1e-6;
    for (std::size_t c = 0; c < 2 * n; ++c) {
      auto plus = x, minus = x;
      double& vp = c % 2 ? plus[c / 2].y : plus[c / 2].x;
      double& vm = c % 2 ? minus[c / 2].y : minus[c / 2].x;
      vp += h;
      vm -= h;
      numeric[c] = (loss(plus) - loss(minus)) / (2 * h);
    }
    double diff = 0.0, norm = 0.0;
    for (std::size_t c = 0; c < 2 * n; ++c) {
      diff += (analytic[c] - numeric[c]) * (analytic[c] - numeric[c]);
      norm += analytic[c] * analytic[c];
    }
    worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12));
  }
  return {worst < 1e-4, fmt("max relative error %.3g over 100 configurations", worst)};
}

Outcome sigma_calibration() {
  Rng rng(5);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = 3 + rng.below(98);
    std::vector<double> d(k);
    double acc = rng.uniform(0.0, 2.0);
    for (auto& x : d) x = acc += rng.uniform(1e-3, 1.0);
    const auto sk = layout::calibrate_smooth_knn(d);
    worst = std::max(worst, std::abs(layout::membership_sum(d, sk.rho, sk.sigma) -
                                     std::log2(static_cast<double>(k))));
  }
  bool clamped = false;
  try {
    const std::vector<double> flat(15, 0.7);
    const auto sk = layout::calibrate_smooth_knn(flat);
    clamped = sk.sigma == layout::kSigmaMin && sk.rho == 0.7;
  } catch (const std::exception&) {
    clamped = false;
  }
  return {worst < 1e-5 && clamped,
          fmt("max residual %.3g; degenerate row clamped: ", worst) + (clamped ? "yes" : "no")};
}

Outcome synthetic_recovery() {
  auto& r = synthetic_run();
  const double gain5 = gain_at(r.fidelity, 0.05);
  std::size_t majority = 0;
  for (const auto& c : r.map.clusters.clusters) {
    std::map<int, std::size_t> votes;
    for (auto m : c.members) ++votes[synthetic::label_of(r.slice.members[m].item.id)];
    std::size_t top = 0;
    for (const auto& [_, v] : votes) top = std::max(top, v);
    majority += top;
  }
  const double purity = static_cast<double>(majority) / static_cast<double>(r.slice.size());
  const std::size_t clusters = r.map.clusters.clusters.size();
  return {gain5 >= 0.3 && clusters == 5 && purity >= 0.9 && r.seconds < 120.0,
          fmt("gain@5%% = %.3f, ", gain5) + std::to_string(clusters) +
              fmt(" clusters, purity %.3f, pipeline %.1f s", purity, r.seconds)};
}

Outcome subsample_estimator() {
  auto& r = synthetic_run();
  const auto emb_dist = metric::euclidean_distances(r.emb.coords);
  const double full = gain_at(r.fidelity, 0.05);
  double err = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    err += std::abs(neighbors::subsample_gain(r.dist, emb_dist, 0.05, 500, seed, 0) - full) / 5.0;
  }
  return {err <= 0.05, fmt("mean |subsample - full| = %.4f (full gain %.3f)", err, full)};
}

Outcome smoothing_schedule() {
  bool ok = true;
  for (std::size_t r = 1; r <= 16; ++r) {
    std::vector<std::size_t> reps(r);
    std::iota(reps.begin(), reps.end(), 0);
    for (std::size_t steps : {1, 4, 100}) {
      const auto s = cartography::round_robin(reps, steps);
      std::vector<std::size_t> uses(r, 0);
      for (auto x : s) ++uses[x];
      const auto [lo, hi] = std::minmax_element(uses.begin(), uses.end());
      const auto distinct = static_cast<std::size_t>(
          std::count_if(uses.begin(), uses.end(), [](std::size_t u) { return u > 0; }));
      ok = ok && s.size() == steps && *hi - *lo <= 1 && distinct == std::min(r, steps);
    }
  }

  // Outlier exclusion and the minimum-of-4 rule on random tiles.
  Rng rng(9);
  bool outliers = true;
  for (std::size_t size = 1; size <= 40; ++size) {
    std::vector<metric::Point2> pts(size);
    for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
    const auto d = metric::euclidean_distances(pts);
    std::vector<std::size_t> items(size);
    std::iota(items.begin(), items.end(), 0);
    const auto reps = cartography::choose_representatives(items, d, 4);
    const auto capped = cartography::choose_representatives(items, d, 4, 2);
    if (size >= 5) {
      std::size_t worst = 0;
      double worst_sum = -1.0;
      for (std::size_t i = 0; i < size; ++i) {
        const double s = std::accumulate(d.row(i).begin(), d.row(i).end(), 0.0);
        if (s > worst_sum) worst_sum = s, worst = i;
      }
      outliers = outliers && reps.size() == size - 1 &&
                 std::find(reps.begin(), reps.end(), worst) == reps.end();
    } else {
      outliers = outliers && reps.size() == size;
    }
    outliers = outliers && capped.size() == std::min<std::size_t>(4, size);
  }

  // The synthetic render plan follows the same rules.
  auto& r = synthetic_run();
  const auto emb = test::embedding_of(r.emb.coords);
  const auto grid = cartography::assign_items(emb, r.cfg.cartography.tiles_x, r.cfg.cartography.tiles_y);
  bool plan_ok = !r.map.plan.regions.empty();
  for (const auto& region : r.map.plan.regions) {
    const auto& tile = grid.tile(region.tile_x, region.tile_y);
    const std::size_t want = tile.size() >= 5 ? tile.size() - 1 : tile.size();
    plan_ok = plan_ok && region.representatives.size() == want &&
              region.schedule.size() == r.cfg.panorama.steps;
  }
  return {ok && outliers && plan_ok,
          std::string("round-robin ") + (ok ? "ok" : "FAIL") + ", representatives " +
              (outliers ? "ok" : "FAIL") + ", synthetic plan " + (plan_ok ? "ok" : "FAIL")};
}

Outcome determinism() {
  auto& r = synthetic_run();
  auto cfg = r.cfg;
  cfg.output_dir = r.dir / "run2";
  std::ostringstream log;
  atlas::run_pipeline(cfg, log);
  const auto m1 = slurp(r.cfg.output_dir / "atlas.json");
  const auto m2 = slurp(cfg.output_dir / "atlas.json");
  const auto p1 = render::fnv1a(slurp(r.work() / atlas::files::kPanorama));
  const auto p2 = render::fnv1a(slurp(cfg.output_dir / "intermediate" / atlas::files::kPanorama));
  char buf[64];
  std::snprintf(buf, sizeof(buf), "panorama fnv1a %016llx", static_cast<unsigned long long>(p1));
  return {!m1.empty() && m1 == m2 && p1 == p2,
          std::string(m1 == m2 ? "atlas.json identical, " : "atlas.json differs, ") + buf +
              (p1 == p2 ? " (match)" : " (mismatch)")};
}

Outcome pyramid_integrity() {
  auto& r = synthetic_run();
  const auto bundle = atlas::validate_bundle(r.cfg.output_dir);
  const auto pano = render::load_panorama(r.work() / atlas::files::kPanorama);
  const auto tiles = r.cfg.output_dir / "tiles";
  const std::size_t tile_px = r.cfg.tile_px;
  auto ceil_div = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
  const auto level0 = atlas::reassemble_level(tiles, 0, ceil_div(pano.width, tile_px),
                                              ceil_div(pano.height, tile_px));
  bool ok = level0 == pano;
  std::size_t w = pano.width, h = pano.height;
  for (std::size_t z = 1; z < bundle.levels; ++z) {
    w = ceil_div(w, 2);
    h = ceil_div(h, 2);
    const auto lvl = atlas::reassemble_level(tiles, z, ceil_div(w, tile_px), ceil_div(h, tile_px));
    ok = ok && lvl.width == w && lvl.height == h;
  }
  return {ok, std::to_string(bundle.levels) + " levels, level 0 " + std::to_string(pano.width) +
                  "x" + std::to_string(pano.height) + (ok ? " reassembles exactly" : " mismatch")};
}

Outcome gain_curve_shape() {
  auto& r = synthetic_run();
  const auto& best = r.fidelity.argmax();
  auto cfg = r.cfg.layout;
  cfg.seed = 7;
  const auto other = layout::embed(r.dist, cfg);
  const auto curve = layout::layout_fidelity(r.dist, other, r.cfg.k_fractions, 0);
  const auto& best2 = curve.argmax();
  const double moved = std::abs(best.gain - best2.gain);
  return {r.fidelity.points.size() == 15 && moved < 0.05,
          fmt("max gain %.3f at k=%.0f%%", best.gain, best.k_fraction * 100) +
              fmt("; seed 7: %.3f at k=%.0f%%, moved %.4f", best2.gain, best2.k_fraction * 100, moved)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria{
      {1, "perfect-alignment calibration", 5.0, perfect_alignment},
      {2, "chance calibration", 30.0, chance_calibration},
      {3, "misalignment floor", 0.0, misalignment_floor},
      {4, "kNN oracle equivalence", 0.0, knn_oracle},
      {5, "layout gradient check", 10.0, gradient_check},
      {6, "sigma calibration", 0.0, sigma_calibration},
      {7, "synthetic cluster recovery", 120.0, synthetic_recovery},
      {8, "subsample estimator", 0.0, subsample_estimator},
      {9, "smoothing schedule", 0.0, smoothing_schedule},
      {10, "end-to-end determinism", 0.0, determinism},
      {11, "pyramid integrity", 0.0, pyramid_integrity},
      {12, "gain-curve shape", 0.0, gain_curve_shape},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_s > 0.0 && dt >= c.limit_s) {
      o.pass = false;
      o.detail += fmt(" [over the %.0f s limit]", c.limit_s);
    }
    failed += !o.pass;
    std::printf("%s %2d %-32s %7.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, dt,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
