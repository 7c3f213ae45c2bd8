#include "vista/layout.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "vista/error.hpp"
#include "vista/format.hpp"
#include "vista/random.hpp"

namespace vista::layout {

namespace {

constexpr double kGradClip = 4.0;
constexpr double kInitExtent = 10.0;
constexpr double kMapHeight = 100.0;

double clip(double v) { return std::clamp(v, -kGradClip, kGradClip); }

double dist_sq(const Point2& p, const Point2& q) {
  const double dx = p.x - q.x;
  const double dy = p.y - q.y;
  return dx * dx + dy * dy;
}

// Cyclic Jacobi eigen-decomposition of a small symmetric matrix (row-major).
// Returns eigenvalues; eigenvectors are written column-wise into `vecs`.
std::vector<double> jacobi_eigen(std::vector<double> a, std::size_t m,
                                 std::vector<double>& vecs) {
  vecs.assign(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) vecs[i * m + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t q = p + 1; q < m; ++q) off += a[p * m + q] * a[p * m + q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        const double apq = a[p * m + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < m; ++k) {
          const double akp = a[k * m + p];
          const double akq = a[k * m + q];
          a[k * m + p] = c * akp - s * akq;
          a[k * m + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double apk = a[p * m + k];
          const double aqk = a[q * m + k];
          a[p * m + k] = c * apk - s * aqk;
          a[q * m + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double vkp = vecs[k * m + p];
          const double vkq = vecs[k * m + q];
          vecs[k * m + p] = c * vkp - s * vkq;
          vecs[k * m + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<double> eig(m);
  for (std::size_t i = 0; i < m; ++i) eig[i] = a[i * m + i];
  return eig;
}

double dot(const std::vector<double>& u, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// Modified Gram-Schmidt against `fixed` and then within `block`. Columns that
// collapse numerically are refilled from the generator.
void orthonormalize(std::vector<std::vector<double>>& block,
                    const std::vector<double>& fixed, Rng& rng) {
  for (std::size_t c = 0; c < block.size(); ++c) {
    auto& v = block[c];
    for (int attempt = 0; attempt < 4; ++attempt) {
      axpy(-dot(fixed, v), fixed, v);
      for (std::size_t p = 0; p < c; ++p) axpy(-dot(block[p], v), block[p], v);
      const double norm = std::sqrt(dot(v, v));
      if (norm > 1e-10) {
        for (auto& x : v) x /= norm;
        break;
      }
      for (auto& x : v) x = rng.normal();
    }
  }
}

}  // namespace

void LayoutConfig::validate() const {
  if (n_neighbors < 2) throw ValidationError("layout: n_neighbors must be >= 2");
  if (!(min_dist > 0.0) || !(min_dist <= spread)) {
    throw ValidationError("layout: need 0 < min_dist <= spread");
  }
  if (epochs < 1) throw ValidationError("layout: epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("layout: learning_rate must be positive");
  }
  if (!(aspect.width > 0.0) || !(aspect.height > 0.0) ||
      !std::isfinite(aspect.ratio())) {
    throw ValidationError("layout: aspect must have positive width and height");
  }
  if (workers < 1) throw ValidationError("layout: workers must be >= 1");
}

double FuzzyGraph::weight(std::uint32_t i, std::uint32_t j) const {
  auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{i, j},
                             [](const FuzzyEdge& e, const std::pair<std::uint32_t, std::uint32_t>& key) {
                               return std::pair{e.i, e.j} < key;
                             });
  if (it != edges.end() && it->i == i && it->j == j) return it->weight;
  return 0.0;
}

Bounds bounds_of(std::span<const Point2> points) {
  if (points.empty()) return {};
  Bounds b{points[0].x, points[0].y, points[0].x, points[0].y};
  for (const auto& p : points) {
    b.min_x = std::min(b.min_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_x = std::max(b.max_x, p.x);
    b.max_y = std::max(b.max_y, p.y);
  }
  return b;
}

double membership_sum(std::span<const double> row_distances, double rho, double sigma) {
  double s = 0.0;
  for (double d : row_distances) s += std::exp(-std::max(0.0, d - rho) / sigma);
  return s;
}

SmoothKnn calibrate_smooth_knn(std::span<const double> row_distances) {
  return calibrate_smooth_knn(row_distances,
                              std::log2(static_cast<double>(row_distances.size())));
}

SmoothKnn calibrate_smooth_knn(std::span<const double> row_distances, double target,
                               double tol, std::size_t max_iter) {
  SmoothKnn out;
  for (double d : row_distances) {
    if (d > 0.0) {
      out.rho = d;
      break;
    }
  }
  // The sum increases monotonically with sigma; bisect geometrically.
  double lo = kSigmaMin;
  double hi = kSigmaMax;
  if (membership_sum(row_distances, out.rho, lo) >= target) {
    out.sigma = lo;
    return out;
  }
  if (membership_sum(row_distances, out.rho, hi) <= target) {
    out.sigma = hi;
    return out;
  }
  double mid = std::sqrt(lo * hi);
  for (std::size_t it = 0; it < max_iter; ++it) {
    mid = std::sqrt(lo * hi);
    const double s = membership_sum(row_distances, out.rho, mid);
    if (std::abs(s - target) < tol) break;
    if (s > target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.sigma = mid;
  return out;
}

FuzzyGraph fuzzy_simplicial_set(const neighbors::KnnGraph& g) {
  struct Directed {
    std::uint32_t i;
    std::uint32_t j;
    double w;
  };
  std::vector<Directed> directed;
  directed.reserve(g.n() * g.k());
  for (std::size_t i = 0; i < g.n(); ++i) {
    const auto d = g.distances(i);
    const auto nb = g.neighbors(i);
    const SmoothKnn sk = calibrate_smooth_knn(d);
    for (std::size_t r = 0; r < g.k(); ++r) {
      const double w = std::exp(-std::max(0.0, d[r] - sk.rho) / sk.sigma);
      if (w > 0.0) directed.push_back({static_cast<std::uint32_t>(i), nb[r], w});
    }
  }
  std::sort(directed.begin(), directed.end(), [](const Directed& x, const Directed& y) {
    return std::pair{x.i, x.j} < std::pair{y.i, y.j};
  });
  auto find = [&](std::uint32_t i, std::uint32_t j) -> double {
    auto it = std::lower_bound(directed.begin(), directed.end(), std::pair{i, j},
                               [](const Directed& e, const std::pair<std::uint32_t, std::uint32_t>& key) {
                                 return std::pair{e.i, e.j} < key;
                               });
    return (it != directed.end() && it->i == i && it->j == j) ? it->w : 0.0;
  };

  FuzzyGraph fg;
  fg.n = g.n();
  fg.edges.reserve(directed.size() * 2);
  for (const auto& e : directed) {
    const double wt = find(e.j, e.i);
    const double s = std::min(1.0, e.w + wt - e.w * wt);
    fg.edges.push_back({e.i, e.j, s});
    if (wt == 0.0) fg.edges.push_back({e.j, e.i, s});
  }
  std::sort(fg.edges.begin(), fg.edges.end(), [](const FuzzyEdge& x, const FuzzyEdge& y) {
    return std::pair{x.i, x.j} < std::pair{y.i, y.j};
  });
  return fg;
}

CurveParams fit_ab(double min_dist, double spread) {
  if (!(min_dist > 0.0) || !(min_dist <= spread)) {
    throw ValidationError("fit_ab: need 0 < min_dist <= spread");
  }
  constexpr std::size_t kSamples = 300;
  std::array<double, kSamples> xs{};
  std::array<double, kSamples> ys{};
  for (std::size_t s = 0; s < kSamples; ++s) {
    xs[s] = 3.0 * spread * static_cast<double>(s) / static_cast<double>(kSamples - 1);
    ys[s] = xs[s] <= min_dist ? 1.0 : std::exp(-(xs[s] - min_dist) / spread);
  }
  auto cost = [&](double a, double b) {
    double c = 0.0;
    for (std::size_t s = 0; s < kSamples; ++s) {
      const double r = 1.0 / (1.0 + a * std::pow(xs[s], 2.0 * b)) - ys[s];
      c += r * r;
    }
    return c;
  };

  // Levenberg-Marquardt from (1, 1).
  double a = 1.0;
  double b = 1.0;
  double lambda = 1e-3;
  double current = cost(a, b);
  bool converged = false;
  for (int it = 0; it < 1000 && !converged; ++it) {
    double jtj00 = 0.0, jtj01 = 0.0, jtj11 = 0.0, jtr0 = 0.0, jtr1 = 0.0;
    for (std::size_t s = 0; s < kSamples; ++s) {
      const double x = xs[s];
      const double p = x > 0.0 ? std::pow(x, 2.0 * b) : 0.0;
      const double denom = 1.0 + a * p;
      const double f = 1.0 / denom;
      const double r = f - ys[s];
      const double da = -p / (denom * denom);
      const double db = x > 0.0 ? -a * p * 2.0 * std::log(x) / (denom * denom) : 0.0;
      jtj00 += da * da;
      jtj01 += da * db;
      jtj11 += db * db;
      jtr0 += da * r;
      jtr1 += db * r;
    }
    for (;;) {
      const double m00 = jtj00 * (1.0 + lambda);
      const double m11 = jtj11 * (1.0 + lambda);
      const double det = m00 * m11 - jtj01 * jtj01;
      if (!(std::abs(det) > 0.0)) {
        lambda *= 10.0;
        if (lambda > 1e12) break;
        continue;
      }
      const double step_a = -(m11 * jtr0 - jtj01 * jtr1) / det;
      const double step_b = -(m00 * jtr1 - jtj01 * jtr0) / det;
      const double na = a + step_a;
      const double nb = b + step_b;
      const double trial = (na > 0.0 && nb > 0.0) ? cost(na, nb)
                                                  : std::numeric_limits<double>::infinity();
      if (trial <= current) {
        const double rel = std::abs(step_a) / (std::abs(a) + 1e-12) +
                           std::abs(step_b) / (std::abs(b) + 1e-12);
        const double drop = current - trial;
        a = na;
        b = nb;
        current = trial;
        lambda = std::max(lambda / 10.0, 1e-12);
        if (rel < 1e-12 || drop <= 1e-16 * std::max(current, 1e-300)) converged = true;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e12) {
        // No descent direction left: at a minimum to working precision.
        converged = true;
        break;
      }
    }
  }
  if (!converged || !std::isfinite(a) || !std::isfinite(b)) {
    throw Error("fit_ab: curve fit did not converge for min_dist=" +
                format_double(min_dist) + ", spread=" + format_double(spread));
  }
  return {a, b};
}

double phi(double dsq, const CurveParams& ab) {
  return 1.0 / (1.0 + ab.a * std::pow(dsq, ab.b));
}

double attractive_loss(const Point2& head, const Point2& tail, const CurveParams& ab) {
  return std::log1p(ab.a * std::pow(dist_sq(head, tail), ab.b));
}

double repulsive_loss(const Point2& head, const Point2& tail, const CurveParams& ab) {
  const double q = ab.a * std::pow(dist_sq(head, tail), ab.b);
  return std::log1p(q) - std::log(q);
}

Point2 attractive_gradient(const Point2& head, const Point2& tail, const CurveParams& ab) {
  const double dsq = dist_sq(head, tail);
  if (dsq <= 0.0) return {};
  const double coeff = 2.0 * ab.a * ab.b * std::pow(dsq, ab.b - 1.0) /
                       (1.0 + ab.a * std::pow(dsq, ab.b));
  return {coeff * (head.x - tail.x), coeff * (head.y - tail.y)};
}

Point2 repulsive_gradient(const Point2& head, const Point2& tail, const CurveParams& ab) {
  const double dsq = dist_sq(head, tail);
  if (dsq <= 0.0) return {};
  const double coeff = -2.0 * ab.b / (dsq * (1.0 + ab.a * std::pow(dsq, ab.b)));
  return {coeff * (head.x - tail.x), coeff * (head.y - tail.y)};
}

std::vector<Point2> random_init(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point2> out(n);
  for (auto& p : out) {
    p.x = rng.uniform(-kInitExtent, kInitExtent);
    p.y = rng.uniform(-kInitExtent, kInitExtent);
  }
  return out;
}

std::vector<Point2> spectral_init(const FuzzyGraph& fg, std::uint64_t seed) {
  const std::size_t n = fg.n;
  if (n < 3) throw ValidationError("spectral init: need at least 3 points");
  std::vector<double> degree(n, 0.0);
  for (const auto& e : fg.edges) degree[e.i] += e.weight;
  std::vector<double> inv_sqrt(n, 0.0);
  std::vector<double> trivial(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (degree[i] > 0.0) {
      inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
      trivial[i] = std::sqrt(degree[i]);
    }
  }
  const double tnorm = std::sqrt(dot(trivial, trivial));
  if (tnorm > 0.0) {
    for (auto& x : trivial) x /= tnorm;
  }

  // Top eigenvectors of S = (I + D^-1/2 W D^-1/2) / 2 orthogonal to the
  // trivial one are the smallest non-trivial eigenvectors of the normalized
  // Laplacian. Subspace iteration with Rayleigh-Ritz on a 4-column block.
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    y.assign(n, 0.0);
    for (const auto& e : fg.edges) {
      y[e.i] += inv_sqrt[e.i] * e.weight * inv_sqrt[e.j] * x[e.j];
    }
    for (std::size_t i = 0; i < n; ++i) y[i] = 0.5 * (y[i] + x[i]);
  };

  constexpr std::size_t kBlock = 4;
  const std::size_t m = std::min<std::size_t>(kBlock, n - 1);
  Rng rng(seed ^ 0x5eed5eed5eedULL);
  std::vector<std::vector<double>> block(m, std::vector<double>(n));
  for (auto& v : block)
    for (auto& x : v) x = rng.normal();
  orthonormalize(block, trivial, rng);

  std::vector<double> tmp;
  std::vector<double> prev_eig(m, 0.0);
  for (int it = 0; it < 3000; ++it) {
    for (auto& v : block) {
      apply(v, tmp);
      v.swap(tmp);
    }
    orthonormalize(block, trivial, rng);
    if (it % 10 != 9) continue;
    // Rayleigh-Ritz rotation of the block.
    std::vector<std::vector<double>> sv(m);
    for (std::size_t c = 0; c < m; ++c) apply(block[c], sv[c]);
    std::vector<double> h(m * m);
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t q = 0; q < m; ++q) h[p * m + q] = dot(block[p], sv[q]);
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t q = p + 1; q < m; ++q) {
        const double avg = 0.5 * (h[p * m + q] + h[q * m + p]);
        h[p * m + q] = avg;
        h[q * m + p] = avg;
      }
    std::vector<double> vecs;
    auto eig = jacobi_eigen(h, m, vecs);
    std::vector<std::size_t> order(m);
    for (std::size_t c = 0; c < m; ++c) order[c] = c;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return eig[x] != eig[y] ? eig[x] > eig[y] : x < y;
    });
    std::vector<std::vector<double>> rotated(m, std::vector<double>(n, 0.0));
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t p = 0; p < m; ++p) axpy(vecs[p * m + order[c]], block[p], rotated[c]);
    block.swap(rotated);
    orthonormalize(block, trivial, rng);
    double change = 0.0;
    for (std::size_t c = 0; c < std::min<std::size_t>(2, m); ++c) {
      change = std::max(change, std::abs(eig[order[c]] - prev_eig[c]));
      prev_eig[c] = eig[order[c]];
    }
    if (change < 1e-12) break;
  }

  std::vector<Point2> out(n);
  const auto& ex = block[0];
  const auto& ey = m > 1 ? block[1] : block[0];
  double max_x = 0.0;
  double max_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    max_x = std::max(max_x, std::abs(ex[i]));
    max_y = std::max(max_y, std::abs(ey[i]));
  }
  Rng jitter(seed ^ 0x717e7ULL);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].x = (max_x > 0.0 ? kInitExtent * ex[i] / max_x : 0.0) + 1e-4 * jitter.normal();
    out[i].y = (max_y > 0.0 ? kInitExtent * ey[i] / max_y : 0.0) + 1e-4 * jitter.normal();
  }
  return out;
}

namespace {

struct EdgeSchedule {
  std::vector<std::uint32_t> head;
  std::vector<std::uint32_t> tail;
  std::vector<double> epochs_per_sample;
  std::vector<double> next_sample;
};

EdgeSchedule make_schedule(const FuzzyGraph& fg, std::size_t epochs) {
  EdgeSchedule s;
  double max_w = 0.0;
  for (const auto& e : fg.edges) max_w = std::max(max_w, e.weight);
  for (const auto& e : fg.edges) {
    // Edges too weak to be sampled even once over the run are dropped.
    if (e.weight < max_w / static_cast<double>(epochs)) continue;
    s.head.push_back(e.i);
    s.tail.push_back(e.j);
    s.epochs_per_sample.push_back(max_w / e.weight);
  }
  s.next_sample = s.epochs_per_sample;
  return s;
}

// Coordinates accessed through a policy so the same update code runs in the
// single-worker mode (plain loads) and the lock-free mode (relaxed atomics).
struct PlainAccess {
  static double load(double& v) { return v; }
  static void add(double& v, double d) { v += d; }
};

struct RelaxedAccess {
  static double load(double& v) { return std::atomic_ref<double>(v).load(std::memory_order_relaxed); }
  static void add(double& v, double d) {
    std::atomic_ref<double> ref(v);
    ref.store(ref.load(std::memory_order_relaxed) + d, std::memory_order_relaxed);
  }
};

template <typename Access>
void run_edges(std::vector<Point2>& y, EdgeSchedule& s, std::size_t begin, std::size_t end,
               double epoch, double alpha, const CurveParams& ab, std::size_t neg_rate,
               Rng& rng) {
  const std::size_t n = y.size();
  for (std::size_t e = begin; e < end; ++e) {
    if (s.next_sample[e] > epoch) continue;
    const std::uint32_t i = s.head[e];
    const std::uint32_t j = s.tail[e];
    Point2 yi{Access::load(y[i].x), Access::load(y[i].y)};
    const Point2 yj{Access::load(y[j].x), Access::load(y[j].y)};
    const Point2 g = attractive_gradient(yi, yj, ab);
    const double gx = clip(g.x);
    const double gy = clip(g.y);
    if (!std::isfinite(gx) || !std::isfinite(gy)) {
      throw Error("layout: non-finite attractive gradient");
    }
    Access::add(y[i].x, -alpha * gx);
    Access::add(y[i].y, -alpha * gy);
    Access::add(y[j].x, alpha * gx);
    Access::add(y[j].y, alpha * gy);
    yi = {Access::load(y[i].x), Access::load(y[i].y)};

    for (std::size_t ns = 0; ns < neg_rate; ++ns) {
      const auto k = static_cast<std::uint32_t>(rng.below(n));
      if (k == i) continue;
      const Point2 yk{Access::load(y[k].x), Access::load(y[k].y)};
      const Point2 r = repulsive_gradient(yi, yk, ab);
      const double rx = clip(r.x);
      const double ry = clip(r.y);
      if (!std::isfinite(rx) || !std::isfinite(ry)) {
        throw Error("layout: non-finite repulsive gradient");
      }
      Access::add(y[i].x, -alpha * rx);
      Access::add(y[i].y, -alpha * ry);
      yi = {Access::load(y[i].x), Access::load(y[i].y)};
    }
    s.next_sample[e] += s.epochs_per_sample[e];
  }
}

}  // namespace

Embedding2D fit_to_aspect(std::vector<Point2> coords, const Aspect& aspect) {
  const Bounds b = bounds_of(coords);
  if (!(b.width() > 0.0) || !(b.height() > 0.0)) {
    throw Error("layout: embedding is degenerate along one axis");
  }
  const double width = kMapHeight * aspect.ratio();
  for (auto& p : coords) {
    p.x = (p.x - b.min_x) / b.width() * width;
    p.y = (p.y - b.min_y) / b.height() * kMapHeight;
  }
  Embedding2D emb;
  emb.aspect = aspect;
  emb.bounds = bounds_of(coords);
  emb.coords = std::move(coords);
  return emb;
}

Embedding2D optimize(const FuzzyGraph& fg, const LayoutConfig& cfg) {
  cfg.validate();
  if (fg.n < 3) throw ValidationError("layout: need at least 3 points");
  const CurveParams ab = fit_ab(cfg.min_dist, cfg.spread);
  std::vector<Point2> y = cfg.init == Init::Spectral ? spectral_init(fg, cfg.seed)
                                                     : random_init(fg.n, cfg.seed);
  EdgeSchedule sched = make_schedule(fg, cfg.epochs);
  const std::size_t n_edges = sched.head.size();

  if (cfg.workers <= 1) {
    Rng rng(cfg.seed);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      const double alpha = cfg.learning_rate *
                           (1.0 - static_cast<double>(epoch) / static_cast<double>(cfg.epochs));
      run_edges<PlainAccess>(y, sched, 0, n_edges, static_cast<double>(epoch), alpha, ab,
                             cfg.negative_sample_rate, rng);
    }
  } else {
    const unsigned w = cfg.workers;
    std::vector<Rng> rngs;
    for (unsigned t = 0; t < w; ++t) rngs.emplace_back(cfg.seed + 0x9e3779b97f4a7c15ULL * (t + 1));
    const std::size_t chunk = (n_edges + w - 1) / w;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      const double alpha = cfg.learning_rate *
                           (1.0 - static_cast<double>(epoch) / static_cast<double>(cfg.epochs));
      std::vector<std::thread> threads;
      std::vector<std::exception_ptr> errors(w);
      for (unsigned t = 0; t < w; ++t) {
        threads.emplace_back([&, t] {
          try {
            const std::size_t b = std::min(n_edges, t * chunk);
            const std::size_t e = std::min(n_edges, b + chunk);
            run_edges<RelaxedAccess>(y, sched, b, e, static_cast<double>(epoch), alpha, ab,
                                     cfg.negative_sample_rate, rngs[t]);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
      for (auto& th : threads) th.join();
      for (auto& err : errors)
        if (err) std::rethrow_exception(err);
    }
  }
  for (const auto& p : y) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error("layout: optimizer produced non-finite coordinates");
    }
  }
  return fit_to_aspect(std::move(y), cfg.aspect);
}

Embedding2D embed(const metric::DistanceMatrix& dist, const LayoutConfig& cfg,
                  unsigned knn_workers) {
  cfg.validate();
  if (dist.size() < 3) throw ValidationError("layout: need at least 3 points");
  const std::size_t k = std::min(cfg.n_neighbors, dist.size() - 1);
  const auto graph = neighbors::knn_exact(dist, k, knn_workers);
  return optimize(fuzzy_simplicial_set(graph), cfg);
}

neighbors::GainCurve layout_fidelity(const metric::DistanceMatrix& slice_distances,
                                     const Embedding2D& emb,
                                     std::span<const double> k_fractions, unsigned workers) {
  if (slice_distances.size() != emb.size()) {
    throw ValidationError("layout fidelity: distance matrix and embedding sizes differ");
  }
  const auto emb_dist = metric::euclidean_distances(emb.coords);
  return neighbors::gain_curve(slice_distances, emb_dist, k_fractions, workers);
}

void write_embedding_csv(std::span<const std::string> ids, const Embedding2D& emb,
                         const std::filesystem::path& path) {
  if (ids.size() != emb.size()) throw ValidationError("embedding csv: id count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,x,y\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i].find_first_of(",\"\n") != std::string::npos) {
      throw ValidationError("embedding csv: id '" + ids[i] + "' contains a delimiter");
    }
    out << ids[i] << ',' << format_double(emb.coords[i].x) << ','
        << format_double(emb.coords[i].y) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<EmbeddingRow> read_embedding_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,x,y") throw ValidationError(path.string() + ": expected header 'id,x,y'");
  std::vector<EmbeddingRow> rows;
  std::size_t line_no = 1;
  auto parse = [&](std::string_view s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": bad coordinate '" + std::string(s) + "'");
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 3 columns");
    }
    const std::string_view view(line);
    rows.push_back({line.substr(0, c1), {parse(view.substr(c1 + 1, c2 - c1 - 1)),
                                         parse(view.substr(c2 + 1))}});
  }
  return rows;
}

}  // namespace vista::layout
