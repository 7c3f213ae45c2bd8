#include "vista/neighbors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <string>

#include "vista/error.hpp"
#include "vista/format.hpp"
#include "vista/parallel.hpp"
#include "vista/random.hpp"

namespace vista::neighbors {

KnnGraph::KnnGraph(std::size_t n, std::size_t k, std::vector<std::uint32_t> neighbors,
                   std::vector<double> distances)
    : n_(n), k_(k), neighbors_(std::move(neighbors)), distances_(std::move(distances)) {
  if (k_ == 0 || k_ >= n_) {
    throw ValidationError("knn graph: need 1 <= k < n (k=" + std::to_string(k_) +
                          ", n=" + std::to_string(n_) + ")");
  }
  if (neighbors_.size() != n_ * k_ || distances_.size() != n_ * k_) {
    throw ValidationError("knn graph: storage does not match n*k");
  }
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t r = 0; r < k_; ++r) {
      const auto j = neighbors_[i * k_ + r];
      if (j >= n_) throw ValidationError("knn graph: neighbor index out of range");
      if (j == i) throw ValidationError("knn graph: self-neighbor at row " + std::to_string(i));
      if (r > 0 && distances_[i * k_ + r] < distances_[i * k_ + r - 1]) {
        throw ValidationError("knn graph: row " + std::to_string(i) +
                              " distances not non-decreasing");
      }
    }
  }
}

KnnGraph knn_exact(const metric::DistanceMatrix& dist, std::size_t k, unsigned workers) {
  const std::size_t n = dist.size();
  if (k == 0 || k >= n) {
    throw ValidationError("knn: k must satisfy 1 <= k < n (k=" + std::to_string(k) +
                          ", n=" + std::to_string(n) + ")");
  }
  std::vector<std::uint32_t> nbrs(n * k);
  std::vector<double> dists(n * k);
  parallel_for(n, workers, [&](std::size_t i) {
    const auto row = dist.row(i);
    std::vector<std::uint32_t> cand;
    cand.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) cand.push_back(static_cast<std::uint32_t>(j));
    }
    auto closer = [&](std::uint32_t a, std::uint32_t b) {
      if (row[a] != row[b]) return row[a] < row[b];
      return a < b;
    };
    const auto kth = cand.begin() + static_cast<std::ptrdiff_t>(k);
    if (k < cand.size()) std::nth_element(cand.begin(), kth - 1, cand.end(), closer);
    std::sort(cand.begin(), kth, closer);
    for (std::size_t r = 0; r < k; ++r) {
      nbrs[i * k + r] = cand[r];
      dists[i * k + r] = row[cand[r]];
    }
  });
  return KnnGraph(n, k, std::move(nbrs), std::move(dists));
}

double mutual_knn(const KnnGraph& a, const KnnGraph& b, std::size_t k) {
  if (a.n() != b.n()) {
    throw ValidationError("mutual knn: graphs have different sizes (" +
                          std::to_string(a.n()) + " vs " + std::to_string(b.n()) + ")");
  }
  if (k == 0 || k > std::min(a.k(), b.k())) {
    throw ValidationError("mutual knn: k=" + std::to_string(k) +
                          " exceeds graph neighbor count");
  }
  std::vector<std::uint32_t> mark(a.n(), 0);
  std::uint64_t shared = 0;
  for (std::size_t i = 0; i < a.n(); ++i) {
    const auto stamp = static_cast<std::uint32_t>(i + 1);
    for (auto j : a.neighbors(i).first(k)) mark[j] = stamp;
    for (auto j : b.neighbors(i).first(k)) shared += (mark[j] == stamp);
  }
  return static_cast<double>(shared) /
         (static_cast<double>(a.n()) * static_cast<double>(k));
}

double chance_level(std::size_t k, std::size_t n) {
  if (n <= 1) throw ValidationError("chance level: need n >= 2");
  if (k == 0 || k >= n) throw ValidationError("chance level: need 1 <= k < n");
  return static_cast<double>(k) / static_cast<double>(n - 1);
}

double mknn_gain(double mknn, std::size_t k, std::size_t n) {
  if (!(mknn >= 0.0 && mknn <= 1.0)) {
    throw ValidationError("mknn gain: mknn must lie in [0, 1]");
  }
  return mknn - chance_level(k, n);
}

std::size_t k_from_fraction(double fraction, std::size_t n) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ValidationError("k fraction must lie in (0, 1)");
  }
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::max<std::size_t>(1, k);
}

const GainPoint& GainCurve::argmax() const {
  if (points.empty()) throw ValidationError("gain curve is empty");
  const GainPoint* best = &points.front();
  for (const auto& p : points) {
    if (p.gain > best->gain) best = &p;
  }
  return *best;
}

GainCurve gain_curve(const metric::DistanceMatrix& a, const metric::DistanceMatrix& b,
                     std::span<const double> k_fractions, unsigned workers) {
  if (a.size() != b.size()) {
    throw ValidationError("gain curve: spaces have different sizes (" +
                          std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (k_fractions.empty()) throw ValidationError("gain curve: no k fractions given");
  const std::size_t n = a.size();
  std::vector<std::size_t> ks;
  for (std::size_t f = 0; f < k_fractions.size(); ++f) {
    if (f > 0 && !(k_fractions[f] > k_fractions[f - 1])) {
      throw ValidationError("gain curve: k fractions must be strictly increasing");
    }
    const std::size_t k = k_from_fraction(k_fractions[f], n);
    if (k >= n) {
      throw ValidationError("gain curve: fraction " + std::to_string(k_fractions[f]) +
                            " gives k >= n");
    }
    ks.push_back(k);
  }
  // One graph per space at the largest k; smaller k read row prefixes.
  const std::size_t k_max = *std::max_element(ks.begin(), ks.end());
  const KnnGraph ga = knn_exact(a, k_max, workers);
  const KnnGraph gb = knn_exact(b, k_max, workers);

  GainCurve curve;
  curve.n = n;
  for (std::size_t f = 0; f < ks.size(); ++f) {
    const double m = mutual_knn(ga, gb, ks[f]);
    curve.points.push_back({k_fractions[f], ks[f], m, mknn_gain(m, ks[f], n)});
  }
  return curve;
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m,
                                                    std::uint64_t seed) {
  if (m > n) throw ValidationError("sample size exceeds population");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

double subsample_gain(const metric::DistanceMatrix& a, const metric::DistanceMatrix& b,
                      double k_fraction, std::size_t m, std::uint64_t seed,
                      unsigned workers) {
  if (a.size() != b.size()) throw ValidationError("subsample gain: spaces differ in size");
  if (m < 50) throw ValidationError("subsample gain: m must be at least 50");
  if (m > a.size()) throw ValidationError("subsample gain: m exceeds dataset size");
  const auto idx = sample_without_replacement(a.size(), m, seed);
  const auto sa = a.subset(idx);
  const auto sb = b.subset(idx);
  const std::size_t k = k_from_fraction(k_fraction, m);
  if (k >= m) throw ValidationError("subsample gain: k >= m");
  const KnnGraph ga = knn_exact(sa, k, workers);
  const KnnGraph gb = knn_exact(sb, k, workers);
  return mknn_gain(mutual_knn(ga, gb, k), k, m);
}

void write_gain_csv(const GainCurve& curve, std::ostream& out) {
  out << "k_fraction,k,mknn,gain\n";
  for (const auto& p : curve.points) {
    out << format_double(p.k_fraction) << ',' << p.k << ',' << format_double(p.mknn)
        << ',' << format_double(p.gain) << '\n';
  }
}

void write_gain_csv(const GainCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_gain_csv(curve, out);
  if (!out) throw IoError("write failed for " + path.string());
}

GainCurve read_gain_csv(const std::filesystem::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "k_fraction,k,mknn,gain") {
    throw ValidationError(path.string() + ": expected header 'k_fraction,k,mknn,gain'");
  }
  GainCurve curve;
  curve.n = n;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    GainPoint g;
    auto field = [&](auto& v, bool last) {
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc() || (last ? res.ptr != end : (res.ptr == end || *res.ptr != ','))) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
      }
      p = last ? res.ptr : res.ptr + 1;
    };
    field(g.k_fraction, false);
    field(g.k, false);
    field(g.mknn, false);
    field(g.gain, true);
    curve.points.push_back(g);
  }
  return curve;
}

}  // namespace vista::neighbors
