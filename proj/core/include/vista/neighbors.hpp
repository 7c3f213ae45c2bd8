#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "vista/metric.hpp"

namespace vista::neighbors {

/// Exact k-nearest-neighbor lists, one row of k entries per point.
class KnnGraph {
 public:
  KnnGraph() = default;
  /// Validates shape, self-neighbors, index range and row ordering.
  KnnGraph(std::size_t n, std::size_t k, std::vector<std::uint32_t> neighbors,
           std::vector<double> distances);

  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }

  std::span<const std::uint32_t> neighbors(std::size_t i) const {
    return {neighbors_.data() + i * k_, k_};
  }
  std::span<const double> distances(std::size_t i) const {
    return {distances_.data() + i * k_, k_};
  }

  friend bool operator==(const KnnGraph&, const KnnGraph&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::vector<std::uint32_t> neighbors_;
  std::vector<double> distances_;
};

/// Brute-force kNN over a full distance matrix. Ties go to the smaller index.
KnnGraph knn_exact(const metric::DistanceMatrix& dist, std::size_t k,
                   unsigned workers = 1);

/// Mean over points of |top-k(a, i) ∩ top-k(b, i)| / k.
double mutual_knn(const KnnGraph& a, const KnnGraph& b, std::size_t k);

/// Expected overlap of two independent uniform k-subsets of the n - 1
/// candidate neighbors: k / (n - 1).
double chance_level(std::size_t k, std::size_t n);

/// Mutual-kNN with the chance overlap removed.
double mknn_gain(double mknn, std::size_t k, std::size_t n);

/// k = max(1, round(fraction * n)).
std::size_t k_from_fraction(double fraction, std::size_t n);

struct GainPoint {
  double k_fraction = 0.0;
  std::size_t k = 0;
  double mknn = 0.0;
  double gain = 0.0;

  friend bool operator==(const GainPoint&, const GainPoint&) = default;
};

struct GainCurve {
  std::vector<GainPoint> points;
  std::size_t n = 0;

  /// Point with the largest gain (earliest on ties). Requires a non-empty curve.
  const GainPoint& argmax() const;

  friend bool operator==(const GainCurve&, const GainCurve&) = default;
};

/// One curve point per fraction. Fractions must be strictly increasing and
/// each must map to 1 <= k < n.
GainCurve gain_curve(const metric::DistanceMatrix& a,
                     const metric::DistanceMatrix& b,
                     std::span<const double> k_fractions, unsigned workers = 1);

/// Gain estimated on m points drawn uniformly without replacement.
/// The subset keeps the original point order, so m == n reproduces the full
/// computation exactly.
double subsample_gain(const metric::DistanceMatrix& a,
                      const metric::DistanceMatrix& b, double k_fraction,
                      std::size_t m, std::uint64_t seed, unsigned workers = 1);

/// Sorted sample of m distinct indices from [0, n) (partial Fisher-Yates).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m,
                                                    std::uint64_t seed);

/// CSV with header "k_fraction,k,mknn,gain".
void write_gain_csv(const GainCurve& curve, std::ostream& out);
void write_gain_csv(const GainCurve& curve, const std::filesystem::path& path);
/// Inverse of write_gain_csv; `n` is not stored and must be supplied.
GainCurve read_gain_csv(const std::filesystem::path& path, std::size_t n);

}  // namespace vista::neighbors
