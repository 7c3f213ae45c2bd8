#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vista/metric.hpp"
#include "vista/neighbors.hpp"

namespace vista::layout {

using metric::Point2;

enum class Init { Spectral, Random };

/// Width:height ratio applied to the final embedding bounds.
struct Aspect {
  double width = 16.0;
  double height = 9.0;

  double ratio() const { return width / height; }
  friend bool operator==(const Aspect&, const Aspect&) = default;
};

struct LayoutConfig {
  std::size_t n_neighbors = 15;
  double min_dist = 0.1;
  double spread = 1.0;
  std::size_t epochs = 500;
  std::size_t negative_sample_rate = 5;
  double learning_rate = 1.0;
  Init init = Init::Spectral;
  std::uint64_t seed = 0;
  Aspect aspect;
  /// 1 runs the deterministic single-worker optimizer. More workers apply
  /// edge updates concurrently without locking and are not reproducible.
  unsigned workers = 1;

  void validate() const;
};

/// Symmetric sparse membership graph. Both (i, j) and (j, i) are stored,
/// sorted by (i, j).
struct FuzzyEdge {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double weight = 0.0;

  friend bool operator==(const FuzzyEdge&, const FuzzyEdge&) = default;
};

struct FuzzyGraph {
  std::size_t n = 0;
  std::vector<FuzzyEdge> edges;

  /// Weight of edge (i, j), 0 when absent.
  double weight(std::uint32_t i, std::uint32_t j) const;
};

struct Bounds {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  bool contains(const Point2& p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

Bounds bounds_of(std::span<const Point2> points);

struct Embedding2D {
  std::vector<Point2> coords;
  Aspect aspect;
  Bounds bounds;

  std::size_t size() const { return coords.size(); }
  friend bool operator==(const Embedding2D&, const Embedding2D&) = default;
};

struct SmoothKnn {
  double rho = 0.0;
  double sigma = 0.0;
};

inline constexpr double kSigmaMin = 1e-8;
inline constexpr double kSigmaMax = 1e8;

/// Finds (rho, sigma) so that sum_j exp(-max(0, d_j - rho) / sigma) hits
/// `target` (default log2(k)). sigma is clamped to [kSigmaMin, kSigmaMax]
/// when the target is out of reach.
SmoothKnn calibrate_smooth_knn(std::span<const double> row_distances);
SmoothKnn calibrate_smooth_knn(std::span<const double> row_distances, double target,
                               double tol = 1e-5, std::size_t max_iter = 64);

/// Membership sum sum_j exp(-max(0, d_j - rho) / sigma) for one row.
double membership_sum(std::span<const double> row_distances, double rho, double sigma);

/// Directed memberships from the kNN graph, symmetrized with the
/// probabilistic union w + w^T - w * w^T.
FuzzyGraph fuzzy_simplicial_set(const neighbors::KnnGraph& g);

struct CurveParams {
  double a = 0.0;
  double b = 0.0;
};

/// Least-squares fit of 1 / (1 + a d^(2b)) to the piecewise target curve
/// (1 up to min_dist, exponential decay with scale `spread` after), sampled
/// at 300 points on [0, 3 * spread]. Throws Error if the solver diverges.
CurveParams fit_ab(double min_dist, double spread);

/// Low-dimensional similarity 1 / (1 + a d^(2b)) for squared distance dsq.
double phi(double dsq, const CurveParams& ab);

/// Per-edge loss terms and their gradients with respect to the head point.
/// Attraction: -log(phi). Repulsion: -log(1 - phi).
double attractive_loss(const Point2& head, const Point2& tail, const CurveParams& ab);
double repulsive_loss(const Point2& head, const Point2& tail, const CurveParams& ab);
Point2 attractive_gradient(const Point2& head, const Point2& tail, const CurveParams& ab);
Point2 repulsive_gradient(const Point2& head, const Point2& tail, const CurveParams& ab);

/// Initial coordinates scaled into [-10, 10]^2.
std::vector<Point2> spectral_init(const FuzzyGraph& fg, std::uint64_t seed);
std::vector<Point2> random_init(std::size_t n, std::uint64_t seed);

/// Runs the stochastic layout and rescales the result onto cfg.aspect.
Embedding2D optimize(const FuzzyGraph& fg, const LayoutConfig& cfg);

/// Affine per-axis rescale so the bounds are [0, ratio * 100] x [0, 100].
Embedding2D fit_to_aspect(std::vector<Point2> coords, const Aspect& aspect);

/// kNN graph + fuzzy set + optimize for a precomputed distance matrix.
Embedding2D embed(const metric::DistanceMatrix& dist, const LayoutConfig& cfg,
                  unsigned knn_workers = 1);

/// Gain curve of the embedding's Euclidean neighbors against `slice_distances`.
neighbors::GainCurve layout_fidelity(const metric::DistanceMatrix& slice_distances,
                                     const Embedding2D& emb,
                                     std::span<const double> k_fractions,
                                     unsigned workers = 1);

struct EmbeddingRow {
  std::string id;
  Point2 p;
};

/// CSV "id,x,y" with round-trip exact coordinates.
void write_embedding_csv(std::span<const std::string> ids, const Embedding2D& emb,
                         const std::filesystem::path& path);
std::vector<EmbeddingRow> read_embedding_csv(const std::filesystem::path& path);

}  // namespace vista::layout
