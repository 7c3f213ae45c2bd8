#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vista/corpus.hpp"

namespace vista::metric {

/// Weighting of the latent-axis term in the hybrid distance.
struct MetricConfig {
  double axis_weight = 1.0;
  bool use_normalized_axis = true;

  void validate() const;
};

/// Dense row-major N x N matrix of pairwise distances.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}
  DistanceMatrix(std::size_t n, std::vector<double> data);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * n_, n_};
  }
  std::span<double> row(std::size_t i) { return {data_.data() + i * n_, n_}; }

  const std::vector<double>& data() const { return data_; }

  /// Restriction to the given (ordered) subset of points.
  DistanceMatrix subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// 1 - cos(u, v) via sparse index intersection, clamped into [0, 2].
/// Throws ValidationError on a dimension mismatch or a zero-norm vector.
double cosine_distance(const corpus::ActivationVector& u,
                       const corpus::ActivationVector& v);

/// cosine_distance(u, v) + axis_weight * |a_u - a_v|.
double vista_distance(const corpus::ActivationVector& u,
                      const corpus::ActivationVector& v, double a_u, double a_v,
                      const MetricConfig& cfg);

/// Latent-axis coordinate of a slice member under `cfg`.
double axis_value(const corpus::SliceMember& m, const MetricConfig& cfg);

/// Computes row `i` of the slice's distance matrix into `out` (size N).
/// Lets callers stream rows with O(N) memory.
void distance_row(const corpus::LatentSlice& slice, const MetricConfig& cfg,
                  std::size_t i, std::span<double> out);

/// Full symmetric distance matrix with a zero diagonal. Rows are computed
/// independently, so the result does not depend on `workers`.
DistanceMatrix pairwise_distances(const corpus::LatentSlice& slice,
                                  const MetricConfig& cfg, unsigned workers = 1);

/// Euclidean distances between 2D points.
DistanceMatrix euclidean_distances(std::span<const Point2> points);

/// Euclidean distances between rows of a dense row-major matrix.
DistanceMatrix euclidean_distances(std::span<const double> data, std::size_t dim);

}  // namespace vista::metric
