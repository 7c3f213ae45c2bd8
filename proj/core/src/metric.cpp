#include "vista/metric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vista/error.hpp"
#include "vista/parallel.hpp"

namespace vista::metric {

namespace {

double squared_norm(const corpus::ActivationVector& v) {
  double s = 0.0;
  for (double x : v.values()) s += x * x;
  return s;
}

// Merge-intersection of two sorted index lists.
double sparse_dot(const corpus::ActivationVector& u,
                  const corpus::ActivationVector& v) {
  const auto& ui = u.indices();
  const auto& vi = v.indices();
  std::size_t a = 0;
  std::size_t b = 0;
  double dot = 0.0;
  while (a < ui.size() && b < vi.size()) {
    if (ui[a] < vi[b]) {
      ++a;
    } else if (vi[b] < ui[a]) {
      ++b;
    } else {
      dot += u.values()[a] * v.values()[b];
      ++a;
      ++b;
    }
  }
  return dot;
}

double cosine_from_parts(double dot, double norm_u, double norm_v) {
  const double d = 1.0 - dot / (norm_u * norm_v);
  return std::clamp(d, 0.0, 2.0);
}

}  // namespace

void MetricConfig::validate() const {
  if (!std::isfinite(axis_weight) || axis_weight < 0.0) {
    throw ValidationError("metric: axis_weight must be finite and >= 0");
  }
}

DistanceMatrix::DistanceMatrix(std::size_t n, std::vector<double> data)
    : n_(n), data_(std::move(data)) {
  if (data_.size() != n_ * n_) {
    throw ValidationError("distance matrix: expected " + std::to_string(n_ * n_) +
                          " entries, got " + std::to_string(data_.size()));
  }
}

DistanceMatrix DistanceMatrix::subset(std::span<const std::size_t> indices) const {
  DistanceMatrix out(indices.size());
  for (std::size_t a = 0; a < indices.size(); ++a) {
    if (indices[a] >= n_) throw ValidationError("distance matrix: subset index out of range");
    for (std::size_t b = 0; b < indices.size(); ++b) {
      out(a, b) = (*this)(indices[a], indices[b]);
    }
  }
  return out;
}

double cosine_distance(const corpus::ActivationVector& u,
                       const corpus::ActivationVector& v) {
  if (u.dim() != v.dim()) {
    throw ValidationError("cosine distance: dim mismatch " + std::to_string(u.dim()) +
                          " vs " + std::to_string(v.dim()));
  }
  const double nu = squared_norm(u);
  const double nv = squared_norm(v);
  if (nu == 0.0 || nv == 0.0) {
    throw ValidationError("cosine distance: zero-norm activation vector");
  }
  return cosine_from_parts(sparse_dot(u, v), std::sqrt(nu), std::sqrt(nv));
}

double vista_distance(const corpus::ActivationVector& u,
                      const corpus::ActivationVector& v, double a_u, double a_v,
                      const MetricConfig& cfg) {
  if (!std::isfinite(a_u) || !std::isfinite(a_v)) {
    throw ValidationError("vista distance: non-finite axis activation");
  }
  return cosine_distance(u, v) + cfg.axis_weight * std::abs(a_u - a_v);
}

double axis_value(const corpus::SliceMember& m, const MetricConfig& cfg) {
  return cfg.use_normalized_axis ? m.norm_activation : m.raw_activation;
}

void distance_row(const corpus::LatentSlice& slice, const MetricConfig& cfg,
                  std::size_t i, std::span<double> out) {
  const auto& members = slice.members;
  if (out.size() != members.size()) {
    throw ValidationError("distance row: output span has wrong size");
  }
  const auto& mi = members[i];
  const double ai = axis_value(mi, cfg);
  for (std::size_t j = 0; j < members.size(); ++j) {
    out[j] = (i == j) ? 0.0
                      : vista_distance(mi.vector, members[j].vector, ai,
                                       axis_value(members[j], cfg), cfg);
  }
}

DistanceMatrix pairwise_distances(const corpus::LatentSlice& slice,
                                  const MetricConfig& cfg, unsigned workers) {
  cfg.validate();
  const std::size_t n = slice.size();
  if (n == 0) throw ValidationError("pairwise distances: empty slice");

  // Norms are cached so each entry costs one sparse merge.
  std::vector<double> norms(n);
  std::vector<double> axis(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double sq = squared_norm(slice.members[i].vector);
    if (sq == 0.0) throw ValidationError("pairwise distances: zero-norm activation vector");
    norms[i] = std::sqrt(sq);
    axis[i] = axis_value(slice.members[i], cfg);
    if (!std::isfinite(axis[i])) throw ValidationError("pairwise distances: non-finite axis activation");
  }

  DistanceMatrix dist(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const auto& u = slice.members[i].vector;
    auto row = dist.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        row[j] = 0.0;
        continue;
      }
      row[j] = cosine_from_parts(sparse_dot(u, slice.members[j].vector),
                                 norms[i], norms[j]) +
               cfg.axis_weight * std::abs(axis[i] - axis[j]);
    }
  });
  return dist;
}

DistanceMatrix euclidean_distances(std::span<const Point2> points) {
  const std::size_t n = points.size();
  DistanceMatrix dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::hypot(points[i].x - points[j].x, points[i].y - points[j].y);
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  return dist;
}

DistanceMatrix euclidean_distances(std::span<const double> data, std::size_t dim) {
  if (dim == 0 || data.size() % dim != 0) {
    throw ValidationError("euclidean distances: data size not a multiple of dim");
  }
  const std::size_t n = data.size() / dim;
  DistanceMatrix dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = data[i * dim + c] - data[j * dim + c];
        s += diff * diff;
      }
      const double d = std::sqrt(s);
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  return dist;
}

}  // namespace vista::metric
