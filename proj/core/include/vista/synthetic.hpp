#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "vista/corpus.hpp"

namespace vista::synthetic {

/// Clustered test corpus. Cluster c sits at the unit vector e_c; items are
/// relu(e_c + N(0, sigma^2)) on the first dim - 1 coordinates. The last
/// coordinate is the probe latent: 0.5 + N(0, sigma^2) (kept positive) for
/// cluster items and exactly 0 for distractors, so selecting the top
/// clusters * per_cluster items on it recovers the clustered set.
struct ClusterSpec {
  std::size_t clusters = 5;
  std::size_t per_cluster = 200;
  std::size_t distractors = 250;
  std::size_t dim = 32;
  double sigma = 0.1;
  std::uint64_t seed = 42;

  corpus::LatentId latent() const { return static_cast<corpus::LatentId>(dim - 1); }
  void validate() const;
};

/// Items are interleaved across clusters; ids are "c{cluster}-{index}" for
/// cluster items and "d-{index}" for distractors.
corpus::Corpus clustered_corpus(const ClusterSpec& spec);

/// Cluster label encoded in an id from clustered_corpus, -1 for distractors.
int label_of(std::string_view id);

}  // namespace vista::synthetic
