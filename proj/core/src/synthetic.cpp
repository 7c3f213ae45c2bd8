#include "vista/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "vista/error.hpp"
#include "vista/random.hpp"

namespace vista::synthetic {

void ClusterSpec::validate() const {
  if (clusters == 0 || per_cluster == 0) throw ValidationError("synthetic: empty cluster spec");
  if (clusters + 1 > dim) throw ValidationError("synthetic: need dim > clusters");
  if (!(sigma >= 0.0)) throw ValidationError("synthetic: sigma must be >= 0");
}

corpus::Corpus clustered_corpus(const ClusterSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t axes = spec.dim - 1;
  const std::size_t clustered = spec.clusters * spec.per_cluster;
  std::vector<corpus::Entry> entries;
  entries.reserve(clustered + spec.distractors);

  auto draw = [&](std::size_t center, bool on_latent) {
    std::vector<double> dense(spec.dim, 0.0);
    for (std::size_t j = 0; j < axes; ++j) {
      const double v = (j == center ? 1.0 : 0.0) + spec.sigma * rng.normal();
      dense[j] = std::max(0.0, v);
    }
    if (on_latent) dense[axes] = std::max(1e-3, 0.5 + spec.sigma * rng.normal());
    return corpus::ActivationVector::from_dense(dense);
  };

  char id[48];
  for (std::size_t i = 0; i < clustered; ++i) {
    const std::size_t c = i % spec.clusters;
    const std::size_t k = i / spec.clusters;
    std::snprintf(id, sizeof(id), "c%zu-%04zu", c, k);
    entries.push_back({{id, "theme " + std::to_string(c) + " sample " + std::to_string(k)},
                       draw(c, true)});
  }
  for (std::size_t i = 0; i < spec.distractors; ++i) {
    std::snprintf(id, sizeof(id), "d-%04zu", i);
    entries.push_back({{id, "unrelated sample " + std::to_string(i)},
                       draw(rng.below(spec.clusters), false)});
  }
  return corpus::Corpus(std::move(entries), spec.dim);
}

int label_of(std::string_view id) {
  if (id.size() < 2 || id[0] != 'c') return -1;
  int label = -1;
  const auto dash = id.find('-');
  auto res = std::from_chars(id.data() + 1, id.data() + std::min(dash, id.size()), label);
  if (res.ec != std::errc()) return -1;
  return label;
}

}  // namespace vista::synthetic
