#include <map>

#include "doctest.h"
#include "vista/error.hpp"
#include "vista/synthetic.hpp"

using namespace vista;
using namespace vista::synthetic;

TEST_CASE("clustered corpus") {
  ClusterSpec spec;
  spec.clusters = 3;
  spec.per_cluster = 20;
  spec.distractors = 7;
  spec.dim = 8;
  const auto c = clustered_corpus(spec);
  CHECK(c.size() == 67);
  CHECK(c.dim() == 8);
  CHECK(c == clustered_corpus(spec));

  std::map<int, int> counts;
  for (const auto& e : c.entries()) {
    const int label = label_of(e.item.id);
    ++counts[label];
    const double probe = corpus::activation_of(e.vector, spec.latent());
    if (label < 0) {
      CHECK(probe == 0.0);
    } else {
      CHECK(probe > 0.0);
      // The cluster's own axis dominates for small noise.
      for (corpus::LatentId j = 0; j + 1 < spec.dim; ++j) {
        if (static_cast<int>(j) != label) {
          CHECK(corpus::activation_of(e.vector, j) < corpus::activation_of(e.vector, label));
        }
      }
    }
  }
  CHECK(counts[-1] == 7);
  for (int l = 0; l < 3; ++l) CHECK(counts[l] == 20);

  spec.seed = 43;
  CHECK_FALSE(c == clustered_corpus(spec));
}

TEST_CASE("label_of") {
  CHECK(label_of("c3-0012") == 3);
  CHECK(label_of("c12-0000") == 12);
  CHECK(label_of("d-0004") == -1);
  CHECK(label_of("x") == -1);
}

TEST_CASE("spec validation") {
  ClusterSpec spec;
  spec.dim = 5;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = {};
  spec.clusters = 0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = {};
  spec.sigma = -1;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}
