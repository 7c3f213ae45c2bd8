#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "vista/error.hpp"
#include "vista/metric.hpp"
#include "vista/random.hpp"

using namespace vista;
using namespace vista::metric;
using test::sparse;

namespace {

corpus::ActivationVector random_vector(Rng& rng, std::size_t dim) {
  std::vector<double> dense(dim, 0.0);
  while (true) {
    for (auto& v : dense) v = rng.uniform() < 0.3 ? rng.uniform(0.01, 3.0) : 0.0;
    for (double v : dense)
      if (v > 0.0) return corpus::ActivationVector::from_dense(dense);
  }
}

}  // namespace

TEST_CASE("cosine_distance examples") {
  CHECK(cosine_distance(sparse({0}, {1.0}), sparse({1}, {1.0})) == 1.0);
  const auto u = sparse({0, 3, 7}, {0.5, 1.25, 2.0});
  CHECK(cosine_distance(u, u) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_distance(sparse({0}, {1.0}), sparse({0, 1}, {1.0, 1.0})) ==
        doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(cosine_distance(sparse({0}, {1.0}), sparse({0, 1}, {1.0, 1.0})) ==
        doctest::Approx(0.29289).epsilon(1e-5));
}

TEST_CASE("cosine_distance errors") {
  CHECK_THROWS_AS(cosine_distance(sparse({0}, {1.0}, 4), sparse({0}, {1.0}, 8)), ValidationError);
  CHECK_THROWS_AS(cosine_distance(sparse({}, {}, 4), sparse({0}, {1.0}, 4)), ValidationError);
}

TEST_CASE("vista_distance examples") {
  const MetricConfig cfg;
  const auto u = sparse({0}, {1.0});
  CHECK(vista_distance(u, u, 0.4, 0.4, cfg) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(vista_distance(sparse({0}, {1.0}), sparse({1}, {1.0}), 1.0, 0.0, cfg) == 2.0);
  CHECK(vista_distance(u, sparse({0, 1}, {1.0, 1.0}), 0.8, 0.3, cfg) ==
        doctest::Approx(1.0 - 1.0 / std::sqrt(2.0) + 0.5).epsilon(1e-12));
  CHECK_THROWS_AS(vista_distance(u, u, NAN, 0.0, cfg), ValidationError);

  MetricConfig heavy;
  heavy.axis_weight = 3.0;
  CHECK(vista_distance(sparse({0}, {1.0}), sparse({1}, {1.0}), 1.0, 0.5, heavy) == 2.5);
  heavy.axis_weight = -1.0;
  CHECK_THROWS_AS(heavy.validate(), ValidationError);
}

TEST_CASE("metric properties on random vectors") {
  Rng rng(7);
  const MetricConfig cfg;
  for (int t = 0; t < 200; ++t) {
    const auto u = random_vector(rng, 24);
    const auto v = random_vector(rng, 24);
    const double au = rng.uniform();
    const double av = rng.uniform();
    const double d = vista_distance(u, v, au, av, cfg);
    CHECK(d == vista_distance(v, u, av, au, cfg));
    CHECK(d >= 0.0);
    CHECK(d <= 2.0 + cfg.axis_weight * 1.0);
    CHECK((vista_distance(u, v, au, au, cfg) == cosine_distance(u, v)));

    const double c = rng.uniform(0.1, 50.0);
    std::vector<double> scaled = u.values();
    for (auto& x : scaled) x *= c;
    const corpus::ActivationVector cu(u.indices(), scaled, u.dim());
    CHECK(std::abs(cosine_distance(cu, v) - cosine_distance(u, v)) < 1e-12);
  }
}

TEST_CASE("pairwise_distances") {
  SUBCASE("single item") {
    const auto slice = test::make_slice({sparse({1}, {1.0})}, {0.0});
    const auto d = pairwise_distances(slice, MetricConfig{});
    REQUIRE(d.size() == 1);
    CHECK(d(0, 0) == 0.0);
  }
  SUBCASE("matches per-pair calls and is symmetric") {
    const auto slice = test::make_slice(
        {sparse({0, 2}, {1.0, 0.5}), sparse({1, 2}, {2.0, 1.0}), sparse({0, 1, 3}, {0.3, 0.4, 2.0})},
        {1.0, 0.25, 0.0});
    MetricConfig cfg;
    const auto d = pairwise_distances(slice, cfg);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(d(i, i) == 0.0);
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(d(i, j) == d(j, i));
        if (i != j) {
          CHECK(d(i, j) == doctest::Approx(vista_distance(
                                               slice.members[i].vector, slice.members[j].vector,
                                               slice.members[i].norm_activation,
                                               slice.members[j].norm_activation, cfg))
                               .epsilon(1e-14));
        }
      }
    }
  }
  SUBCASE("raw axis when normalization is off") {
    const auto slice = test::make_slice({sparse({0}, {1.0}), sparse({0}, {2.0})}, {0.0, 1.0});
    MetricConfig cfg;
    cfg.use_normalized_axis = false;
    const auto d = pairwise_distances(slice, cfg);
    CHECK(d(0, 1) == doctest::Approx(1.0));  // raw activations 1.0 and 2.0
  }
  SUBCASE("independent of the worker count") {
    Rng rng(3);
    std::vector<corpus::ActivationVector> vs;
    std::vector<double> norm;
    for (int i = 0; i < 60; ++i) {
      vs.push_back(random_vector(rng, 16));
      norm.push_back(rng.uniform());
    }
    const auto slice = test::make_slice(vs, norm);
    CHECK(pairwise_distances(slice, MetricConfig{}, 1) == pairwise_distances(slice, MetricConfig{}, 4));
  }
}

TEST_CASE("DistanceMatrix subset and euclidean helpers") {
  const std::vector<Point2> pts{{0, 0}, {3, 4}, {6, 8}};
  const auto d = euclidean_distances(pts);
  CHECK(d(0, 1) == 5.0);
  CHECK(d(0, 2) == 10.0);
  const std::vector<std::size_t> keep{2, 0};
  const auto s = d.subset(keep);
  CHECK(s.size() == 2);
  CHECK(s(0, 1) == 10.0);
  const std::vector<double> dense{0, 0, 0, 1, 2, 2};
  const auto e = euclidean_distances(dense, 3);
  CHECK(e(0, 1) == 3.0);
  CHECK_THROWS_AS(euclidean_distances(std::vector<double>{1, 2, 3}, 2), ValidationError);
}
