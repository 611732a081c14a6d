#include "emf/aggregation.hpp"

#include "doctest.h"
#include "emf/rng.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

using namespace emf;
using namespace emf::agg;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  int i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

std::vector<double> to_std(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

Vector random_unit_vector(Rng& rng, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform();
  return v;
}

}  // namespace

TEST_SUITE("aggregation") {

TEST_CASE("cardinal measure") {
  const auto m1 = cardinal_measure(1);
  CHECK(m1.of_cardinality(0) == 0.0);
  CHECK(m1.of_cardinality(1) == 1.0);

  CHECK(cardinal_measure(4).of_cardinality(2) == 0.5);

  const auto m3 = cardinal_measure(3);
  for (int k = 1; k <= 3; ++k) {
    CHECK(m3.of_cardinality(k) >= m3.of_cardinality(k - 1));
  }
  CHECK(oracle::near(m3.of_cardinality(1), 1.0 / 3.0, 1e-15));

  CHECK_THROWS_AS(cardinal_measure(0), Error);
  CHECK_THROWS_AS(make_measure({0.0, 0.7, 0.3, 1.0}), Error);
  CHECK_THROWS_AS(make_measure({0.1, 1.0}), Error);
}

TEST_CASE("hamacher t-norm") {
  CHECK(hamacher_tnorm(0.0, 0.0) == 0.0);
  CHECK(hamacher_tnorm(0.5, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(hamacher_tnorm(1.0, 1.0) == 1.0);

  // Commutativity, neutral element 1 and annihilator 0 on a 101x101 grid.
  for (int i = 0; i <= 100; ++i) {
    const double a = i / 100.0;
    CHECK(hamacher_tnorm(a, 1.0) == doctest::Approx(a).epsilon(1e-14));
    CHECK(hamacher_tnorm(a, 0.0) == 0.0);
    for (int j = 0; j <= 100; ++j) {
      const double b = j / 100.0;
      CHECK(hamacher_tnorm(a, b) == hamacher_tnorm(b, a));
      CHECK(hamacher_tnorm(a, b) >= 0.0);
      CHECK(hamacher_tnorm(a, b) <= 1.0);
    }
  }
}

TEST_CASE("choquet integral") {
  const auto x = vec({0.2, 0.5, 0.9});
  const auto m = cardinal_measure(3);
  CHECK(oracle::near(choquet(x, m), 0.5333333333333333, 1e-12));
  CHECK(choquet(x, m) == oracle::naive_choquet(to_std(x)));

  const auto c4 = vec({0.37, 0.37, 0.37, 0.37});
  CHECK(oracle::near(choquet(c4, cardinal_measure(4)), 0.37, 1e-12));

  CHECK(choquet(vec({1, 1, 1}), m) == 1.0);
  CHECK(choquet(vec({0, 0, 0}), m) == 0.0);

  CHECK_THROWS_AS(choquet(vec({0.1, 0.2}), m), Error);
}

TEST_CASE("cf with hamacher t-norm") {
  const auto m = cardinal_measure(3);
  const double got = cf_hamacher(vec({0.2, 0.5, 0.9}), m);
  CHECK(oracle::near(got, 0.6830917874396135, 1e-12));
  CHECK(got == oracle::naive_cf_hamacher({0.2, 0.5, 0.9}));

  CHECK(cf_hamacher(vec({0, 0, 0}), m) == 0.0);

  // Single nonzero difference lands at the last rank: CF = T_H(1, 1/n) = 1/n.
  for (int n = 2; n <= 6; ++n) {
    Vector x = Vector::Zero(n);
    x[0] = 1.0;
    CHECK(oracle::near(cf_hamacher(x, cardinal_measure(n)), 1.0 / n, 1e-12));
  }
}

TEST_CASE("cf1f2 generalization") {
  const auto x = vec({0.2, 0.5, 0.9});
  const auto m = cardinal_measure(3);

  // product/product recovers the Choquet integral by distributivity.
  CHECK(cf1f2(x, m, BinaryFusion::Product, BinaryFusion::Product) ==
        doctest::Approx(choquet(x, m)).epsilon(1e-14));

  CHECK(oracle::near(cf1f2(x, m, BinaryFusion::Minimum, BinaryFusion::Minimum),
                     0.5, 1e-12));

  const auto min_fn = [](double a, double b) { return std::min(a, b); };
  const auto prod_fn = [](double a, double b) { return a * b; };
  CHECK(cf1f2(x, m, kCf1F2DefaultF1, kCf1F2DefaultF2) ==
        oracle::naive_cf1f2(to_std(x), prod_fn, min_fn));
  CHECK(oracle::near(cf1f2(x, m, kCf1F2DefaultF1, kCf1F2DefaultF2), 0.3, 1e-12));

  for (auto f1 : {BinaryFusion::Product, BinaryFusion::Minimum, BinaryFusion::Hamacher}) {
    for (auto f2 : {BinaryFusion::Product, BinaryFusion::Minimum, BinaryFusion::Hamacher}) {
      CHECK(cf1f2(vec({0, 0, 0}), m, f1, f2) == 0.0);
    }
  }
}

TEST_CASE("sugeno integral and variants") {
  const auto x = vec({0.2, 0.5, 0.9});
  const auto m = cardinal_measure(3);

  CHECK(sugeno(x, m) == 0.5);
  CHECK(sugeno(x, m) == oracle::naive_sugeno(to_std(x)));
  CHECK(oracle::near(sugeno(vec({0.41, 0.41}), cardinal_measure(2)), 0.41, 1e-12));
  CHECK(sugeno(vec({1, 1, 1, 1}), cardinal_measure(4)) == 1.0);

  CHECK(sugeno_hamacher(x, m) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(sugeno_hamacher(vec({0, 0, 0}), m) == 0.0);
  CHECK(sugeno_hamacher(vec({0.73}), cardinal_measure(1)) ==
        doctest::Approx(0.73).epsilon(1e-14));

  CHECK(oracle::near(sugeno_f(x, m), 1.0 / 3.0, 1e-12));
  CHECK(sugeno_f(vec({1, 1, 1}), m) == 1.0);
  CHECK(sugeno_f(vec({0, 0, 0}), m) == 0.0);
}

TEST_CASE("owa weights from quantifier") {
  const auto w = owa_weights(0.1, 0.5, 3);
  CHECK(oracle::near(w.weights[0], 0.5833333333333334, 1e-12));
  CHECK(oracle::near(w.weights[1], 0.4166666666666667, 1e-12));
  CHECK(w.weights[2] == 0.0);

  const auto uniform = owa_weights(0.0, 1.0, 2);
  CHECK(uniform.weights[0] == 0.5);
  CHECK(uniform.weights[1] == 0.5);

  const auto extreme = owa_weights(0.5, 1.0, 2);
  CHECK(extreme.weights[0] == 0.0);
  CHECK(extreme.weights[1] == 1.0);

  CHECK_THROWS_AS(owa_weights(0.5, 0.5, 3), Error);
  CHECK_THROWS_AS(owa_weights(0.9, 0.2, 3), Error);

  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = rng.uniform(0.0, 0.9);
    const double b = rng.uniform(a + 0.05, 1.0);
    const int n = 1 + static_cast<int>(rng.below(8));
    const auto ww = owa_weights(a, std::min(b, 1.0), n);
    CHECK(oracle::near(ww.weights.sum(), 1.0, 1e-12));
    CHECK(ww.weights.minCoeff() >= 0.0);
  }
}

TEST_CASE("owa aggregation") {
  const auto x = vec({0.2, 0.5, 0.9});
  CHECK(oracle::near(owa(x, owa_weights(0.1, 0.5, 3)), 0.7333333333333333, 1e-12));
  CHECK(owa(x, owa_weights(0.1, 0.5, 3)) == oracle::naive_owa(to_std(x), 0.1, 0.5));

  OwaWeights uniform;
  uniform.weights = Vector::Constant(3, 1.0 / 3.0);
  CHECK(oracle::near(owa(x, uniform), oracle::naive_mean(to_std(x)), 1e-12));

  OwaWeights top;
  top.weights = vec({1, 0, 0});
  CHECK(owa(x, top) == 0.9);

  CHECK_THROWS_AS(owa(vec({0.1, 0.2}), owa_weights(0.1, 0.5, 3)), Error);
}

TEST_CASE("overlap functions") {
  CHECK(oracle::near(overlap(vec({0.25, 0.25, 0.25}), OverlapKind::GeometricMean),
                     0.25, 1e-12));
  CHECK(overlap(vec({1, 1, 1, 1}), OverlapKind::SinusOverlap) == 1.0);
  CHECK(oracle::near(overlap(vec({0.2, 0.5}), OverlapKind::HarmonicMean),
                     0.2857142857142857, 1e-12));
  CHECK(overlap(vec({0.0, 0.5}), OverlapKind::HarmonicMean) == 0.0);
  CHECK(overlap(vec({0.0, 0.5}), OverlapKind::GeometricMean) == 0.0);
  CHECK(overlap(vec({0.3, 0.8}), OverlapKind::Minimum) == 0.3);
}

TEST_CASE("classical aggregations") {
  const auto x = vec({0.2, 0.5, 0.9});
  CHECK(oracle::near(classical(x, ClassicalKind::Mean), 0.5333333333333333, 1e-12));
  CHECK(classical(vec({0.1, 0.9}), ClassicalKind::Median) == 0.5);
  CHECK(classical(vec({0.9, 0.1, 0.5}), ClassicalKind::Median) == 0.5);
  CHECK(classical(vec({0, 0, 0}), ClassicalKind::Max) == 0.0);
  CHECK(classical(x, ClassicalKind::Min) == 0.2);
}

TEST_CASE("aggregate dispatch") {
  const auto x = vec({0.2, 0.5, 0.9});
  CHECK(oracle::near(aggregate(AggregatorId::Choquet, x), 0.5333333333333333, 1e-12));
  CHECK(aggregate(AggregatorId::Choquet, x) == choquet(x, cardinal_measure(3)));

  CHECK(oracle::near(aggregate(AggregatorId::Mean, vec({0.63, 0.63, 0.63, 0.63})),
                     0.63, 1e-12));
  CHECK(oracle::near(aggregate(AggregatorId::Owa2, x), 0.3, 1e-12));
  CHECK(aggregate(AggregatorId::Owa2, x) == oracle::naive_owa(to_std(x), 0.5, 1.0));

  CHECK_THROWS_AS(aggregate(AggregatorId::Mean, Vector()), Error);
  CHECK_THROWS_AS(aggregate(AggregatorId::Mean, vec({0.2, 1.7})), Error);
  CHECK_THROWS_AS(aggregate(AggregatorId::Mean, vec({-0.4})), Error);
}

TEST_CASE("token round trip") {
  const char* expected[] = {"mean", "median",   "choquet", "cf_mm", "sugeno",
                            "h_sugeno", "f_sugeno", "min",  "max",   "cf1f2",
                            "owa1", "owa2",     "owa3",    "cf",    "gm",
                            "so",   "hm"};
  int i = 0;
  for (AggregatorId id : aggregator_catalog()) {
    CHECK(to_token(id) == expected[i++]);
    CHECK(aggregator_from_token(to_token(id)) == id);
  }
  CHECK(i == kAggregatorCount);
  CHECK_THROWS_AS(aggregator_from_token("bogus"), Error);
}

TEST_CASE("boundary conditions for all operators") {
  for (AggregatorId id : aggregator_catalog()) {
    for (int n = 1; n <= 8; ++n) {
      CHECK(oracle::near(aggregate(id, Vector::Zero(n)), 0.0, 1e-12));
      CHECK(oracle::near(aggregate(id, Vector::Ones(n)), 1.0, 1e-12));
    }
  }
}

TEST_CASE("idempotency of averaging operators") {
  const AggregatorId idempotent[] = {
      AggregatorId::Mean,   AggregatorId::Median,  AggregatorId::Min,
      AggregatorId::Max,    AggregatorId::Gm,      AggregatorId::Hm,
      AggregatorId::Choquet, AggregatorId::Sugeno, AggregatorId::Owa1,
      AggregatorId::Owa2,   AggregatorId::Owa3};
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const double c = rng.uniform();
    const int n = 1 + static_cast<int>(rng.below(8));
    const Vector x = Vector::Constant(n, c);
    for (AggregatorId id : idempotent) {
      CHECK(oracle::near(aggregate(id, x), c, 1e-12));
    }
  }
}

TEST_CASE("monotonicity on random ordered pairs") {
  const AggregatorId monotone[] = {
      AggregatorId::Mean,    AggregatorId::Median,  AggregatorId::Min,
      AggregatorId::Max,     AggregatorId::Choquet, AggregatorId::Sugeno,
      AggregatorId::HSugeno, AggregatorId::FSugeno, AggregatorId::Owa1,
      AggregatorId::Owa2,    AggregatorId::Owa3,    AggregatorId::Gm,
      AggregatorId::So,      AggregatorId::Hm};
  Rng rng(13);
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(8));
    Vector x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = rng.uniform();
      y[i] = x[i] + (1.0 - x[i]) * rng.uniform();
    }
    for (AggregatorId id : monotone) {
      CHECK(aggregate(id, x) <= aggregate(id, y) + 1e-12);
    }
    // CF is a pre-aggregation: increasing along the diagonal direction only
    // (a common shift changes just the first sorted increment). It is not
    // componentwise monotone; see CF((0,.9))=0.474 < CF((.3,.9))=0.675 yet
    // CF((.96,.23,.86,.99)) > CF((.99,.24,.96,.999)).
    const double shift = rng.uniform() * (1.0 - x.maxCoeff());
    const Vector shifted = x.array() + shift;
    CHECK(aggregate(AggregatorId::Cf, x) <=
          aggregate(AggregatorId::Cf, shifted) + 1e-12);
  }

  // CF and the CF1F2 family are range-safe under every pairing.
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(8));
    const Vector x = random_unit_vector(rng, n);
    for (AggregatorId id :
         {AggregatorId::Cf, AggregatorId::CfMm, AggregatorId::Cf1F2}) {
      const double v = aggregate(id, x);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("choquet with cardinal measure equals the arithmetic mean") {
  Rng rng(29);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(8));
    const Vector x = random_unit_vector(rng, n);
    CHECK(oracle::near(aggregate(AggregatorId::Choquet, x),
                       aggregate(AggregatorId::Mean, x), 1e-12));
    // Same identity phrased through explicit uniform OWA weights.
    OwaWeights uniform;
    uniform.weights = Vector::Constant(n, 1.0 / n);
    CHECK(oracle::near(choquet(x, cardinal_measure(n)), owa(x, uniform), 1e-12));
  }
}

TEST_CASE("sugeno matches brute-force oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(8));
    const Vector x = random_unit_vector(rng, n);
    CHECK(sugeno(x, cardinal_measure(n)) == oracle::naive_sugeno(to_std(x)));
  }
}

TEST_CASE("permutation symmetry of all operators") {
  Rng rng(37);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(7));
    const Vector x = random_unit_vector(rng, n);
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    Vector shuffled(n);
    for (int i = 0; i < n; ++i) shuffled[i] = x[perm[i]];
    for (AggregatorId id : aggregator_catalog()) {
      CHECK(oracle::near(aggregate(id, x), aggregate(id, shuffled), 1e-12));
    }
  }
}

TEST_CASE("sorted input bookkeeping") {
  const auto x = vec({0.9, 0.2, 0.5});
  const auto s = sort_ascending(x, cardinal_measure(3));
  CHECK(s.sorted[0] == 0.2);
  CHECK(s.sorted[1] == 0.5);
  CHECK(s.sorted[2] == 0.9);
  CHECK(s.perm == std::vector<int>{1, 2, 0});
  CHECK(s.tail_measures[0] == 1.0);
  for (int i = 0; i < 3; ++i) CHECK(x[s.perm[i]] == s.sorted[i]);

  // Ties keep original order.
  const auto t = sort_ascending(vec({0.5, 0.5, 0.1}), cardinal_measure(3));
  CHECK(t.perm == std::vector<int>{2, 0, 1});
}

}  // TEST_SUITE
