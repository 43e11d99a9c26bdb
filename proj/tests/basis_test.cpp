#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kfp/hermite.hpp"
#include "kfp/multi_index.hpp"

#include <cmath>
#include <random>

using namespace kfp;

namespace {

// Brute-force quadrature oracle for (psi_j, psi_k) in L^2(exp(-v^2/2) dv),
// written against the definition alone (no identity shortcuts).
double quad_inner(int j, int k, int q) {
  const auto rule = gauss_hermite<double>(q);
  double sum = 0.0;
  for (Index i = 0; i < rule.nodes.size(); ++i)
    sum += rule.weights[i] * hermite_value(j, rule.nodes[i]) * hermite_value(k, rule.nodes[i]);
  return sum;
}

}  // namespace

TEST_CASE("normalization constants") {
  // psi_0 = (2 pi)^{-1/4}, frozen from the Gaussian integral.
  CHECK(hermite_value(0, 0.0) == doctest::Approx(0.6316187778).epsilon(1e-9));
  CHECK(hermite_value(0, 3.7) == doctest::Approx(std::pow(2.0 * kPi, -0.25)).epsilon(1e-15));
  // psi_1 = v (2 pi)^{-1/4}.
  CHECK(hermite_value(1, 2.0) == doctest::Approx(2.0 * std::pow(2.0 * kPi, -0.25)).epsilon(1e-14));
  // psi_2(0) = -2^{-1/2} (2 pi)^{-1/4}, h_2 = v^2 - 1.
  CHECK(hermite_value(2, 0.0) == doctest::Approx(-0.4466).epsilon(1e-4));
  CHECK(hermite_value(2, 0.0) ==
        doctest::Approx(-std::pow(2.0 * kPi, -0.25) / std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("orthonormality against the quadrature oracle") {
  for (int j = 0; j <= 8; ++j)
    for (int k = 0; k <= 8; ++k) {
      const double expected = (j == k) ? 1.0 : 0.0;
      CHECK(std::abs(quad_inner(j, k, 10) - expected) < 1e-12);
    }
}

TEST_CASE("three-term recurrence and derivative identities at random points") {
  std::mt19937_64 rng(20240811);
  std::uniform_real_distribution<double> dist(-4.0, 4.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double v = dist(rng);
    const auto psi = hermite_values<double>(12, v);
    for (int k = 1; k <= 10; ++k) {
      // v psi_k = sqrt(k+1) psi_{k+1} + sqrt(k) psi_{k-1}
      CHECK(std::abs(v * psi[k] - std::sqrt(k + 1.0) * psi[k + 1] - std::sqrt(1.0 * k) * psi[k - 1]) <
            1e-12);
      // psi_k' via the downward ladder equals sqrt(k) psi_{k-1}
      CHECK(std::abs(hermite_derivative(k, v) - std::sqrt(1.0 * k) * psi[k - 1]) < 1e-12);
    }
  }
}

TEST_CASE("Ornstein-Uhlenbeck eigenrelation") {
  // Weak form: (psi_j', psi_k') = k delta_jk under the Gaussian weight.
  for (int j = 1; j <= 8; ++j)
    for (int k = 1; k <= 8; ++k) {
      const auto rule = gauss_hermite<double>(12);
      double sum = 0.0;
      for (Index i = 0; i < rule.nodes.size(); ++i)
        sum += rule.weights[i] * hermite_derivative(j, rule.nodes[i]) *
               hermite_derivative(k, rule.nodes[i]);
      const double expected = (j == k) ? static_cast<double>(k) : 0.0;
      CHECK(std::abs(sum - expected) < 1e-10);
    }
  // Pointwise form: -psi_k'' + v psi_k' = k psi_k, with psi_k'' expanded
  // through the downward ladder only.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-4.0, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double v = dist(rng);
    const auto psi = hermite_values<double>(12, v);
    for (int k = 0; k <= 10; ++k) {
      const double d1 = v * psi[k] - std::sqrt(k + 1.0) * psi[k + 1];
      const double d1_up = v * psi[k + 1] - std::sqrt(k + 2.0) * psi[k + 2];
      const double d2 = psi[k] + v * d1 - std::sqrt(k + 1.0) * d1_up;
      CHECK(std::abs(-d2 + v * d1 - k * psi[k]) < 1e-9);
    }
  }
}

TEST_CASE("gauss hermite rule") {
  SUBCASE("q = 1 is the midpoint rule with the full mass") {
    const auto rule = gauss_hermite<double>(1);
    CHECK(rule.nodes[0] == 0.0);
    CHECK(rule.weights[0] == doctest::Approx(2.5066282746).epsilon(1e-9));
  }
  SUBCASE("moments match the Gaussian up to degree 2q - 1") {
    const int q = 12;
    const auto rule = gauss_hermite<double>(q);
    const double mass = std::sqrt(2.0 * kPi);
    double expected = mass;  // (2j-1)!! sqrt(2 pi), odd moments vanish
    for (int p = 0; p <= 2 * q - 1; ++p) {
      const double moment = (rule.weights.array() * rule.nodes.array().pow(p)).sum();
      if (p % 2 == 1) {
        // Odd moments vanish; the attainable scale is set by the
        // neighbouring even moment's magnitude.
        CHECK(std::abs(moment) < 1e-12 * expected);
      } else {
        if (p > 0) expected *= (p - 1);
        CHECK(moment == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
  SUBCASE("nodes are symmetric and weights positive") {
    for (int q : {2, 5, 8, 13}) {
      const auto rule = gauss_hermite<double>(q);
      CHECK((rule.weights.array() > 0).all());
      for (int i = 0; i < q; ++i) CHECK(rule.nodes[i] == -rule.nodes[q - 1 - i]);
    }
  }
  SUBCASE("rejects invalid orders") {
    CHECK_THROWS_AS(gauss_hermite<double>(0), ConfigError);
    CHECK_THROWS_AS(gauss_hermite<double>(kMaxQuadraturePoints + 1), ConfigError);
  }
}

TEST_CASE("basis indexer enumeration") {
  SUBCASE("documented order for d = 2, m = 1") {
    const BasisIndexer idx(2, 1);
    REQUIRE(idx.size() == 3);
    CHECK(idx.order(0) == MultiIndex{0, 0});
    CHECK(idx.order(1) == MultiIndex{1, 0});
    CHECK(idx.order(2) == MultiIndex{0, 1});
  }
  SUBCASE("size is binomial(m + d, d)") {
    CHECK(BasisIndexer(1, 7).size() == 8);
    CHECK(BasisIndexer(2, 8).size() == 45);
    CHECK(BasisIndexer(3, 10).size() == 286);
  }
  SUBCASE("position inverts order and degrees are graded") {
    const BasisIndexer idx(3, 6);
    int prev_degree = 0;
    for (Index i = 0; i < idx.size(); ++i) {
      CHECK(idx.position(idx.order(i)) == i);
      CHECK(idx.degree_of(i) >= prev_degree);
      prev_degree = idx.degree_of(i);
    }
  }
  SUBCASE("lower truncation is a prefix of higher truncation") {
    const BasisIndexer small(2, 3), big(2, 6);
    for (Index i = 0; i < small.size(); ++i) CHECK(small.order(i) == big.order(i));
  }
  SUBCASE("raise and lower edges") {
    const BasisIndexer idx(2, 2);
    const Index top = idx.position(MultiIndex{2, 0});
    CHECK(!idx.raise_index(top, 0).has_value());
    CHECK(!idx.raise_index(top, 1).has_value());
    CHECK(!idx.lower_index(top, 1).has_value());
    CHECK(idx.lower_index(top, 0) == idx.position(MultiIndex{1, 0}));
    const Index origin = idx.position(MultiIndex{0, 0});
    CHECK(idx.raise_index(origin, 1) == idx.position(MultiIndex{0, 1}));
    CHECK(!idx.lower_index(origin, 0).has_value());
    for (Index i = 0; i < idx.size(); ++i)
      for (int dim = 0; dim < 2; ++dim) {
        const auto up = idx.raise_index(i, dim);
        if (up) CHECK(idx.lower_index(*up, dim) == i);
      }
  }
  SUBCASE("rejects degenerate and overflowing sizes") {
    CHECK_THROWS_AS(BasisIndexer(0, 3), ConfigError);
    CHECK_THROWS_AS(BasisIndexer(-1, 3), ConfigError);
    CHECK_THROWS_AS(basis_size(40, 60), ConfigError);
  }
}
