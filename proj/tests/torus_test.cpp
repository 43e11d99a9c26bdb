#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kfp/potential.hpp"
#include "kfp/torus_grid.hpp"

#include <cmath>
#include <memory>
#include <random>

using namespace kfp;

namespace {

VectorX<double> random_field(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> dist;
  VectorX<double> f(n);
  for (Index i = 0; i < n; ++i) f[i] = dist(rng);
  return f;
}

VectorX<double> sample_1d(const TorusGrid<double>& grid, double (*fn)(double)) {
  VectorX<double> f(grid.total_nodes());
  for (Index j = 0; j < grid.total_nodes(); ++j) f[j] = fn(grid.coords(j)[0]);
  return f;
}

}  // namespace

TEST_CASE("grid geometry") {
  const TorusGrid<double> grid(2, 2.0, 8);
  CHECK(grid.total_nodes() == 64);
  CHECK(grid.spacing() == doctest::Approx(0.5));
  CHECK(grid.node_1d(0) == -2.0);
  CHECK(grid.node_1d(7) == doctest::Approx(1.5));
  CHECK(grid.max_wavenumber() == doctest::Approx(kPi * 8 / 4.0));
  // dimension 0 varies fastest in the flattened index
  const VectorX<double> x = grid.coords(1 + 8 * 3);
  CHECK(x[0] == doctest::Approx(grid.node_1d(1)));
  CHECK(x[1] == doctest::Approx(grid.node_1d(3)));
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(TorusGrid<double>(0, 1.0, 8), ConfigError);
  CHECK_THROWS_AS(TorusGrid<double>(4, 1.0, 8), ConfigError);
  CHECK_THROWS_AS(TorusGrid<double>(1, 0.0, 8), ConfigError);
  CHECK_THROWS_AS(TorusGrid<double>(1, 1.0, 12), ConfigError);
  CHECK_THROWS_AS(TorusGrid<double>(1, 1.0, 2), ConfigError);
}

TEST_CASE("derivative is exact for resolved trigonometric fields") {
  const TorusGrid<double> grid(1, kPi, 8);
  const VectorX<double> f = sample_1d(grid, [](double x) { return std::sin(x); });
  const VectorX<double> df = spectral_derivative(f, grid, 0);
  for (Index j = 0; j < grid.total_nodes(); ++j)
    CHECK(std::abs(df[j] - std::cos(grid.coords(j)[0])) < 1e-12);
}

TEST_CASE("derivative in two dimensions") {
  const TorusGrid<double> grid(2, kPi, 16);
  VectorX<double> f(grid.total_nodes());
  for (Index j = 0; j < grid.total_nodes(); ++j) {
    const auto x = grid.coords(j);
    f[j] = std::sin(x[0]) * std::cos(2 * x[1]);
  }
  const VectorX<double> d0 = spectral_derivative(f, grid, 0);
  const VectorX<double> d1 = spectral_derivative(f, grid, 1);
  for (Index j = 0; j < grid.total_nodes(); ++j) {
    const auto x = grid.coords(j);
    CHECK(std::abs(d0[j] - std::cos(x[0]) * std::cos(2 * x[1])) < 1e-11);
    CHECK(std::abs(d1[j] + 2 * std::sin(x[0]) * std::sin(2 * x[1])) < 1e-11);
  }
}

TEST_CASE("derivative error for exp(sin x) decays faster than any fixed power") {
  std::vector<double> errors;
  for (int n : {8, 16, 32, 64}) {
    const TorusGrid<double> grid(1, kPi, n);
    VectorX<double> f(n), exact(n);
    for (int j = 0; j < n; ++j) {
      const double x = grid.node_1d(j);
      f[j] = std::exp(std::sin(x));
      exact[j] = std::cos(x) * std::exp(std::sin(x));
    }
    errors.push_back((spectral_derivative(f, grid, 0) - exact).cwiseAbs().maxCoeff());
  }
  CHECK(errors[0] / errors[1] > 1e2);
  CHECK(errors[1] / errors[2] > 1e4);
  CHECK(errors[3] < 1e-10);
}

TEST_CASE("derivative of a constant field vanishes") {
  const TorusGrid<double> grid(1, kPi, 32);
  const VectorX<double> f = VectorX<double>::Constant(32, 3.25);
  CHECK(spectral_derivative(f, grid, 0).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("derivative is antisymmetric in the unweighted product") {
  const TorusGrid<double> grid(1, kPi, 32);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorX<double> u = random_field(rng, 32), w = random_field(rng, 32);
    const double lhs = spectral_derivative(u, grid, 0).dot(w);
    const double rhs = u.dot(spectral_derivative(w, grid, 0));
    CHECK(std::abs(lhs + rhs) <= 1e-12 * u.norm() * w.norm() * grid.max_wavenumber());
  }
}

TEST_CASE("band-limited interpolation") {
  const TorusGrid<double> grid(1, kPi, 16);
  const VectorX<double> f = sample_1d(grid, [](double x) { return std::sin(x); });
  SUBCASE("reproduces nodal values") {
    for (int j = 0; j < 16; ++j) {
      const VectorX<double> w = grid.interpolation_weights_1d(grid.node_1d(j));
      CHECK(std::abs(w.dot(f) - f[j]) < 1e-13);
    }
  }
  SUBCASE("exact off the grid for resolved fields") {
    for (double x : {-2.93, -0.41, 0.137, 1.9, 3.0}) {
      const VectorX<double> w = grid.interpolation_weights_1d(x);
      CHECK(std::abs(w.dot(f) - std::sin(x)) < 1e-12);
    }
  }
  SUBCASE("tensor weights in two dimensions") {
    const TorusGrid<double> grid2(2, kPi, 16);
    VectorX<double> g(grid2.total_nodes());
    for (Index j = 0; j < grid2.total_nodes(); ++j) {
      const auto x = grid2.coords(j);
      g[j] = std::sin(x[0]) * std::cos(x[1]);
    }
    VectorX<double> p(2);
    p << 0.7, -1.3;
    const VectorX<double> w = grid2.interpolation_weights(p);
    CHECK(std::abs(w.dot(g) - std::sin(0.7) * std::cos(-1.3)) < 1e-12);
  }
}

TEST_CASE("gibbs weights and the conjugated adjoint") {
  auto grid = std::make_shared<TorusGrid<double>>(1, kPi, 32);
  SUBCASE("zero potential reduces the adjoint to the negated derivative") {
    const auto pot = zero_potential(*grid);
    std::mt19937_64 rng(3);
    const VectorX<double> u = random_field(rng, 32);
    const VectorX<double> diff =
        adjoint_derivative(u, *grid, pot, 0) + spectral_derivative(u, *grid, 0);
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("adjoint identity holds to rounding for the cosine potential") {
    const auto pot = cosine_potential(*grid, 1.0);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 25; ++trial) {
      const VectorX<double> u = random_field(rng, 32), w = random_field(rng, 32);
      const double lhs = inner_eta(spectral_derivative(u, *grid, 0), w, *grid, pot);
      const double rhs = inner_eta(u, adjoint_derivative(w, *grid, pot, 0), *grid, pot);
      CHECK(std::abs(lhs - rhs) <=
            1e-12 * norm_eta(u, *grid, pot) * norm_eta(w, *grid, pot) * grid->max_wavenumber());
    }
  }
  SUBCASE("cosine potential gradient is consistent with spectral differentiation") {
    const auto pot = cosine_potential(*grid, 0.8);
    const VectorX<double> du = spectral_derivative(pot.u, *grid, 0);
    CHECK((du - pot.grad_u.col(0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((pot.eta.array() > 0).all());
    CHECK(pot.max_grad_norm == doctest::Approx(0.8).epsilon(1e-12));
  }
  SUBCASE("mismatched field sizes are rejected") {
    const auto pot = zero_potential(*grid);
    const VectorX<double> u = VectorX<double>::Zero(16);
    const VectorX<double> w = VectorX<double>::Zero(32);
    CHECK_THROWS_AS(inner_eta(u, w, *grid, pot), ConfigError);
  }
}
