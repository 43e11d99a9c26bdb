#pragma once

#include "kfp/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace kfp {

/// Normalized probabilists' Hermite functions psi_k = h_k / Z_k with
/// Z_k^2 = k! sqrt(2 pi), orthonormal in L^2(exp(-v^2/2) dv). Evaluation uses
/// the stable normalized three-term recurrence
///   psi_{k+1} = (v psi_k - sqrt(k) psi_{k-1}) / sqrt(k+1).
template <typename Scalar>
VectorX<Scalar> hermite_values(int max_degree, Scalar v) {
  if (max_degree < 0) throw ConfigError("hermite degree must be nonnegative");
  VectorX<Scalar> psi(max_degree + 1);
  psi[0] = Scalar(std::pow(2.0 * kPi, -0.25));
  if (max_degree == 0) return psi;
  psi[1] = v * psi[0];
  for (int k = 1; k < max_degree; ++k)
    psi[k + 1] = (v * psi[k] - std::sqrt(Scalar(k)) * psi[k - 1]) / std::sqrt(Scalar(k + 1));
  return psi;
}

template <typename Scalar>
Scalar hermite_value(int k, Scalar v) {
  return hermite_values<Scalar>(k, v)[k];
}

/// d/dv psi_k evaluated through the ladder identity
///   psi_k' = v psi_k - sqrt(k+1) psi_{k+1},
/// which is independent of the companion identity psi_k' = sqrt(k) psi_{k-1}
/// so the two can be checked against each other.
template <typename Scalar>
Scalar hermite_derivative(int k, Scalar v) {
  const VectorX<Scalar> psi = hermite_values<Scalar>(k + 1, v);
  return v * psi[k] - std::sqrt(Scalar(k + 1)) * psi[k + 1];
}

template <typename Scalar>
struct QuadratureRule {
  VectorX<Scalar> nodes;
  VectorX<Scalar> weights;  // sums to sqrt(2 pi), the mass of exp(-v^2/2) dv
};

/// Largest supported Gauss-Hermite order; beyond this the tridiagonal
/// eigensolve conditioning is not vouched for.
inline constexpr int kMaxQuadraturePoints = 512;

/// Gauss-Hermite rule for the weight exp(-v^2/2) dv via the Golub-Welsch
/// eigendecomposition of the Jacobi matrix of the probabilists' recurrence
/// (zero diagonal, off-diagonal sqrt(k)). Exact for polynomials of degree
/// <= 2q - 1. Nodes and weights are symmetrized about the origin.
template <typename Scalar>
QuadratureRule<Scalar> gauss_hermite(int q) {
  if (q < 1) throw ConfigError("quadrature order must be positive, got " + std::to_string(q));
  if (q > kMaxQuadraturePoints)
    throw ConfigError("quadrature order " + std::to_string(q) + " exceeds the supported cap " +
                      std::to_string(kMaxQuadraturePoints));
  const Scalar mass = std::sqrt(Scalar(2) * kPi);
  QuadratureRule<Scalar> rule;
  if (q == 1) {
    rule.nodes = VectorX<Scalar>::Zero(1);
    rule.weights = VectorX<Scalar>::Constant(1, mass);
    return rule;
  }
  MatrixX<Scalar> jacobi = MatrixX<Scalar>::Zero(q, q);
  for (int k = 1; k < q; ++k) {
    const Scalar b = std::sqrt(Scalar(k));
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(jacobi);
  if (solver.info() != Eigen::Success) throw NumericalError("quadrature eigensolve failed");
  rule.nodes = solver.eigenvalues();
  rule.weights = mass * solver.eigenvectors().row(0).transpose().array().square();
  for (int i = 0; i < q / 2; ++i) {
    const int j = q - 1 - i;
    const Scalar node = (rule.nodes[i] - rule.nodes[j]) / Scalar(2);
    rule.nodes[i] = node;
    rule.nodes[j] = -node;
    const Scalar weight = (rule.weights[i] + rule.weights[j]) / Scalar(2);
    rule.weights[i] = weight;
    rule.weights[j] = weight;
  }
  if (q % 2 == 1) rule.nodes[q / 2] = Scalar(0);
  return rule;
}

}  // namespace kfp
