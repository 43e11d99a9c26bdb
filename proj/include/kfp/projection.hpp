#pragma once

#include "kfp/hermite.hpp"
#include "kfp/hierarchy.hpp"
#include "kfp/multi_index.hpp"
#include "kfp/torus_grid.hpp"
#include "kfp/types.hpp"

#include <functional>
#include <sstream>
#include <vector>

namespace kfp {

/// Continuous problem data: initial datum g(x, v) and optional forcing
/// f(t, x, v); a default-constructed forcing means zero.
template <typename Scalar>
struct ProblemData {
  std::function<Scalar(const VectorX<Scalar>&, const VectorX<Scalar>&)> initial;
  std::function<Scalar(Scalar, const VectorX<Scalar>&, const VectorX<Scalar>&)> forcing;
};

/// Tensor Gauss-Hermite quadrature in velocity: flattened nodes (rows of a
/// q^d x d matrix), weights, and the table of basis function values
/// Psi_alpha(v_k) for every enumerated alpha.
template <typename Scalar>
struct VelocityQuadrature {
  MatrixX<Scalar> nodes;    // q^d x d
  VectorX<Scalar> weights;  // q^d
  MatrixX<Scalar> psi;      // q^d x basis size
};

template <typename Scalar>
VelocityQuadrature<Scalar> velocity_quadrature(const BasisIndexer& indexer, int quad_points) {
  const int d = indexer.dimension();
  const auto rule = gauss_hermite<Scalar>(quad_points);
  MatrixX<Scalar> table(quad_points, indexer.max_degree() + 1);
  for (int k = 0; k < quad_points; ++k)
    table.row(k) = hermite_values<Scalar>(indexer.max_degree(), rule.nodes[k]).transpose();

  Index total = 1;
  for (int i = 0; i < d; ++i) total *= quad_points;
  VelocityQuadrature<Scalar> quad;
  quad.nodes.resize(total, d);
  quad.weights.resize(total);
  quad.psi.resize(total, indexer.size());
  for (Index k = 0; k < total; ++k) {
    Index rest = k;
    Scalar w = Scalar(1);
    for (int i = 0; i < d; ++i) {
      const int digit = static_cast<int>(rest % quad_points);
      rest /= quad_points;
      quad.nodes(k, i) = rule.nodes[digit];
      w *= rule.weights[digit];
    }
    quad.weights[k] = w;
    for (Index a = 0; a < indexer.size(); ++a) {
      const MultiIndex& alpha = indexer.order(a);
      Scalar p = Scalar(1);
      Index rest2 = k;
      for (int i = 0; i < d; ++i) {
        p *= table(static_cast<int>(rest2 % quad_points), alpha[static_cast<std::size_t>(i)]);
        rest2 /= quad_points;
      }
      quad.psi(k, a) = p;
    }
  }
  return quad;
}

/// Projects a phase-space function onto the Hermite basis at every grid node:
/// column a of the result holds the field x -> (fn(x, .), Psi_alpha_a)_mu.
/// Non-finite samples abort with a diagnostic naming the node.
template <typename Scalar, typename F>
MatrixX<Scalar> project_function(const TorusGrid<Scalar>& grid, const BasisIndexer& indexer,
                                 const VelocityQuadrature<Scalar>& quad, F&& fn) {
  if (grid.dimension() != indexer.dimension())
    throw ConfigError("grid and basis dimension mismatch in projection");
  MatrixX<Scalar> coeffs(grid.total_nodes(), indexer.size());
  VectorX<Scalar> samples(quad.weights.size());
  for (Index j = 0; j < grid.total_nodes(); ++j) {
    const VectorX<Scalar> x = grid.coords(j);
    for (Index k = 0; k < quad.weights.size(); ++k) {
      const Scalar value = fn(x, VectorX<Scalar>(quad.nodes.row(k).transpose()));
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "projection sample is not finite at grid node " << j << " (x =";
        for (Index i = 0; i < x.size(); ++i) msg << " " << x[i];
        msg << ", v =";
        for (Index i = 0; i < quad.nodes.cols(); ++i) msg << " " << quad.nodes(k, i);
        msg << ")";
        throw NumericalError(msg.str());
      }
      samples[k] = value * quad.weights[k];
    }
    coeffs.row(j) = samples.transpose() * quad.psi;
  }
  return coeffs;
}

template <typename Scalar>
MatrixX<Scalar> project_initial_data(const TorusGrid<Scalar>& grid, const BasisIndexer& indexer,
                                     const VelocityQuadrature<Scalar>& quad,
                                     const ProblemData<Scalar>& data) {
  if (!data.initial) throw ConfigError("problem data has no initial datum");
  return project_function(grid, indexer, quad, data.initial);
}

template <typename Scalar>
MatrixX<Scalar> project_forcing(const TorusGrid<Scalar>& grid, const BasisIndexer& indexer,
                                const VelocityQuadrature<Scalar>& quad,
                                const ProblemData<Scalar>& data, Scalar t) {
  if (!data.forcing) return MatrixX<Scalar>::Zero(grid.total_nodes(), indexer.size());
  return project_function(grid, indexer, quad,
                          [&](const VectorX<Scalar>& x, const VectorX<Scalar>& v) {
                            return data.forcing(t, x, v);
                          });
}

/// Evaluates a coefficient-field expansion at one phase-space point via
/// band-limited interpolation in x and the basis values in v.
template <typename Scalar>
Scalar reconstruct(const MatrixX<Scalar>& coeffs, const std::vector<MultiIndex>& alphas,
                   const TorusGrid<Scalar>& grid, const VectorX<Scalar>& x,
                   const VectorX<Scalar>& v) {
  if (coeffs.cols() != static_cast<Index>(alphas.size()))
    throw ConfigError("coefficient count does not match the index list");
  const VectorX<Scalar> w = grid.interpolation_weights(x);
  const RowVectorX<Scalar> at_x = w.transpose() * coeffs;
  int max_deg = 0;
  for (const auto& alpha : alphas) max_deg = std::max(max_deg, degree(alpha));
  MatrixX<Scalar> table(v.size(), max_deg + 1);
  for (Index i = 0; i < v.size(); ++i)
    table.row(i) = hermite_values<Scalar>(max_deg, v[i]).transpose();
  Scalar sum = Scalar(0);
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    Scalar p = Scalar(1);
    for (Index i = 0; i < v.size(); ++i) p *= table(i, alphas[a][static_cast<std::size_t>(i)]);
    sum += at_x[static_cast<Index>(a)] * p;
  }
  return sum;
}

template <typename Scalar>
Scalar reconstruct(const MatrixX<Scalar>& coeffs, const BasisIndexer& indexer,
                   const TorusGrid<Scalar>& grid, const VectorX<Scalar>& x,
                   const VectorX<Scalar>& v) {
  std::vector<MultiIndex> alphas;
  alphas.reserve(static_cast<std::size_t>(indexer.size()));
  for (Index a = 0; a < indexer.size(); ++a) alphas.push_back(indexer.order(a));
  return reconstruct(coeffs, alphas, grid, x, v);
}

/// Velocity-Sobolev norm of a coefficient expansion:
///   sum_alpha (1 + |alpha|)^k |c^alpha|^2 under the spatial weight,
/// optionally with each |c^alpha|^2 replaced by |grad_x c^alpha|^2. The
/// exponent k may be fractional.
template <typename Scalar>
Scalar sobolev_norm_mu(const MatrixX<Scalar>& coeffs, const BasisIndexer& indexer,
                       const TransportOps<Scalar>& transport, Scalar k, bool grad_in_x = false) {
  RowVectorX<Scalar> norms_sq;
  if (grad_in_x) {
    norms_sq = RowVectorX<Scalar>::Zero(coeffs.cols());
    for (int i = 0; i < indexer.dimension(); ++i)
      norms_sq += transport.col_norms_sq(transport.forward(coeffs, i));
  } else {
    norms_sq = transport.col_norms_sq(coeffs);
  }
  Scalar sum = Scalar(0);
  for (Index a = 0; a < indexer.size(); ++a)
    sum += std::pow(Scalar(1) + Scalar(indexer.degree_of(a)), k) * norms_sq[a];
  return std::sqrt(sum);
}

}  // namespace kfp
