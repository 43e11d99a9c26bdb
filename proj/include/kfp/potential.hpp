#pragma once

#include "kfp/torus_grid.hpp"
#include "kfp/types.hpp"

namespace kfp {

/// Confining potential sampled on a grid: values, analytic gradient, and the
/// Gibbs weight eta = exp(-U) together with its reciprocal.
template <typename Scalar>
struct PotentialField {
  VectorX<Scalar> u;        // total_nodes
  MatrixX<Scalar> grad_u;   // total_nodes x d
  VectorX<Scalar> eta;      // exp(-U)
  VectorX<Scalar> inv_eta;  // exp(+U)
  Scalar max_grad_norm = 0;

  void finalize() {
    eta = (-u.array()).exp();
    inv_eta = u.array().exp();
    if (!eta.allFinite() || !inv_eta.allFinite())
      throw NumericalError("Gibbs weight exp(-U) is not finite on the grid");
    max_grad_norm = grad_u.rowwise().norm().maxCoeff();
  }
};

/// Samples a potential from callables for U and its gradient.
template <typename Scalar, typename ValueFn, typename GradFn>
PotentialField<Scalar> make_potential_field(const TorusGrid<Scalar>& grid, ValueFn&& value,
                                            GradFn&& gradient) {
  PotentialField<Scalar> pot;
  pot.u.resize(grid.total_nodes());
  pot.grad_u.resize(grid.total_nodes(), grid.dimension());
  for (Index j = 0; j < grid.total_nodes(); ++j) {
    const VectorX<Scalar> x = grid.coords(j);
    pot.u[j] = value(x);
    pot.grad_u.row(j) = gradient(x).transpose();
  }
  pot.finalize();
  return pot;
}

template <typename Scalar>
PotentialField<Scalar> zero_potential(const TorusGrid<Scalar>& grid) {
  PotentialField<Scalar> pot;
  pot.u = VectorX<Scalar>::Zero(grid.total_nodes());
  pot.grad_u = MatrixX<Scalar>::Zero(grid.total_nodes(), grid.dimension());
  pot.finalize();
  return pot;
}

/// U(x) = amplitude * cos(x_1) * ... * cos(x_d).
template <typename Scalar>
PotentialField<Scalar> cosine_potential(const TorusGrid<Scalar>& grid, Scalar amplitude) {
  return make_potential_field(
      grid,
      [amplitude](const VectorX<Scalar>& x) { return amplitude * x.array().cos().prod(); },
      [amplitude](const VectorX<Scalar>& x) {
        VectorX<Scalar> g(x.size());
        for (Index i = 0; i < x.size(); ++i) {
          Scalar v = -amplitude * std::sin(x[i]);
          for (Index j = 0; j < x.size(); ++j)
            if (j != i) v *= std::cos(x[j]);
          g[i] = v;
        }
        return g;
      });
}

/// Inner product h^d sum_j eta_j u_j w_j of nodal fields in L^2(eta dx).
template <typename Scalar>
Scalar inner_eta(const VectorX<Scalar>& u, const VectorX<Scalar>& w, const TorusGrid<Scalar>& grid,
                 const PotentialField<Scalar>& pot) {
  if (u.size() != grid.total_nodes() || w.size() != grid.total_nodes())
    throw ConfigError("inner_eta: field size does not match the grid");
  return grid.cell_volume() * (u.array() * w.array() * pot.eta.array()).sum();
}

template <typename Scalar>
Scalar norm_eta(const VectorX<Scalar>& u, const TorusGrid<Scalar>& grid,
                const PotentialField<Scalar>& pot) {
  return std::sqrt(inner_eta(u, u, grid, pot));
}

/// Formal adjoint of the derivative in L^2(eta dx), realized in conjugated
/// form -e^{U} D(e^{-U} field) so that (D u, w)_eta = (u, D* w)_eta holds to
/// rounding for the discrete operator.
template <typename Scalar>
VectorX<Scalar> adjoint_derivative(const VectorX<Scalar>& field, const TorusGrid<Scalar>& grid,
                                   const PotentialField<Scalar>& pot, int dim) {
  const VectorX<Scalar> damped = field.array() * pot.eta.array();
  return -(grid.apply_derivative(damped, dim).array() * pot.inv_eta.array()).matrix();
}

}  // namespace kfp
