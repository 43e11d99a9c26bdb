#pragma once

#include "kfp/multi_index.hpp"
#include "kfp/potential.hpp"
#include "kfp/torus_grid.hpp"
#include "kfp/types.hpp"

#include <memory>
#include <vector>

namespace kfp {

/// Ladder matrices of the truncated velocity-moment hierarchy in the graded
/// basis order: A = diag(|alpha^j|) and, per spatial dimension i, the strictly
/// upper triangular B_i with entry sqrt(alpha^l_i) at (j, l), alpha^l =
/// alpha^j + e_i. B_i is stored as its nonzero links.
template <typename Scalar>
struct LadderOperators {
  struct Link {
    Index j;   // row (lower degree)
    Index l;   // column (raised degree)
    Scalar w;  // sqrt(alpha^j_i + 1)
  };
  VectorX<Scalar> a_diag;
  std::vector<std::vector<Link>> links;  // one list per dimension
};

template <typename Scalar>
LadderOperators<Scalar> assemble_ladder(const BasisIndexer& indexer) {
  LadderOperators<Scalar> ops;
  ops.a_diag.resize(indexer.size());
  for (Index j = 0; j < indexer.size(); ++j) ops.a_diag[j] = Scalar(indexer.degree_of(j));
  ops.links.resize(static_cast<std::size_t>(indexer.dimension()));
  for (int i = 0; i < indexer.dimension(); ++i)
    for (Index j = 0; j < indexer.size(); ++j)
      if (const auto l = indexer.raise_index(j, i)) {
        const Scalar w = std::sqrt(Scalar(indexer.order(j)[static_cast<std::size_t>(i)] + 1));
        ops.links[static_cast<std::size_t>(i)].push_back({j, *l, w});
      }
  return ops;
}

/// A first-derivative operator pair that are exact discrete adjoints of each
/// other with respect to a nodal weight, plus that weight. Two realizations:
///
///  - conjugated: forward is the plain spectral derivative, the adjoint is
///    -e^{U} D(e^{-U} .), and the weight is the Gibbs density eta. This is
///    the natural form on a torus with a bounded potential.
///  - symmetrized: the state carries a factor e^{-U/2}, the operators are
///    D +/- diag(grad U / 2), and the weight is 1. Algebraically the same
///    system; used for strongly confining potentials where e^{U} factors
///    would amplify rounding catastrophically.
template <typename Scalar>
class TransportOps {
 public:
  enum class Form { conjugated, symmetrized };

  static TransportOps make_conjugated(std::shared_ptr<const TorusGrid<Scalar>> grid,
                                      std::shared_ptr<const PotentialField<Scalar>> pot) {
    TransportOps ops(Form::conjugated, std::move(grid), std::move(pot));
    ops.weight_ = ops.pot_->eta;
    return ops;
  }

  static TransportOps make_symmetrized(std::shared_ptr<const TorusGrid<Scalar>> grid,
                                       std::shared_ptr<const PotentialField<Scalar>> pot) {
    TransportOps ops(Form::symmetrized, std::move(grid), std::move(pot));
    ops.weight_ = VectorX<Scalar>::Ones(ops.grid_->total_nodes());
    ops.half_grad_ = ops.pot_->grad_u / Scalar(2);
    ops.sqrt_eta_ = (-ops.pot_->u.array() / Scalar(2)).exp();
    return ops;
  }

  Form form() const { return form_; }
  const TorusGrid<Scalar>& grid() const { return *grid_; }
  const PotentialField<Scalar>& potential() const { return *pot_; }
  std::shared_ptr<const TorusGrid<Scalar>> grid_ptr() const { return grid_; }
  std::shared_ptr<const PotentialField<Scalar>> potential_ptr() const { return pot_; }
  const VectorX<Scalar>& weight() const { return weight_; }

  /// Representation of the spatial derivative acting on state columns.
  MatrixX<Scalar> forward(const MatrixX<Scalar>& fields, int dim) const {
    if (form_ == Form::conjugated) return grid_->apply_derivative(fields, dim);
    MatrixX<Scalar> out = grid_->apply_derivative(fields, dim);
    out.array() += fields.array().colwise() * half_grad_.col(dim).array();
    return out;
  }

  /// Exact discrete adjoint of forward() with respect to the weight.
  MatrixX<Scalar> adjoint(const MatrixX<Scalar>& fields, int dim) const {
    if (form_ == Form::conjugated) {
      const MatrixX<Scalar> damped = fields.array().colwise() * pot_->eta.array();
      MatrixX<Scalar> out = grid_->apply_derivative(damped, dim);
      out.array() = -(out.array().colwise() * pot_->inv_eta.array());
      return out;
    }
    MatrixX<Scalar> out = -grid_->apply_derivative(fields, dim);
    out.array() += fields.array().colwise() * half_grad_.col(dim).array();
    return out;
  }

  /// Weighted inner product summed over all field columns, including h^d.
  Scalar inner(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) const {
    return grid_->cell_volume() *
           ((a.array().colwise() * weight_.array()) * b.array()).sum();
  }

  /// Per-column weighted squared norms, including h^d.
  RowVectorX<Scalar> col_norms_sq(const MatrixX<Scalar>& a) const {
    return grid_->cell_volume() *
           (a.array().square().colwise() * weight_.array()).colwise().sum();
  }

  Scalar norm_sq(const MatrixX<Scalar>& a) const { return col_norms_sq(a).sum(); }

  /// Maps density-form coefficient fields to the solver state (identity for
  /// the conjugated form, multiplication by e^{-U/2} for the symmetrized one).
  MatrixX<Scalar> encode(const MatrixX<Scalar>& fields) const {
    if (form_ == Form::conjugated) return fields;
    return fields.array().colwise() * sqrt_eta_.array();
  }

  /// Inverse of encode().
  MatrixX<Scalar> decode(const MatrixX<Scalar>& fields) const {
    if (form_ == Form::conjugated) return fields;
    return fields.array().colwise() / sqrt_eta_.array();
  }

 private:
  TransportOps(Form form, std::shared_ptr<const TorusGrid<Scalar>> grid,
               std::shared_ptr<const PotentialField<Scalar>> pot)
      : form_(form), grid_(std::move(grid)), pot_(std::move(pot)) {
    if (!grid_ || !pot_) throw ConfigError("transport operators need a grid and a potential");
    if (pot_->u.size() != grid_->total_nodes())
      throw ConfigError("potential field does not match the grid");
  }

  Form form_;
  std::shared_ptr<const TorusGrid<Scalar>> grid_;
  std::shared_ptr<const PotentialField<Scalar>> pot_;
  VectorX<Scalar> weight_;
  MatrixX<Scalar> half_grad_;   // symmetrized only
  VectorX<Scalar> sqrt_eta_;    // symmetrized only
};

/// Applies H = A - sum_i B_i D*_i + sum_i B_i^T D_i to coefficient fields
/// stored as columns (grid-node major within a column).
template <typename Scalar>
MatrixX<Scalar> apply_hierarchy(const MatrixX<Scalar>& fields, const LadderOperators<Scalar>& ladder,
                                const TransportOps<Scalar>& transport) {
  MatrixX<Scalar> out = fields * ladder.a_diag.asDiagonal();
  for (std::size_t i = 0; i < ladder.links.size(); ++i) {
    const MatrixX<Scalar> adj = transport.adjoint(fields, static_cast<int>(i));
    const MatrixX<Scalar> fwd = transport.forward(fields, static_cast<int>(i));
    for (const auto& link : ladder.links[i]) {
      out.col(link.j) -= link.w * adj.col(link.l);
      out.col(link.l) += link.w * fwd.col(link.j);
    }
  }
  return out;
}

/// Coefficients of the truncation error term on the degree-(m+1) shell,
/// re-expanded in the basis: the component at beta (|beta| = m + 1) is
/// sum_i sqrt(beta_i) D_i c^{beta - e_i}. Cross terms between different
/// (alpha, i) pairs sharing one beta are preserved exactly.
template <typename Scalar>
struct ErrorTermCoeffs {
  std::vector<MultiIndex> betas;  // degree m + 1, graded-order shell
  MatrixX<Scalar> values;         // total_nodes x betas.size()
};

template <typename Scalar>
ErrorTermCoeffs<Scalar> error_term_coeffs(const MatrixX<Scalar>& fields,
                                          const BasisIndexer& indexer,
                                          const TransportOps<Scalar>& transport) {
  const int d = indexer.dimension();
  const int m = indexer.max_degree();
  const BasisIndexer extended(d, m + 1);
  ErrorTermCoeffs<Scalar> result;
  result.values =
      MatrixX<Scalar>::Zero(transport.grid().total_nodes(), extended.size() - indexer.size());
  std::vector<MatrixX<Scalar>> fwd(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) fwd[static_cast<std::size_t>(i)] = transport.forward(fields, i);
  for (Index b = indexer.size(); b < extended.size(); ++b) {
    const MultiIndex& beta = extended.order(b);
    result.betas.push_back(beta);
    for (int i = 0; i < d; ++i) {
      if (beta[static_cast<std::size_t>(i)] == 0) continue;
      MultiIndex alpha = beta;
      --alpha[static_cast<std::size_t>(i)];
      result.values.col(b - indexer.size()) +=
          std::sqrt(Scalar(beta[static_cast<std::size_t>(i)])) *
          fwd[static_cast<std::size_t>(i)].col(indexer.position(alpha));
    }
  }
  return result;
}

}  // namespace kfp
