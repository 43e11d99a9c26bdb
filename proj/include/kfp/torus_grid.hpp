#pragma once

#include "kfp/types.hpp"

#include <cmath>
#include <string>

namespace kfp {

/// Uniform periodic grid on [-R, R)^d, N points per dimension, dimension 0
/// fastest in the flattened node index. The first-derivative operator is the
/// Fourier-collocation (band-limited interpolation) derivative with the
/// Nyquist mode's derivative zeroed; stored as a circulant matrix that is
/// exactly antisymmetric by construction.
template <typename Scalar>
class TorusGrid {
 public:
  TorusGrid(int dimension, Scalar half_period, int points_per_dim)
      : d_(dimension), half_period_(half_period), n_(points_per_dim) {
    if (d_ < 1 || d_ > 3)
      throw ConfigError("grid dimension must be 1, 2, or 3, got " + std::to_string(d_));
    if (!(half_period_ > Scalar(0))) throw ConfigError("grid half period must be positive");
    if (n_ < 4 || (n_ & (n_ - 1)) != 0)
      throw ConfigError("grid points per dimension must be a power of two >= 4, got " +
                        std::to_string(n_));
    total_ = 1;
    for (int i = 0; i < d_; ++i) total_ *= n_;

    // Circulant table t[k] = D_{i,i-k}; antisymmetry t[N-k] = -t[k] is enforced
    // exactly, including the zero Nyquist entry.
    VectorX<Scalar> table = VectorX<Scalar>::Zero(n_);
    const Scalar scale = kPi / (Scalar(2) * half_period_);
    for (int k = 1; k < n_ / 2; ++k) {
      const Scalar angle = kPi * Scalar(k) / Scalar(n_);
      Scalar entry = scale * std::cos(angle) / std::sin(angle);
      if (k % 2 == 1) entry = -entry;
      table[k] = entry;
      table[n_ - k] = -entry;
    }
    deriv_ = MatrixX<Scalar>(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) deriv_(i, j) = table[((i - j) % n_ + n_) % n_];
  }

  int dimension() const { return d_; }
  Scalar half_period() const { return half_period_; }
  int points_per_dim() const { return n_; }
  Index total_nodes() const { return total_; }
  Scalar spacing() const { return Scalar(2) * half_period_ / Scalar(n_); }
  /// Quadrature weight of one node for integrals over the box, h^d.
  Scalar cell_volume() const { return std::pow(spacing(), d_); }
  /// Largest resolved wavenumber pi N / (2R).
  Scalar max_wavenumber() const { return kPi * Scalar(n_) / (Scalar(2) * half_period_); }

  Scalar node_1d(int j) const { return -half_period_ + Scalar(j) * spacing(); }

  VectorX<Scalar> coords(Index node) const {
    VectorX<Scalar> x(d_);
    for (int i = 0; i < d_; ++i) {
      x[i] = node_1d(static_cast<int>(node % n_));
      node /= n_;
    }
    return x;
  }

  const MatrixX<Scalar>& derivative_matrix() const { return deriv_; }

  /// Applies the derivative along `dim` to every column of a
  /// (total_nodes x fields) matrix.
  MatrixX<Scalar> apply_derivative(const MatrixX<Scalar>& fields, int dim) const {
    check_fields(fields, dim);
    if (d_ == 1) return deriv_ * fields;
    MatrixX<Scalar> out(fields.rows(), fields.cols());
    if (d_ == 2) {
      for (Index c = 0; c < fields.cols(); ++c) {
        Eigen::Map<const MatrixX<Scalar>> in(fields.col(c).data(), n_, n_);
        Eigen::Map<MatrixX<Scalar>> res(out.col(c).data(), n_, n_);
        if (dim == 0)
          res.noalias() = deriv_ * in;
        else
          res.noalias() = in * deriv_.transpose();
      }
      return out;
    }
    const Index stride = (dim == 0) ? 1 : (dim == 1 ? n_ : Index(n_) * n_);
    const Index block = stride * n_;
    VectorX<Scalar> line(n_);
    for (Index c = 0; c < fields.cols(); ++c) {
      const Scalar* in = fields.col(c).data();
      Scalar* res = out.col(c).data();
      for (Index base = 0; base < total_; base += block)
        for (Index inner = 0; inner < stride; ++inner) {
          Eigen::Map<const VectorX<Scalar>, 0, Eigen::InnerStride<>> xline(
              in + base + inner, n_, Eigen::InnerStride<>(stride));
          line.noalias() = deriv_ * xline;
          Eigen::Map<VectorX<Scalar>, 0, Eigen::InnerStride<>>(res + base + inner, n_,
                                                               Eigen::InnerStride<>(stride)) = line;
        }
    }
    return out;
  }

  /// Band-limited interpolation weights for one coordinate: field values at
  /// the N nodes of a dimension dotted with this vector give the interpolant
  /// at x. Consistent with the derivative matrix (its derivative at nodes is
  /// exactly that matrix).
  VectorX<Scalar> interpolation_weights_1d(Scalar x) const {
    VectorX<Scalar> w(n_);
    for (int j = 0; j < n_; ++j) {
      const Scalar theta = kPi * (x - node_1d(j)) / half_period_;
      const Scalar s = std::sin(theta / Scalar(2));
      if (std::abs(s) < Scalar(1e-14))
        w[j] = Scalar(1);
      else
        w[j] = std::sin(Scalar(n_) * theta / Scalar(2)) * std::cos(theta / Scalar(2)) /
               (Scalar(n_) * s);
    }
    return w;
  }

  /// Flattened tensor-product interpolation weights at a point x in the box.
  VectorX<Scalar> interpolation_weights(const VectorX<Scalar>& x) const {
    if (x.size() != d_) throw ConfigError("interpolation point has wrong dimension");
    VectorX<Scalar> w = interpolation_weights_1d(x[0]);
    for (int i = 1; i < d_; ++i) {
      const VectorX<Scalar> wi = interpolation_weights_1d(x[i]);
      VectorX<Scalar> next(w.size() * n_);
      for (int j = 0; j < n_; ++j) next.segment(j * w.size(), w.size()) = wi[j] * w;
      w.swap(next);
    }
    return w;
  }

  bool same_grid(const TorusGrid& other) const {
    return d_ == other.d_ && n_ == other.n_ && half_period_ == other.half_period_;
  }

 private:
  void check_fields(const MatrixX<Scalar>& fields, int dim) const {
    if (dim < 0 || dim >= d_) throw ConfigError("derivative dimension out of range");
    if (fields.rows() != total_)
      throw ConfigError("field has " + std::to_string(fields.rows()) + " rows, grid has " +
                        std::to_string(total_) + " nodes");
  }

  int d_;
  Scalar half_period_;
  int n_;
  Index total_;
  MatrixX<Scalar> deriv_;
};

/// Derivative of a single nodal field along one dimension.
template <typename Scalar>
VectorX<Scalar> spectral_derivative(const VectorX<Scalar>& field, const TorusGrid<Scalar>& grid,
                                    int dim) {
  return grid.apply_derivative(field, dim);
}

}  // namespace kfp
