#pragma once

#include "kfp/integrator.hpp"
#include "kfp/projection.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace kfp {

/// Infinitely smooth cutoff profile: 1 on [0,1], strictly decreasing on
/// (1,2), 0 on [2,inf). Built as the standard quotient of one-sided
/// exponential bumps, which is C-infinity at both junctions (a plain
/// exp(1-1/(1-s^2)) glue is not even twice differentiable where it meets the
/// constant piece).
template <typename Scalar>
struct CutoffProfile {
  static Scalar side(Scalar s) { return s > Scalar(0) ? std::exp(-Scalar(1) / s) : Scalar(0); }
  static Scalar side_derivative(Scalar s) {
    return s > Scalar(0) ? std::exp(-Scalar(1) / s) / (s * s) : Scalar(0);
  }

  Scalar operator()(Scalar r) const {
    if (r <= Scalar(1)) return Scalar(1);
    if (r >= Scalar(2)) return Scalar(0);
    const Scalar p = side(Scalar(2) - r), q = side(r - Scalar(1));
    return p / (p + q);
  }

  Scalar derivative(Scalar r) const {
    if (r <= Scalar(1) || r >= Scalar(2)) return Scalar(0);
    const Scalar p = side(Scalar(2) - r), q = side(r - Scalar(1));
    const Scalar dp = -side_derivative(Scalar(2) - r), dq = side_derivative(r - Scalar(1));
    return (dp * q - p * dq) / ((p + q) * (p + q));
  }
};

/// Confining potential U(x) = a|x|^2 + P(x) with smooth, compactly supported
/// perturbation P. The core radius R0 = max(4 r_P, 1) fixes the comparison
/// window of the periodization sweep.
template <typename Scalar>
struct WholeSpacePotential {
  Scalar a = Scalar(0.5);
  std::function<Scalar(const VectorX<Scalar>&)> p;
  std::function<VectorX<Scalar>(const VectorX<Scalar>&)> p_grad;
  Scalar support_radius = Scalar(1);

  Scalar value(const VectorX<Scalar>& x) const {
    Scalar u = a * x.squaredNorm();
    if (p) u += p(x);
    return u;
  }
  VectorX<Scalar> gradient(const VectorX<Scalar>& x) const {
    VectorX<Scalar> g = 2 * a * x;
    if (p_grad) g += p_grad(x);
    return g;
  }
  Scalar core_radius() const { return std::max(4 * support_radius, Scalar(1)); }
};

/// a|x|^2 plus a mollifier-style bump height * exp(1 - 1/(1 - (|x|/radius)^2))
/// supported in |x| < radius.
template <typename Scalar>
WholeSpacePotential<Scalar> quadratic_bump_potential(Scalar a, Scalar height, Scalar radius) {
  if (!(a > Scalar(0))) throw ConfigError("quadratic coefficient must be positive");
  if (!(radius > Scalar(0))) throw ConfigError("bump radius must be positive");
  WholeSpacePotential<Scalar> wsp;
  wsp.a = a;
  wsp.support_radius = radius;
  wsp.p = [height, radius](const VectorX<Scalar>& x) {
    const Scalar t2 = x.squaredNorm() / (radius * radius);
    if (t2 >= Scalar(1)) return Scalar(0);
    return height * std::exp(Scalar(1) - Scalar(1) / (Scalar(1) - t2));
  };
  wsp.p_grad = [height, radius](const VectorX<Scalar>& x) {
    const Scalar t2 = x.squaredNorm() / (radius * radius);
    if (t2 >= Scalar(1)) return VectorX<Scalar>::Zero(x.size()).eval();
    const Scalar one_minus = Scalar(1) - t2;
    const Scalar val = height * std::exp(Scalar(1) - Scalar(1) / one_minus);
    // d/dx_i of -1/(1-t2) is -2 x_i / (radius^2 (1-t2)^2)
    return (val * (-Scalar(2) / (radius * radius * one_minus * one_minus)) * x).eval();
  };
  return wsp;
}

/// Spot check that P really vanishes outside its stated support radius.
template <typename Scalar>
void validate_support(const WholeSpacePotential<Scalar>& wsp, int dimension) {
  if (!wsp.p) return;
  for (int i = 0; i < dimension; ++i) {
    for (const Scalar scale : {Scalar(1.001), Scalar(1.5), Scalar(4)}) {
      VectorX<Scalar> x = VectorX<Scalar>::Zero(dimension);
      x[i] = wsp.support_radius * scale;
      if (std::abs(wsp.p(x)) > Scalar(0))
        throw ConfigError("perturbation does not vanish outside its support radius");
    }
  }
}

/// The periodized potential U_R = U * phi_R sampled on the torus Q_R, with
/// phi_R(x) = chi(2|x|/R): identically U on |x| <= R/2, identically 0 for
/// |x| >= R, extended 2R-periodically by the sampling itself.
template <typename Scalar>
PotentialField<Scalar> build_periodized_potential(const WholeSpacePotential<Scalar>& wsp,
                                                  Scalar R, const TorusGrid<Scalar>& grid) {
  if (R < wsp.core_radius())
    throw ConfigError("periodization radius must be at least the core radius");
  if (std::abs(grid.half_period() - R) > Scalar(1e-12) * R)
    throw ConfigError("grid half-period must equal the periodization radius");
  validate_support(wsp, grid.dimension());
  const CutoffProfile<Scalar> chi;
  const auto value = [&](const VectorX<Scalar>& x) {
    return wsp.value(x) * chi(2 * x.norm() / R);
  };
  const auto gradient = [&](const VectorX<Scalar>& x) {
    const Scalar r = x.norm();
    const Scalar phi = chi(2 * r / R);
    VectorX<Scalar> g = phi * wsp.gradient(x);
    if (r > Scalar(0)) {
      const Scalar dphi = chi.derivative(2 * r / R) * 2 / R;
      g += (wsp.value(x) * dphi / r) * x;
    }
    return g;
  };
  return make_potential_field<Scalar>(grid, value, gradient);
}

/// Spectral bounds on the periodized potentials across a radius sweep:
/// second- and third-derivative maxima (these must stay of one size for the
/// periodization to be uniform) and the relative gradient defect outside the
/// core ball.
template <typename Scalar>
struct PotentialBoundsReport {
  std::vector<Scalar> r_values;
  std::vector<Scalar> max_hessian;             // max |D_i D_j U_R| over nodes
  std::vector<Scalar> max_third;               // max |D_i D_j D_k U_R|
  std::vector<Scalar> max_grad_defect_ratio;   // |grad(U - U_R)| / |grad U| outside B_R0
  bool hessian_uniform = true;                 // consecutive variation below 50%
};

template <typename Scalar>
PotentialBoundsReport<Scalar> check_potential_bounds(const WholeSpacePotential<Scalar>& wsp,
                                                     const std::vector<Scalar>& r_values,
                                                     int base_points, int dimension) {
  PotentialBoundsReport<Scalar> report;
  const Scalar r0 = wsp.core_radius();
  for (const Scalar R : r_values) {
    const int n = static_cast<int>(std::lround(Scalar(base_points) * R / r0));
    const TorusGrid<Scalar> grid(dimension, R, n);
    const PotentialField<Scalar> field = build_periodized_potential(wsp, R, grid);

    Scalar h_max = 0, t_max = 0, ratio_max = 0;
    MatrixX<Scalar> u_col(grid.total_nodes(), 1);
    u_col.col(0) = field.u;
    for (int i = 0; i < dimension; ++i) {
      const MatrixX<Scalar> di = grid.apply_derivative(u_col, i);
      for (int j = i; j < dimension; ++j) {
        const MatrixX<Scalar> dij = grid.apply_derivative(di, j);
        h_max = std::max(h_max, dij.cwiseAbs().maxCoeff());
        for (int k = j; k < dimension; ++k)
          t_max = std::max(
              t_max, grid.apply_derivative(dij, k).cwiseAbs().maxCoeff());
      }
    }
    for (Index node = 0; node < grid.total_nodes(); ++node) {
      const VectorX<Scalar> x = grid.coords(node);
      if (x.norm() <= r0) continue;
      const VectorX<Scalar> g = wsp.gradient(x);
      const Scalar defect = (g - field.grad_u.row(node).transpose()).norm();
      if (g.norm() > Scalar(0)) ratio_max = std::max(ratio_max, defect / g.norm());
    }
    report.r_values.push_back(R);
    report.max_hessian.push_back(h_max);
    report.max_third.push_back(t_max);
    report.max_grad_defect_ratio.push_back(ratio_max);
  }
  for (std::size_t i = 0; i + 1 < report.max_hessian.size(); ++i) {
    const Scalar lo = std::min(report.max_hessian[i], report.max_hessian[i + 1]);
    const Scalar hi = std::max(report.max_hessian[i], report.max_hessian[i + 1]);
    if (hi > lo * Scalar(1.5)) report.hessian_uniform = false;
  }
  return report;
}

/// Periodization sweep: solve the same problem on Q_R for each R (the grid
/// spacing is held fixed, so N scales with R), track the uniform norm bound
/// quantity, and compare solutions on the fixed core window Q_{R0} through a
/// shared evaluation lattice under the R-independent weight e^{-U}.
template <typename Scalar>
struct SweepConfig {
  std::vector<Scalar> r_values;
  int dimension = 1;
  int base_points = 32;   // grid points per dimension at R = R0
  int max_degree = 4;
  int quad_points = 0;    // velocity quadrature order; 0 picks max_degree + 8
};

template <typename Scalar>
struct SweepReport {
  std::vector<Scalar> r_values;
  std::vector<int> grid_points;
  std::vector<Scalar> tracked_norm;  // max over logged times of the bound quantity
  MatrixX<Scalar> pairwise;          // window distances between runs
  Scalar core_radius = 0;
  std::string cutoff_convention;

  std::vector<Scalar> consecutive_differences() const {
    std::vector<Scalar> out;
    for (Index i = 0; i + 1 < pairwise.rows(); ++i) out.push_back(pairwise(i, i + 1));
    return out;
  }
};

namespace detail {

template <typename Scalar>
bool is_power_of_two(Scalar x) {
  const int n = static_cast<int>(std::lround(x));
  return std::abs(x - Scalar(n)) < Scalar(1e-9) && n >= 4 && (n & (n - 1)) == 0;
}

/// Nodal values of the initial datum must vanish off the core window.
template <typename Scalar>
void check_data_support(const ProblemData<Scalar>& data, const TorusGrid<Scalar>& grid,
                        Scalar r0) {
  VectorX<Scalar> v_zero = VectorX<Scalar>::Zero(grid.dimension());
  VectorX<Scalar> v_probe = VectorX<Scalar>::Constant(grid.dimension(), Scalar(1.3));
  for (Index node = 0; node < grid.total_nodes(); ++node) {
    const VectorX<Scalar> x = grid.coords(node);
    if (x.template lpNorm<Eigen::Infinity>() <= r0) continue;
    for (const auto* v : {&v_zero, &v_probe}) {
      if (std::abs(data.initial(x, *v)) > Scalar(0))
        throw ConfigError("initial data must be supported in the core window");
      if (data.forcing && std::abs(data.forcing(Scalar(0), x, *v)) > Scalar(0))
        throw ConfigError("forcing must be supported in the core window");
    }
  }
}

}  // namespace detail

template <typename Scalar>
SweepReport<Scalar> r_sweep(const WholeSpacePotential<Scalar>& wsp,
                            const ProblemData<Scalar>& data, const SolverConfig<Scalar>& cfg,
                            const SweepConfig<Scalar>& sweep) {
  if (sweep.r_values.empty()) throw ConfigError("need at least one radius");
  if (!std::is_sorted(sweep.r_values.begin(), sweep.r_values.end()) ||
      std::adjacent_find(sweep.r_values.begin(), sweep.r_values.end()) != sweep.r_values.end())
    throw ConfigError("radii must be strictly increasing");
  if (!data.initial) throw ConfigError("problem data has no initial datum");
  const Scalar r0 = wsp.core_radius();
  const int dim = sweep.dimension;
  const BasisIndexer indexer(dim, sweep.max_degree);
  const int q = sweep.quad_points > 0 ? sweep.quad_points : sweep.max_degree + 8;

  SweepReport<Scalar> report;
  report.core_radius = r0;
  report.cutoff_convention =
      "phi_R(x) = chi(2|x|/R): transition annulus R/2 <= |x| <= R inside the cell; "
      "the alternative scaling chi(|x|/(2R)) would push the transition to 2R <= |x| <= 4R, "
      "outside the fundamental cell, so the stated support facts fix the first form";

  // shared evaluation lattice: the R0 grid, weighted by the R-independent
  // Gibbs density of the original potential
  const TorusGrid<Scalar> lattice(dim, r0, sweep.base_points);
  VectorX<Scalar> lattice_weight(lattice.total_nodes());
  for (Index i = 0; i < lattice.total_nodes(); ++i)
    lattice_weight[i] = std::exp(-wsp.value(lattice.coords(i)));

  std::vector<std::vector<MatrixX<Scalar>>> window;  // per run, per logged time
  std::vector<Scalar> times;
  for (const Scalar R : sweep.r_values) {
    const Scalar n_real = Scalar(sweep.base_points) * R / r0;
    if (!detail::is_power_of_two(n_real))
      throw ConfigError("fixed spacing requires the point count " + std::to_string(n_real) +
                        " at R = " + std::to_string(R) + " to be a power of two");
    const int n = static_cast<int>(std::lround(n_real));
    auto grid = std::make_shared<const TorusGrid<Scalar>>(dim, R, n);
    auto pot = std::make_shared<const PotentialField<Scalar>>(
        build_periodized_potential(wsp, R, *grid));
    detail::check_data_support(data, *grid, r0);
    const auto transport = TransportOps<Scalar>::make_symmetrized(grid, pot);
    HierarchySystem<Scalar> system(indexer, transport, cfg.epsilon);
    const Trajectory<Scalar> traj = solve(system, data, q, cfg);

    Scalar tracked = 0;
    for (const auto& state : traj.states) {
      const Scalar plain = sobolev_norm_mu(state, indexer, transport, Scalar(4), false);
      const Scalar grad = sobolev_norm_mu(state, indexer, transport, Scalar(2), true);
      tracked = std::max(tracked, plain * plain + grad * grad);
    }

    MatrixX<Scalar> restrict_to(lattice.total_nodes(), grid->total_nodes());
    for (Index i = 0; i < lattice.total_nodes(); ++i)
      restrict_to.row(i) = grid->interpolation_weights(lattice.coords(i)).transpose();
    std::vector<MatrixX<Scalar>> snapshots;
    snapshots.reserve(traj.states.size());
    for (const auto& state : traj.states) snapshots.push_back(restrict_to * transport.decode(state));

    if (times.empty()) {
      times = traj.times;
    } else if (times.size() != traj.times.size()) {
      throw NumericalError("sweep runs logged different time sets");
    }
    report.r_values.push_back(R);
    report.grid_points.push_back(n);
    report.tracked_norm.push_back(tracked);
    window.push_back(std::move(snapshots));
  }

  const std::vector<Scalar> weights = detail::trapezoid_weights(times);
  const Scalar cell = lattice.cell_volume();
  const auto runs = static_cast<Index>(window.size());
  report.pairwise = MatrixX<Scalar>::Zero(runs, runs);
  for (Index i = 0; i < runs; ++i)
    for (Index j = i + 1; j < runs; ++j) {
      Scalar dist_sq = 0;
      for (std::size_t t = 0; t < times.size(); ++t) {
        const MatrixX<Scalar> diff =
            window[static_cast<std::size_t>(i)][t] - window[static_cast<std::size_t>(j)][t];
        dist_sq += weights[t] * cell *
                   (diff.array().square().colwise() * lattice_weight.array()).sum();
      }
      report.pairwise(i, j) = report.pairwise(j, i) = std::sqrt(dist_sq);
    }
  return report;
}

}  // namespace kfp
