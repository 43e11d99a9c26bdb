#pragma once

#include "kfp/hierarchy.hpp"
#include "kfp/projection.hpp"
#include "kfp/types.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <vector>

namespace kfp {

enum class TimeScheme {
  rk4_integrating_factor,  // exact integration of the diagonal decay
  rk4_plain,
};

template <typename Scalar>
struct SolverConfig {
  Scalar dt = Scalar(1e-3);
  Scalar horizon = Scalar(1);
  Scalar epsilon = Scalar(0);  // viscosity strength
  Scalar cfl_safety = Scalar(0.9);
  TimeScheme scheme = TimeScheme::rk4_integrating_factor;
  int log_every = 1;
};

/// Stability bound for the explicit scheme: advection at the largest resolved
/// wavenumber against the ladder amplitude and potential slope, the diagonal
/// decay, and the viscous scale.
template <typename Scalar>
Scalar cfl_bound(const TorusGrid<Scalar>& grid, const PotentialField<Scalar>& pot, int max_degree,
                 Scalar epsilon, Scalar cfl_safety) {
  if (!(cfl_safety > Scalar(0)) || cfl_safety > Scalar(1))
    throw ConfigError("cfl safety factor must lie in (0, 1]");
  const Scalar k_max = grid.max_wavenumber();
  const Scalar advection =
      k_max * std::sqrt(Scalar(max_degree + 1)) * (Scalar(1) + pot.max_grad_norm);
  return cfl_safety / (advection + Scalar(max_degree) + epsilon * k_max * k_max);
}

/// The truncated hierarchy as a first-order system
///   d/dt c = -(A + T) c - epsilon sum_i D*_i D_i c + f(t)
/// acting on state columns; T is the off-diagonal transport part of H.
template <typename Scalar>
struct HierarchySystem {
  BasisIndexer indexer;
  LadderOperators<Scalar> ladder;
  TransportOps<Scalar> transport;
  Scalar epsilon = Scalar(0);
  /// Forcing in state representation; empty means zero.
  std::function<MatrixX<Scalar>(Scalar)> forcing;

  HierarchySystem(const BasisIndexer& idx, TransportOps<Scalar> ops, Scalar eps = Scalar(0))
      : indexer(idx), ladder(assemble_ladder<Scalar>(idx)), transport(std::move(ops)),
        epsilon(eps) {
    if (indexer.dimension() != transport.grid().dimension())
      throw ConfigError("basis and grid dimensions differ");
  }

  /// Off-diagonal transport part (H - A) applied to the state.
  MatrixX<Scalar> apply_offdiagonal(const MatrixX<Scalar>& state) const {
    MatrixX<Scalar> out = MatrixX<Scalar>::Zero(state.rows(), state.cols());
    for (std::size_t i = 0; i < ladder.links.size(); ++i) {
      const MatrixX<Scalar> adj = transport.adjoint(state, static_cast<int>(i));
      const MatrixX<Scalar> fwd = transport.forward(state, static_cast<int>(i));
      for (const auto& link : ladder.links[i]) {
        out.col(link.j) -= link.w * adj.col(link.l);
        out.col(link.l) += link.w * fwd.col(link.j);
      }
    }
    return out;
  }

  MatrixX<Scalar> apply_viscosity(const MatrixX<Scalar>& state) const {
    MatrixX<Scalar> out = MatrixX<Scalar>::Zero(state.rows(), state.cols());
    for (int i = 0; i < transport.grid().dimension(); ++i)
      out += transport.adjoint(transport.forward(state, i), i);
    return out;
  }

  /// Everything except the diagonal decay: G = -(H - A) c - eps V c + f(t).
  MatrixX<Scalar> nonstiff_rhs(const MatrixX<Scalar>& state, Scalar t) const {
    MatrixX<Scalar> out = -apply_offdiagonal(state);
    if (epsilon != Scalar(0)) out -= epsilon * apply_viscosity(state);
    if (forcing) out += forcing(t);
    return out;
  }

  MatrixX<Scalar> rhs(const MatrixX<Scalar>& state, Scalar t) const {
    MatrixX<Scalar> out = nonstiff_rhs(state, t);
    out -= state * ladder.a_diag.asDiagonal();
    return out;
  }
};

namespace detail {

template <typename Scalar>
ArrayX<Scalar> decay_factors(const LadderOperators<Scalar>& ladder, Scalar dt) {
  return (-dt * ladder.a_diag.array()).exp();
}

template <typename Scalar>
MatrixX<Scalar> scale_columns(const MatrixX<Scalar>& state, const ArrayX<Scalar>& factors) {
  return (state.array().rowwise() * factors.transpose()).matrix();
}

}  // namespace detail

/// One classical RK4 step; the integrating-factor variant removes the
/// diagonal decay exactly (a decoupled system is integrated to rounding).
template <typename Scalar>
MatrixX<Scalar> step(const HierarchySystem<Scalar>& system, const MatrixX<Scalar>& state, Scalar t,
                     Scalar dt, TimeScheme scheme) {
  if (scheme == TimeScheme::rk4_plain) {
    const MatrixX<Scalar> k1 = system.rhs(state, t);
    const MatrixX<Scalar> k2 = system.rhs(state + (dt / 2) * k1, t + dt / 2);
    const MatrixX<Scalar> k3 = system.rhs(state + (dt / 2) * k2, t + dt / 2);
    const MatrixX<Scalar> k4 = system.rhs(state + dt * k3, t + dt);
    return state + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  const ArrayX<Scalar> e_half = detail::decay_factors(system.ladder, dt / 2);
  const ArrayX<Scalar> e_full = detail::decay_factors(system.ladder, dt);
  const MatrixX<Scalar> g1 = system.nonstiff_rhs(state, t);
  const MatrixX<Scalar> s2 = detail::scale_columns<Scalar>(state + (dt / 2) * g1, e_half);
  const MatrixX<Scalar> g2 = system.nonstiff_rhs(s2, t + dt / 2);
  const MatrixX<Scalar> s3 = detail::scale_columns(state, e_half) + (dt / 2) * g2;
  const MatrixX<Scalar> g3 = system.nonstiff_rhs(s3, t + dt / 2);
  const MatrixX<Scalar> s4 =
      detail::scale_columns(state, e_full) + dt * detail::scale_columns(g3, e_half);
  const MatrixX<Scalar> g4 = system.nonstiff_rhs(s4, t + dt);
  return detail::scale_columns(state, e_full) +
         (dt / 6) * (detail::scale_columns(g1, e_full) +
                     2 * detail::scale_columns<Scalar>(g2 + g3, e_half) + g4);
}

template <typename Scalar>
struct EnergyRecord {
  Scalar t = 0;
  Scalar half_norm_sq = 0;      // (1/2) ||c||^2 in the weighted product
  Scalar dissipation_a = 0;     // ||A^{1/2} c||^2
  Scalar dissipation_visc = 0;  // epsilon ||grad_x c||^2
  Scalar forcing_power = 0;     // (c, f)
  Scalar residual = 0;          // energy identity mismatch, interior samples
};

template <typename Scalar>
struct Trajectory {
  std::vector<Scalar> times;
  std::vector<MatrixX<Scalar>> states;  // state representation, one per logged time
  std::vector<EnergyRecord<Scalar>> records;
  Scalar dt = 0;       // actual step size used
  Index steps = 0;     // total steps taken

  Scalar max_residual() const {
    Scalar r = 0;
    for (const auto& rec : records) r = std::max(r, std::abs(rec.residual));
    return r;
  }
};

namespace detail {

/// Trapezoid weights for possibly non-uniform sample times.
template <typename Scalar>
std::vector<Scalar> trapezoid_weights(const std::vector<Scalar>& times) {
  std::vector<Scalar> w(times.size(), Scalar(0));
  for (std::size_t j = 0; j + 1 < times.size(); ++j) {
    const Scalar half = (times[j + 1] - times[j]) / 2;
    w[j] += half;
    w[j + 1] += half;
  }
  return w;
}

/// Power balance residual over two consecutive logged intervals by Simpson's
/// rule, so the mismatch shrinks at the scheme's own fourth order. Interior
/// records get the value; the end points keep zero.
template <typename Scalar>
void fill_energy_residuals(std::vector<EnergyRecord<Scalar>>& records) {
  for (std::size_t k = 1; k + 1 < records.size(); ++k) {
    const auto& a = records[k - 1];
    const auto& b = records[k];
    const auto& c = records[k + 1];
    const Scalar dl = b.t - a.t, dr = c.t - b.t;
    if (std::abs(dl - dr) > Scalar(1e-12) * std::max(std::abs(dl), std::abs(dr))) continue;
    const auto power = [](const EnergyRecord<Scalar>& r) {
      return -r.dissipation_a - r.dissipation_visc + r.forcing_power;
    };
    const Scalar rate = (c.half_norm_sq - a.half_norm_sq) / (dl + dr);
    records[k].residual = rate - (power(a) + 4 * power(b) + power(c)) / 6;
  }
}

}  // namespace detail

/// Integrates the system from already-encoded initial state. The forcing
/// callable (if any) lives inside `system`. States and energy records are
/// stored every `log_every` steps and at the final time.
template <typename Scalar>
Trajectory<Scalar> solve_from_state(const HierarchySystem<Scalar>& system, MatrixX<Scalar> state,
                                    const SolverConfig<Scalar>& cfg) {
  if (!(cfg.dt > Scalar(0))) throw ConfigError("time step must be positive");
  if (!(cfg.horizon > Scalar(0))) throw ConfigError("time horizon must be positive");
  if (cfg.log_every < 1) throw ConfigError("log_every must be at least 1");
  if (!(cfg.epsilon >= Scalar(0))) throw ConfigError("viscosity must be nonnegative");
  if (cfg.epsilon != system.epsilon)
    throw ConfigError("viscosity in the configuration and the system disagree");
  const Scalar bound = cfl_bound(system.transport.grid(), system.transport.potential(),
                                 system.indexer.max_degree(), cfg.epsilon, cfg.cfl_safety);
  if (cfg.dt > bound)
    throw ConfigError("time step " + std::to_string(cfg.dt) +
                      " exceeds the stability bound " + std::to_string(bound));
  if (state.rows() != system.transport.grid().total_nodes() ||
      state.cols() != system.indexer.size())
    throw ConfigError("initial state shape does not match grid and basis");

  const Index n_steps =
      static_cast<Index>(std::ceil(cfg.horizon / cfg.dt - Scalar(1e-9)));
  const Scalar dt = cfg.horizon / Scalar(n_steps);

  Trajectory<Scalar> traj;
  traj.dt = dt;
  traj.steps = n_steps;

  const auto log_state = [&](Index step_index, const MatrixX<Scalar>& s) {
    const Scalar t = (step_index == n_steps) ? cfg.horizon : Scalar(step_index) * dt;
    EnergyRecord<Scalar> rec;
    rec.t = t;
    const RowVectorX<Scalar> col_norms = system.transport.col_norms_sq(s);
    rec.half_norm_sq = col_norms.sum() / 2;
    rec.dissipation_a = (col_norms.transpose().array() * system.ladder.a_diag.array()).sum();
    if (cfg.epsilon != Scalar(0)) {
      Scalar visc = 0;
      for (int i = 0; i < system.transport.grid().dimension(); ++i)
        visc += system.transport.norm_sq(system.transport.forward(s, i));
      rec.dissipation_visc = cfg.epsilon * visc;
    }
    if (system.forcing) rec.forcing_power = system.transport.inner(s, system.forcing(t));
    traj.times.push_back(t);
    traj.states.push_back(s);
    traj.records.push_back(rec);
  };

  log_state(0, state);
  for (Index n = 0; n < n_steps; ++n) {
    const Scalar t = Scalar(n) * dt;
    state = step(system, state, t, dt, cfg.scheme);
    if (!state.allFinite())
      throw NumericalError("state is not finite after step " + std::to_string(n + 1) + " (t = " +
                           std::to_string(t + dt) + ")");
    if ((n + 1) % cfg.log_every == 0 || n + 1 == n_steps) log_state(n + 1, state);
  }
  detail::fill_energy_residuals(traj.records);
  return traj;
}

/// Projects the problem data, encodes it, and integrates. The forcing is
/// projected at the exact stage times with a small memo so the repeated end
/// point of consecutive steps is reused.
template <typename Scalar>
Trajectory<Scalar> solve(HierarchySystem<Scalar> system, const ProblemData<Scalar>& data,
                         int quad_points, const SolverConfig<Scalar>& cfg) {
  const auto quad = velocity_quadrature<Scalar>(system.indexer, quad_points);
  const MatrixX<Scalar> initial =
      project_initial_data(system.transport.grid(), system.indexer, quad, data);
  if (data.forcing) {
    auto cache = std::make_shared<std::map<Scalar, MatrixX<Scalar>>>();
    const TransportOps<Scalar> transport = system.transport;
    const BasisIndexer indexer = system.indexer;
    system.forcing = [cache, transport, indexer, quad, data](Scalar t) -> MatrixX<Scalar> {
      if (const auto it = cache->find(t); it != cache->end()) return it->second;
      if (cache->size() > 8) cache->clear();
      MatrixX<Scalar> projected = transport.encode(
          project_forcing(transport.grid(), indexer, quad, data, t));
      return cache->emplace(t, std::move(projected)).first->second;
    };
  }
  return solve_from_state(system, system.transport.encode(initial), cfg);
}

}  // namespace kfp
