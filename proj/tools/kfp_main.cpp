// Command-line driver: parses a JSON experiment configuration, runs one of
// the orchestrated experiments (simulate / sweep-m / sweep-R / verify), and
// serializes trajectories and reports under the chosen output directory.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 verification-battery failure.

#include "kfp/hermite.hpp"
#include "kfp/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace {

using json = nlohmann::json;
using kfp::ConfigError;
using kfp::Index;
using kfp::MatrixX;
using kfp::VectorX;
using Real = double;

constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// config schema helpers
// ---------------------------------------------------------------------------

void require_keys_known(const json& obj, const std::string& where,
                        const std::vector<std::string>& known) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : obj.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_required(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError("missing key '" + key + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + key + "' in " + where + " has the wrong type");
  }
}

// ---------------------------------------------------------------------------
// resolved experiment configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string geometry = "torus";  // torus | wholespace
  int dimension = 1;
  int truncation = 8;    // basis degree bound m
  int grid_points = 32;  // N per dimension
  int quadrature = 0;    // 0 resolves to truncation + 8
  Real half_period = kfp::kPi;

  json potential = {{"name", "zero"}};
  json data = {{"name", "gaussian_in_v"}};
  json forcing;  // optional, same product schema as data

  kfp::SolverConfig<Real> solver;
  std::string scheme_name = "if_rk4";

  std::filesystem::path output;
  std::uint64_t seed = 1234;
  std::string snapshot_format = "csv";  // csv | binary
  int threads = 1;

  // sweep-m
  std::vector<int> m_list;
  int m_star = 0;
  Real smoothness = 2.0;

  // wholespace
  Real radius = 0.0;  // simulate on Q_radius
  std::vector<Real> r_list;
  int base_points = 32;

  json resolved() const {
    json solver_block = {{"dt", solver.dt},
                         {"horizon", solver.horizon},
                         {"epsilon", solver.epsilon},
                         {"cfl_safety", solver.cfl_safety},
                         {"scheme", scheme_name},
                         {"log_every", solver.log_every}};
    json out = {{"geometry", geometry},
                {"dimension", dimension},
                {"truncation", truncation},
                {"grid_points", grid_points},
                {"quadrature", quadrature},
                {"half_period", half_period},
                {"potential", potential},
                {"data", data},
                {"solver", solver_block},
                {"output", output.string()},
                {"seed", seed},
                {"snapshot_format", snapshot_format},
                {"threads", threads}};
    if (!forcing.is_null()) out["forcing"] = forcing;
    if (!m_list.empty()) {
      out["m_list"] = m_list;
      out["m_star"] = m_star;
      out["smoothness"] = smoothness;
    }
    if (geometry == "wholespace") {
      out["radius"] = radius;
      out["r_list"] = r_list;
      out["base_points"] = base_points;
    }
    return out;
  }
};

RunConfig parse_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw ConfigError("config file not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  require_keys_known(doc, "config",
                     {"geometry", "dimension", "truncation", "grid_points", "quadrature",
                      "half_period", "potential", "data", "forcing", "solver", "output", "seed",
                      "snapshot_format", "m_list", "m_star", "smoothness", "radius", "r_list",
                      "base_points"});

  RunConfig cfg;
  cfg.geometry = get_or<std::string>(doc, "geometry", cfg.geometry);
  if (cfg.geometry != "torus" && cfg.geometry != "wholespace")
    throw ConfigError("geometry must be 'torus' or 'wholespace'");
  cfg.dimension = get_or<int>(doc, "dimension", cfg.dimension);
  if (cfg.dimension < 1 || cfg.dimension > 3)
    throw ConfigError("dimension must be between 1 and 3");
  cfg.truncation = get_or<int>(doc, "truncation", cfg.truncation);
  if (cfg.truncation < 0) throw ConfigError("truncation degree must be nonnegative");
  cfg.grid_points = get_or<int>(doc, "grid_points", cfg.grid_points);
  if (cfg.grid_points < 4 || cfg.grid_points % 2 != 0)
    throw ConfigError("grid_points must be an even number of at least 4");
  cfg.quadrature = get_or<int>(doc, "quadrature", cfg.quadrature);
  if (cfg.quadrature < 0) throw ConfigError("quadrature order must be nonnegative");
  cfg.half_period = get_or<Real>(doc, "half_period", cfg.half_period);
  if (!(cfg.half_period > 0)) throw ConfigError("half_period must be positive");

  if (doc.contains("potential")) cfg.potential = doc.at("potential");
  if (doc.contains("data")) cfg.data = doc.at("data");
  if (doc.contains("forcing")) cfg.forcing = doc.at("forcing");

  if (doc.contains("solver")) {
    const json& sv = doc.at("solver");
    require_keys_known(sv, "solver",
                       {"dt", "horizon", "epsilon", "cfl_safety", "scheme", "log_every"});
    cfg.solver.dt = get_or<Real>(sv, "dt", cfg.solver.dt);
    cfg.solver.horizon = get_or<Real>(sv, "horizon", cfg.solver.horizon);
    cfg.solver.epsilon = get_or<Real>(sv, "epsilon", cfg.solver.epsilon);
    cfg.solver.cfl_safety = get_or<Real>(sv, "cfl_safety", cfg.solver.cfl_safety);
    cfg.solver.log_every = get_or<int>(sv, "log_every", cfg.solver.log_every);
    cfg.scheme_name = get_or<std::string>(sv, "scheme", cfg.scheme_name);
    if (cfg.scheme_name == "if_rk4")
      cfg.solver.scheme = kfp::TimeScheme::rk4_integrating_factor;
    else if (cfg.scheme_name == "rk4")
      cfg.solver.scheme = kfp::TimeScheme::rk4_plain;
    else
      throw ConfigError("scheme must be 'if_rk4' or 'rk4'");
  }
  if (!(cfg.solver.dt > 0)) throw ConfigError("solver.dt must be positive");
  if (!(cfg.solver.horizon > 0)) throw ConfigError("solver.horizon must be positive");
  if (!(cfg.solver.epsilon >= 0)) throw ConfigError("solver.epsilon must be nonnegative");

  cfg.output = get_or<std::string>(doc, "output", std::string());
  cfg.seed = get_or<std::uint64_t>(doc, "seed", cfg.seed);
  cfg.snapshot_format = get_or<std::string>(doc, "snapshot_format", cfg.snapshot_format);
  if (cfg.snapshot_format != "csv" && cfg.snapshot_format != "binary")
    throw ConfigError("snapshot_format must be 'csv' or 'binary'");

  cfg.m_list = get_or<std::vector<int>>(doc, "m_list", {});
  cfg.m_star = get_or<int>(doc, "m_star", cfg.m_star);
  cfg.smoothness = get_or<Real>(doc, "smoothness", cfg.smoothness);

  cfg.radius = get_or<Real>(doc, "radius", cfg.radius);
  cfg.r_list = get_or<std::vector<Real>>(doc, "r_list", {});
  cfg.base_points = get_or<int>(doc, "base_points", cfg.base_points);
  return cfg;
}

// ---------------------------------------------------------------------------
// built-in profiles and problem data
// ---------------------------------------------------------------------------

double bump_profile(double s) {
  const double s2 = s * s;
  if (s2 >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s2));
}

using SpaceProfile = std::function<Real(const VectorX<Real>&)>;

SpaceProfile build_x_profile(const json& spec) {
  json obj = spec.is_null() ? json{{"name", "constant"}} : spec;
  if (obj.is_string()) obj = json{{"name", obj.get<std::string>()}};
  require_keys_known(obj, "x_profile", {"name", "mode", "radius"});
  const auto name = get_required<std::string>(obj, "name", "x_profile");
  if (name == "constant") return [](const VectorX<Real>&) { return Real(1); };
  if (name == "cosine") {
    const Real mode = get_or<Real>(obj, "mode", 1.0);
    return [mode](const VectorX<Real>& x) { return (mode * x.array()).cos().prod(); };
  }
  if (name == "sine") {
    const Real mode = get_or<Real>(obj, "mode", 1.0);
    return [mode](const VectorX<Real>& x) { return (mode * x.array()).sin().prod(); };
  }
  if (name == "bump_gaussian") {
    const Real radius = get_or<Real>(obj, "radius", 2.0);
    if (!(radius > 0)) throw ConfigError("bump_gaussian radius must be positive");
    return [radius](const VectorX<Real>& x) {
      return bump_profile(x.norm() / radius) * std::exp(-x.squaredNorm());
    };
  }
  throw ConfigError("unknown x_profile '" + name +
                    "' (built-ins: constant, cosine, sine, bump_gaussian)");
}

using VelocityProfile = std::function<Real(const VectorX<Real>&)>;

VelocityProfile build_v_profile(const json& spec) {
  json obj = spec.is_null() ? json{{"name", "gaussian"}} : spec;
  if (obj.is_string()) obj = json{{"name", obj.get<std::string>()}};
  require_keys_known(obj, "v_profile", {"name", "width", "alpha"});
  const auto name = get_required<std::string>(obj, "name", "v_profile");
  if (name == "constant") return [](const VectorX<Real>&) { return Real(1); };
  if (name == "gaussian") {
    const Real width = get_or<Real>(obj, "width", 4.0);
    if (!(width > 0)) throw ConfigError("gaussian width must be positive");
    return [width](const VectorX<Real>& v) { return std::exp(-v.squaredNorm() / width); };
  }
  if (name == "hermite") {
    const auto alpha = get_required<std::vector<int>>(obj, "alpha", "v_profile");
    for (const int a : alpha)
      if (a < 0) throw ConfigError("hermite mode degrees must be nonnegative");
    return [alpha](const VectorX<Real>& v) {
      if (static_cast<std::size_t>(v.size()) != alpha.size())
        throw ConfigError("hermite mode degree count does not match the dimension");
      Real p = 1;
      for (Index i = 0; i < v.size(); ++i) {
        const int deg = alpha[static_cast<std::size_t>(i)];
        p *= kfp::hermite_values<Real>(deg, v[i])[deg];
      }
      return p;
    };
  }
  throw ConfigError("unknown v_profile '" + name + "' (built-ins: constant, gaussian, hermite)");
}

kfp::ProblemData<Real> build_problem_data(const RunConfig& cfg) {
  json obj = cfg.data;
  if (obj.is_string()) obj = json{{"name", obj.get<std::string>()}};
  require_keys_known(obj, "data", {"name", "x_profile", "v_profile", "width", "alpha"});
  const auto name = get_required<std::string>(obj, "name", "data");

  SpaceProfile xp = build_x_profile(obj.contains("x_profile") ? obj.at("x_profile") : json());
  VelocityProfile vp;
  if (name == "hermite_mode") {
    json vspec = {{"name", "hermite"},
                  {"alpha", obj.contains("alpha") ? obj.at("alpha")
                                                  : json(std::vector<int>(cfg.dimension, 0))}};
    vp = build_v_profile(vspec);
  } else if (name == "gaussian_in_v") {
    json vspec = {{"name", "gaussian"}, {"width", get_or<Real>(obj, "width", 4.0)}};
    vp = build_v_profile(vspec);
  } else if (name == "product") {
    vp = build_v_profile(obj.contains("v_profile") ? obj.at("v_profile") : json());
  } else {
    throw ConfigError("unknown data built-in '" + name +
                      "' (built-ins: hermite_mode, gaussian_in_v, product)");
  }

  kfp::ProblemData<Real> data;
  data.initial = [xp, vp](const VectorX<Real>& x, const VectorX<Real>& v) {
    return xp(x) * vp(v);
  };

  if (!cfg.forcing.is_null()) {
    json fobj = cfg.forcing;
    require_keys_known(fobj, "forcing", {"name", "x_profile", "v_profile", "omega", "amplitude"});
    const auto fname = get_or<std::string>(fobj, "name", "product");
    if (fname != "product")
      throw ConfigError("forcing supports only the 'product' built-in");
    SpaceProfile fx = build_x_profile(fobj.contains("x_profile") ? fobj.at("x_profile") : json());
    VelocityProfile fv =
        build_v_profile(fobj.contains("v_profile") ? fobj.at("v_profile") : json());
    const Real omega = get_or<Real>(fobj, "omega", 0.0);
    const Real amplitude = get_or<Real>(fobj, "amplitude", 1.0);
    data.forcing = [fx, fv, omega, amplitude](Real t, const VectorX<Real>& x,
                                              const VectorX<Real>& v) {
      return amplitude * std::cos(omega * t) * fx(x) * fv(v);
    };
  }
  return data;
}

struct PotentialSpec {
  std::string name;
  Real amplitude = 1.0;                          // cosine
  Real a = 0.5, height = 1.0, bump_radius = 1.0;  // quadratic_bump
};

PotentialSpec parse_potential(const json& spec) {
  json obj = spec.is_null() ? json{{"name", "zero"}} : spec;
  if (obj.is_string()) obj = json{{"name", obj.get<std::string>()}};
  require_keys_known(obj, "potential", {"name", "amplitude", "a", "height", "radius"});
  PotentialSpec out;
  out.name = get_required<std::string>(obj, "name", "potential");
  out.amplitude = get_or<Real>(obj, "amplitude", out.amplitude);
  out.a = get_or<Real>(obj, "a", out.a);
  out.height = get_or<Real>(obj, "height", out.height);
  out.bump_radius = get_or<Real>(obj, "radius", out.bump_radius);
  if (out.name != "zero" && out.name != "cosine" && out.name != "quadratic_bump")
    throw ConfigError("unknown potential '" + out.name +
                      "' (built-ins: zero, cosine, quadratic_bump)");
  return out;
}

kfp::PotentialField<Real> build_torus_potential(const PotentialSpec& spec,
                                                const kfp::TorusGrid<Real>& grid) {
  if (spec.name == "zero") return kfp::zero_potential(grid);
  if (spec.name == "cosine") return kfp::cosine_potential(grid, spec.amplitude);
  throw ConfigError("potential 'quadratic_bump' requires the wholespace geometry");
}

kfp::WholeSpacePotential<Real> build_wholespace_potential(const PotentialSpec& spec) {
  if (spec.name != "quadratic_bump")
    throw ConfigError("the wholespace geometry requires the 'quadratic_bump' potential");
  return kfp::quadratic_bump_potential<Real>(spec.a, spec.height, spec.bump_radius);
}

// ---------------------------------------------------------------------------
// command drivers
// ---------------------------------------------------------------------------

json version_block() {
  return {{"tool", kToolVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                        "." + std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", __VERSION__}};
}

void write_metadata(const std::filesystem::path& dir, const RunConfig& cfg,
                    const std::string& command, double wall_seconds, json extra) {
  json meta = {{"command", command},
               {"config", cfg.resolved()},
               {"versions", version_block()},
               {"wall_time_seconds", wall_seconds}};
  for (auto& item : extra.items()) meta[item.key()] = item.value();
  std::ofstream out(dir / "metadata.json");
  if (!out) throw ConfigError("cannot write metadata in " + dir.string());
  out << meta.dump(2) << "\n";
}

void write_snapshot(const RunConfig& cfg, const std::filesystem::path& base,
                    const MatrixX<Real>& coeffs) {
  if (cfg.snapshot_format == "binary")
    kfp::write_snapshot_binary(base.string() + ".bin", coeffs);
  else
    kfp::write_snapshot_csv(base.string() + ".csv", coeffs);
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

const std::filesystem::path& require_output(const RunConfig& cfg) {
  if (cfg.output.empty())
    throw ConfigError("no output directory: set 'output' in the config or pass --out");
  return cfg.output;
}

int run_simulate(const RunConfig& cfg) {
  Stopwatch clock;
  const auto& dir = require_output(cfg);
  kfp::ensure_directory(dir);
  const kfp::BasisIndexer indexer(cfg.dimension, cfg.truncation);
  const int q = cfg.quadrature > 0 ? cfg.quadrature : cfg.truncation + 8;
  const PotentialSpec pspec = parse_potential(cfg.potential);
  const kfp::ProblemData<Real> data = build_problem_data(cfg);

  kfp::Trajectory<Real> traj;
  std::shared_ptr<const kfp::TorusGrid<Real>> grid;
  std::optional<kfp::TransportOps<Real>> transport;
  if (cfg.geometry == "torus") {
    grid = std::make_shared<const kfp::TorusGrid<Real>>(cfg.dimension, cfg.half_period,
                                                        cfg.grid_points);
    auto pot = std::make_shared<const kfp::PotentialField<Real>>(
        build_torus_potential(pspec, *grid));
    transport = kfp::TransportOps<Real>::make_conjugated(grid, pot);
  } else {
    if (!(cfg.radius > 0)) throw ConfigError("wholespace simulate needs a positive 'radius'");
    const kfp::WholeSpacePotential<Real> wsp = build_wholespace_potential(pspec);
    grid = std::make_shared<const kfp::TorusGrid<Real>>(cfg.dimension, cfg.radius,
                                                        cfg.grid_points);
    auto pot = std::make_shared<const kfp::PotentialField<Real>>(
        kfp::build_periodized_potential(wsp, cfg.radius, *grid));
    kfp::detail::check_data_support(data, *grid, wsp.core_radius());
    transport = kfp::TransportOps<Real>::make_symmetrized(grid, pot);
  }
  kfp::HierarchySystem<Real> system(indexer, *transport, cfg.solver.epsilon);
  traj = kfp::solve(system, data, q, cfg.solver);

  kfp::write_trajectory_csv(dir / "trajectory.csv", traj);
  kfp::write_indexer_csv(dir / "indexer.csv", indexer);
  // snapshots hold density-form coefficient fields (the solver's internal
  // square-root weighting, if any, is undone)
  write_snapshot(cfg, dir / "snapshot_initial", transport->decode(traj.states.front()));
  write_snapshot(cfg, dir / "snapshot_final", transport->decode(traj.states.back()));
  write_metadata(dir, cfg, "simulate", clock.seconds(),
                 {{"steps", traj.steps},
                  {"dt_actual", traj.dt},
                  {"logged_times", traj.times.size()},
                  {"basis_size", indexer.size()},
                  {"grid_nodes", grid->total_nodes()},
                  {"max_energy_residual", traj.max_residual()},
                  {"snapshot_layout", "coefficient index major, grid node minor; row order "
                                      "in indexer.csv"}});
  std::cout << "simulate: " << traj.steps << " steps, " << traj.times.size()
            << " logged states, max energy residual " << traj.max_residual() << "\n";
  return 0;
}

int run_sweep_m(const RunConfig& cfg) {
  Stopwatch clock;
  const auto& dir = require_output(cfg);
  if (cfg.geometry != "torus") throw ConfigError("sweep-m runs on the torus geometry");
  if (cfg.m_list.empty()) throw ConfigError("sweep-m needs a nonempty 'm_list'");
  if (cfg.m_star <= 0) throw ConfigError("sweep-m needs a positive reference degree 'm_star'");
  kfp::ensure_directory(dir);

  auto grid = std::make_shared<const kfp::TorusGrid<Real>>(cfg.dimension, cfg.half_period,
                                                           cfg.grid_points);
  auto pot = std::make_shared<const kfp::PotentialField<Real>>(
      build_torus_potential(parse_potential(cfg.potential), *grid));
  const auto transport = kfp::TransportOps<Real>::make_conjugated(grid, pot);
  const kfp::ProblemData<Real> data = build_problem_data(cfg);

  const auto report = kfp::convergence_study(transport, data, cfg.solver, cfg.m_list, cfg.m_star,
                                             cfg.smoothness, cfg.quadrature);
  kfp::write_convergence_csv(dir / "convergence.csv", report);
  write_metadata(dir, cfg, "sweep-m", clock.seconds(),
                 {{"slope", report.slope},
                  {"floor_rate", report.floor_rate},
                  {"within_envelope", report.within_envelope},
                  {"m_star", report.m_star}});
  std::cout << "sweep-m: slope " << report.slope << " (guaranteed floor " << report.floor_rate
            << "), envelope " << (report.within_envelope ? "respected" : "violated") << "\n";
  return 0;
}

int run_sweep_r(const RunConfig& cfg) {
  Stopwatch clock;
  const auto& dir = require_output(cfg);
  if (cfg.geometry != "wholespace") throw ConfigError("sweep-R runs on the wholespace geometry");
  if (cfg.r_list.empty()) throw ConfigError("sweep-R needs a nonempty 'r_list'");
  kfp::ensure_directory(dir);

  const kfp::WholeSpacePotential<Real> wsp =
      build_wholespace_potential(parse_potential(cfg.potential));
  const kfp::ProblemData<Real> data = build_problem_data(cfg);
  kfp::SweepConfig<Real> sweep;
  sweep.r_values = cfg.r_list;
  sweep.dimension = cfg.dimension;
  sweep.base_points = cfg.base_points;
  sweep.max_degree = cfg.truncation;
  sweep.quad_points = cfg.quadrature;

  const auto report = kfp::r_sweep(wsp, data, cfg.solver, sweep);
  kfp::write_sweep_csv(dir / "sweep.csv", report);
  kfp::write_matrix_csv(dir / "pairwise.csv", report.pairwise);
  write_metadata(dir, cfg, "sweep-R", clock.seconds(),
                 {{"core_radius", report.core_radius},
                  {"cutoff_convention", report.cutoff_convention}});
  const auto diffs = report.consecutive_differences();
  std::cout << "sweep-R: core radius " << report.core_radius << ", window differences:";
  for (const Real v : diffs) std::cout << " " << v;
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// verify battery
// ---------------------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool pass = false;
  Real observed = 0;
  Real limit = 0;
};

MatrixX<Real> random_state(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<Real> normal;
  MatrixX<Real> out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

int run_verify(const RunConfig& cfg) {
  Stopwatch clock;
  std::mt19937_64 rng(cfg.seed);
  std::vector<CheckResult> results;
  const auto record = [&](const std::string& name, Real observed, Real limit) {
    results.push_back({name, observed <= limit, observed, limit});
  };

  {  // orthonormality of the velocity basis under Gauss quadrature
    Real worst = 0;
    for (int d = 1; d <= 2; ++d) {
      const kfp::BasisIndexer indexer(d, 6);
      const auto quad = kfp::velocity_quadrature<Real>(indexer, 10);
      const MatrixX<Real> gram =
          quad.psi.transpose() * quad.weights.asDiagonal() * quad.psi;
      const MatrixX<Real> eye = MatrixX<Real>::Identity(indexer.size(), indexer.size());
      worst = std::max(worst, (gram - eye).cwiseAbs().maxCoeff());
    }
    record("orthonormality", worst, 1e-10);
  }

  {  // the drift part of the generator is skew in the weighted product
    Real worst = 0;
    for (int d = 1; d <= 2; ++d) {
      const int n = 16;
      auto grid = std::make_shared<const kfp::TorusGrid<Real>>(d, kfp::kPi, n);
      for (const bool cosine : {false, true}) {
        auto pot = std::make_shared<const kfp::PotentialField<Real>>(
            cosine ? kfp::cosine_potential(*grid, Real(1)) : kfp::zero_potential(*grid));
        const auto transport = kfp::TransportOps<Real>::make_conjugated(grid, pot);
        const kfp::BasisIndexer indexer(d, 6);
        const auto ladder = kfp::assemble_ladder<Real>(indexer);
        for (int trial = 0; trial < 5; ++trial) {
          const MatrixX<Real> c = random_state(rng, grid->total_nodes(), indexer.size());
          const MatrixX<Real> hc = kfp::apply_hierarchy(c, ladder, transport);
          const Real quad_form = transport.inner(hc, c);
          const Real diag = (transport.col_norms_sq(c).transpose().array() *
                             ladder.a_diag.array())
                                .sum();
          const Real norm_sq = transport.norm_sq(c);
          worst = std::max(worst, std::abs(quad_form - diag) / norm_sq);
        }
      }
    }
    record("skew_symmetry", worst, 1e-12);
  }

  {  // discrete adjointness of the transport derivative pair
    Real worst = 0;
    const int n = 32;
    auto grid = std::make_shared<const kfp::TorusGrid<Real>>(1, kfp::kPi, n);
    std::vector<std::shared_ptr<const kfp::PotentialField<Real>>> pots = {
        std::make_shared<const kfp::PotentialField<Real>>(kfp::zero_potential(*grid)),
        std::make_shared<const kfp::PotentialField<Real>>(
            kfp::cosine_potential(*grid, Real(1)))};
    for (const auto& pot : pots) {
      const auto transport = kfp::TransportOps<Real>::make_conjugated(grid, pot);
      const MatrixX<Real> u = random_state(rng, n, 3);
      const MatrixX<Real> w = random_state(rng, n, 3);
      const Real lhs = transport.inner(transport.forward(u, 0), w);
      const Real rhs = transport.inner(u, transport.adjoint(w, 0));
      worst = std::max(worst, std::abs(lhs - rhs) /
                                  (std::sqrt(transport.norm_sq(u) * transport.norm_sq(w))));
    }
    {  // periodized quadratic-plus-bump in square-root weighting
      const auto wsp = kfp::quadratic_bump_potential<Real>(0.5, 1.0, 1.0);
      auto wgrid = std::make_shared<const kfp::TorusGrid<Real>>(1, 8.0, 64);
      auto wpot = std::make_shared<const kfp::PotentialField<Real>>(
          kfp::build_periodized_potential(wsp, 8.0, *wgrid));
      const auto transport = kfp::TransportOps<Real>::make_symmetrized(wgrid, wpot);
      const MatrixX<Real> u = random_state(rng, 64, 3);
      const MatrixX<Real> w = random_state(rng, 64, 3);
      const Real lhs = transport.inner(transport.forward(u, 0), w);
      const Real rhs = transport.inner(u, transport.adjoint(w, 0));
      worst = std::max(worst, std::abs(lhs - rhs) /
                                  (std::sqrt(transport.norm_sq(u) * transport.norm_sq(w))));
    }
    record("adjointness", worst, 1e-12);
  }

  {  // interior energy-identity residual shrinks at fourth order in dt
    auto grid = std::make_shared<const kfp::TorusGrid<Real>>(1, kfp::kPi, 16);
    auto pot = std::make_shared<const kfp::PotentialField<Real>>(
        kfp::cosine_potential(*grid, Real(1)));
    const auto transport = kfp::TransportOps<Real>::make_conjugated(grid, pot);
    kfp::ProblemData<Real> data;
    data.initial = [](const VectorX<Real>& x, const VectorX<Real>& v) {
      return std::cos(x[0]) * std::exp(-v.squaredNorm() / 4);
    };
    data.forcing = [](Real t, const VectorX<Real>& x, const VectorX<Real>& v) {
      return std::cos(t) * std::sin(x[0]) * std::exp(-v.squaredNorm() / 2);
    };
    const auto residual_at = [&](Real dt) {
      kfp::SolverConfig<Real> sc;
      sc.dt = dt;
      sc.horizon = 0.5;
      sc.epsilon = 0.1;
      kfp::HierarchySystem<Real> system(kfp::BasisIndexer(1, 4), transport, sc.epsilon);
      return kfp::solve(system, data, 12, sc).max_residual();
    };
    const Real coarse = residual_at(2e-3);
    const Real fine = residual_at(1e-3);
    const Real factor = coarse / fine;
    results.push_back({"energy_residual_order", factor >= 8 && factor <= 32, factor, 32});
  }

  {  // constant-potential runs match the closed-form decoupled solution
    auto grid = std::make_shared<const kfp::TorusGrid<Real>>(1, kfp::kPi, 16);
    auto pot =
        std::make_shared<const kfp::PotentialField<Real>>(kfp::zero_potential(*grid));
    const auto transport = kfp::TransportOps<Real>::make_conjugated(grid, pot);
    kfp::ProblemData<Real> data;
    data.initial = [](const VectorX<Real>&, const VectorX<Real>& v) {
      const auto psi = kfp::hermite_values<Real>(2, v[0]);
      return psi[2];
    };
    kfp::SolverConfig<Real> sc;
    sc.dt = 1e-3;
    sc.horizon = 0.5;
    kfp::HierarchySystem<Real> system(kfp::BasisIndexer(1, 4), transport, 0.0);
    const auto traj = kfp::solve(system, data, 12, sc);
    const MatrixX<Real>& last = traj.states.back();
    const Real expected = std::exp(-2.0 * sc.horizon);
    Real err = 0;
    const kfp::BasisIndexer indexer(1, 4);
    for (Index a = 0; a < indexer.size(); ++a) {
      const Real target = (indexer.degree_of(a) == 2) ? expected : 0.0;
      err = std::max(err, (last.col(a).array() - target).abs().maxCoeff());
    }
    record("decoupled_oracle", err / expected, 1e-8);
  }

  {  // truncation defect obeys the smoothness-weighted tail bound
    auto grid = std::make_shared<const kfp::TorusGrid<Real>>(1, kfp::kPi, 16);
    auto pot = std::make_shared<const kfp::PotentialField<Real>>(
        kfp::cosine_potential(*grid, Real(1)));
    const auto transport = kfp::TransportOps<Real>::make_conjugated(grid, pot);
    const kfp::BasisIndexer indexer(1, 6);
    kfp::Trajectory<Real> fake;
    for (int trial = 0; trial < 3; ++trial) {
      fake.times.push_back(Real(trial));
      fake.states.push_back(random_state(rng, grid->total_nodes(), indexer.size()));
    }
    Real worst = 0;
    for (const int k : {1, 2}) {
      const auto rep = kfp::em_decay_check(fake, indexer, transport, k);
      worst = std::max(worst, rep.max_ratio);
    }
    record("em_bound", worst, 1.0 + kfp::kEmDecaySlack);
  }

  bool all_pass = true;
  std::cout.precision(6);
  for (const auto& r : results) {
    std::cout << "check " << r.name << ": " << (r.pass ? "pass" : "FAIL") << " (observed "
              << r.observed << ", limit " << r.limit << ")\n";
    all_pass = all_pass && r.pass;
  }
  std::cout << "verify: " << (all_pass ? "all checks passed" : "FAILURES PRESENT") << " in "
            << clock.seconds() << " s\n";

  if (!cfg.output.empty()) {
    kfp::ensure_directory(cfg.output);
    auto out = kfp::detail::open_text(cfg.output / "verify.csv");
    out << "check,pass,observed,limit\n";
    for (const auto& r : results)
      out << r.name << ',' << (r.pass ? 1 : 0) << ',' << r.observed << ',' << r.limit << '\n';
    write_metadata(cfg.output, cfg, "verify", clock.seconds(), {{"all_pass", all_pass}});
  }
  return all_pass ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Hermite-spectral solver for a kinetic drift-diffusion equation: "
      "simulate runs, truncation sweeps, domain-size sweeps, and a "
      "verification battery"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::optional<std::uint64_t> seed_override;
  std::string format_override;
  int threads = 1;

  const auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "path to the JSON experiment config");
    if (config_required) opt->required();
    sub->add_option("--out", out_override, "output directory (overrides the config)");
    sub->add_option("--seed", seed_override, "seed for randomized checks (overrides the config)");
    sub->add_option("--threads", threads,
                    "worker thread budget; this build executes sequentially for bit-exact "
                    "reproducibility, so values above 1 only annotate the metadata")
        ->check(CLI::PositiveNumber);
    sub->add_option("--format", format_override, "snapshot format: csv or binary")
        ->check(CLI::IsMember({"csv", "binary"}));
  };

  auto* simulate = app.add_subcommand("simulate", "integrate one configuration and write the "
                                                  "trajectory, snapshots, and metadata");
  add_common(simulate, true);
  auto* sweep_m = app.add_subcommand("sweep-m", "truncation-degree convergence study against a "
                                                "high-degree reference");
  add_common(sweep_m, true);
  auto* sweep_r = app.add_subcommand("sweep-R", "domain-size sweep for the periodized "
                                                "confining potential");
  add_common(sweep_r, true);
  auto* verify = app.add_subcommand("verify", "run the property battery (config optional)");
  add_common(verify, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = parse_config(config_path);
    if (!out_override.empty()) cfg.output = out_override;
    if (seed_override) cfg.seed = *seed_override;
    if (!format_override.empty()) cfg.snapshot_format = format_override;
    cfg.threads = threads;

    if (simulate->parsed()) return run_simulate(cfg);
    if (sweep_m->parsed()) return run_sweep_m(cfg);
    if (sweep_r->parsed()) return run_sweep_r(cfg);
    return run_verify(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const kfp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
