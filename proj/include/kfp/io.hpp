#pragma once

#include "kfp/diagnostics.hpp"
#include "kfp/integrator.hpp"
#include "kfp/multi_index.hpp"
#include "kfp/types.hpp"
#include "kfp/wholespace.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <locale>
#include <string>
#include <vector>

namespace kfp {

namespace detail {

/// Opens an output stream that throws on failure, uses the classic locale
/// (so the decimal separator is always '.'), and prints floating-point
/// values with 17 significant digits, enough to round-trip a double exactly.
inline std::ofstream open_text(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file " + path.string());
  out.exceptions(std::ofstream::failbit | std::ofstream::badbit);
  out.imbue(std::locale::classic());
  out.precision(17);
  return out;
}

inline std::ofstream open_binary(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file " + path.string());
  out.exceptions(std::ofstream::failbit | std::ofstream::badbit);
  return out;
}

/// Serializes one double as 8 little-endian bytes regardless of host order.
inline void put_le_double(std::ofstream& out, double value) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &value, sizeof(bits));
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t swapped = 0;
    for (int i = 0; i < 8; ++i)
      swapped |= ((bits >> (8 * i)) & 0xffu) << (8 * (7 - i));
    bits = swapped;
  }
  char bytes[8];
  std::memcpy(bytes, &bits, sizeof(bytes));
  out.write(bytes, sizeof(bytes));
}

}  // namespace detail

/// Ensures the run directory exists (creating parents as needed).
inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

/// Energy ledger of a run, one row per logged time.
template <typename Scalar>
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory<Scalar>& traj) {
  auto out = detail::open_text(path);
  out << "t,half_l2_eta_sq,dissipation_A,dissipation_visc,forcing_power,energy_residual\n";
  for (const auto& rec : traj.records)
    out << rec.t << ',' << rec.half_norm_sq << ',' << rec.dissipation_a << ','
        << rec.dissipation_visc << ',' << rec.forcing_power << ',' << rec.residual << '\n';
}

/// Coefficient snapshot as CSV: one row per coefficient index (the order is
/// serialized separately by write_indexer_csv), grid nodes across the row in
/// the grid's row-major node order.
template <typename Scalar>
void write_snapshot_csv(const std::filesystem::path& path, const MatrixX<Scalar>& state) {
  auto out = detail::open_text(path);
  for (Index a = 0; a < state.cols(); ++a) {
    for (Index j = 0; j < state.rows(); ++j) {
      if (j > 0) out << ',';
      out << state(j, a);
    }
    out << '\n';
  }
}

/// Coefficient snapshot as flat little-endian binary doubles, coefficient
/// index major and grid node minor: value(index a, node j) lives at offset
/// 8 * (a * total_nodes + j).
template <typename Scalar>
void write_snapshot_binary(const std::filesystem::path& path, const MatrixX<Scalar>& state) {
  auto out = detail::open_binary(path);
  for (Index a = 0; a < state.cols(); ++a)
    for (Index j = 0; j < state.rows(); ++j)
      detail::put_le_double(out, static_cast<double>(state(j, a)));
}

/// The enumeration backing snapshot rows: index, total degree, then the
/// multi-index components.
inline void write_indexer_csv(const std::filesystem::path& path, const BasisIndexer& indexer) {
  auto out = detail::open_text(path);
  out << "index,degree";
  for (int i = 0; i < indexer.dimension(); ++i) out << ",alpha_" << i;
  out << '\n';
  for (Index a = 0; a < indexer.size(); ++a) {
    out << a << ',' << indexer.degree_of(a);
    for (int i = 0; i < indexer.dimension(); ++i)
      out << ',' << indexer.order(a)[static_cast<std::size_t>(i)];
    out << '\n';
  }
}

/// Truncation-degree convergence table: one row per degree.
template <typename Scalar>
void write_convergence_csv(const std::filesystem::path& path,
                           const ConvergenceReport<Scalar>& report) {
  auto out = detail::open_text(path);
  out << "m,error,envelope\n";
  for (std::size_t i = 0; i < report.m_values.size(); ++i)
    out << report.m_values[i] << ',' << report.errors[i] << ',' << report.envelope[i] << '\n';
}

/// Periodization sweep table: one row per radius, with the window distance to
/// the next radius (the last row has no successor and reports nan).
template <typename Scalar>
void write_sweep_csv(const std::filesystem::path& path, const SweepReport<Scalar>& report) {
  auto out = detail::open_text(path);
  const std::vector<Scalar> diffs = report.consecutive_differences();
  out << "R,grid_points,tracked_norm,window_diff_to_next\n";
  for (std::size_t i = 0; i < report.r_values.size(); ++i) {
    out << report.r_values[i] << ',' << report.grid_points[i] << ',' << report.tracked_norm[i]
        << ',';
    if (i < diffs.size())
      out << diffs[i];
    else
      out << "nan";
    out << '\n';
  }
}

/// Dense matrix as CSV (used for the pairwise window-distance table).
template <typename Scalar>
void write_matrix_csv(const std::filesystem::path& path, const MatrixX<Scalar>& mat) {
  auto out = detail::open_text(path);
  for (Index i = 0; i < mat.rows(); ++i) {
    for (Index j = 0; j < mat.cols(); ++j) {
      if (j > 0) out << ',';
      out << mat(i, j);
    }
    out << '\n';
  }
}

}  // namespace kfp
