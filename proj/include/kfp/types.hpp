#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace kfp {

using Index = Eigen::Index;
using Real = double;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

inline constexpr Real kPi = std::numbers::pi_v<Real>;

/// Thrown when a configuration value or argument violates a documented
/// precondition (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when a computation produces non-finite state or otherwise fails
/// numerically (maps to CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kfp
