#pragma once

#include "kfp/types.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

namespace kfp {

/// Multi-index alpha in N_0^d.
using MultiIndex = std::vector<int>;

inline int degree(const MultiIndex& alpha) {
  return std::accumulate(alpha.begin(), alpha.end(), 0);
}

/// Number of multi-indices of dimension d with degree <= m, i.e. binomial(m + d, d).
/// Throws ConfigError when the count does not fit the index type.
inline Index basis_size(int dimension, int max_degree) {
  if (dimension < 1) throw ConfigError("basis dimension must be positive, got " + std::to_string(dimension));
  if (max_degree < 0) throw ConfigError("basis max degree must be nonnegative, got " + std::to_string(max_degree));
  std::uint64_t n = 1;
  for (int i = 1; i <= dimension; ++i) {
    const std::uint64_t factor = static_cast<std::uint64_t>(max_degree) + static_cast<std::uint64_t>(i);
    if (n > std::numeric_limits<std::uint64_t>::max() / factor)
      throw ConfigError("basis size overflows the index type");
    n = n * factor / static_cast<std::uint64_t>(i);
  }
  if (n > static_cast<std::uint64_t>(std::numeric_limits<Index>::max()))
    throw ConfigError("basis size overflows the index type");
  return static_cast<Index>(n);
}

/// Enumeration of {alpha : |alpha| <= m} in N_0^d, graded by degree and, within
/// each degree, ordered with the higher exponent on the earlier dimension
/// first: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
///
/// The enumeration for degree m is a prefix of the enumeration for any m' > m,
/// which is what lets coefficient vectors of different truncations be compared
/// by zero padding.
class BasisIndexer {
 public:
  BasisIndexer(int dimension, int max_degree) : d_(dimension), m_(max_degree) {
    const Index n = basis_size(dimension, max_degree);
    order_.reserve(static_cast<std::size_t>(n));
    MultiIndex scratch(static_cast<std::size_t>(d_), 0);
    for (int s = 0; s <= m_; ++s) emit_degree(scratch, 0, s);
    for (Index i = 0; i < n; ++i) position_.emplace(order_[static_cast<std::size_t>(i)], i);
    raise_.assign(static_cast<std::size_t>(n) * d_, -1);
    lower_.assign(static_cast<std::size_t>(n) * d_, -1);
    for (Index i = 0; i < n; ++i) {
      MultiIndex alpha = order_[static_cast<std::size_t>(i)];
      for (int k = 0; k < d_; ++k) {
        if (degree(alpha) < m_) {
          ++alpha[static_cast<std::size_t>(k)];
          raise_[static_cast<std::size_t>(i) * d_ + k] = position_.at(alpha);
          --alpha[static_cast<std::size_t>(k)];
        }
        if (alpha[static_cast<std::size_t>(k)] > 0) {
          --alpha[static_cast<std::size_t>(k)];
          lower_[static_cast<std::size_t>(i) * d_ + k] = position_.at(alpha);
          ++alpha[static_cast<std::size_t>(k)];
        }
      }
    }
  }

  int dimension() const { return d_; }
  int max_degree() const { return m_; }
  Index size() const { return static_cast<Index>(order_.size()); }

  const MultiIndex& order(Index i) const { return order_.at(static_cast<std::size_t>(i)); }

  Index position(const MultiIndex& alpha) const {
    const auto it = position_.find(alpha);
    if (it == position_.end()) throw ConfigError("multi-index outside the enumerated range");
    return it->second;
  }

  int degree_of(Index i) const { return degree(order(i)); }

  /// Position of alpha + e_dim, or empty when the raised degree exceeds the cap.
  std::optional<Index> raise_index(Index i, int dim) const {
    const Index j = raise_[static_cast<std::size_t>(i) * d_ + dim];
    if (j < 0) return std::nullopt;
    return j;
  }

  /// Position of alpha - e_dim, or empty when alpha_dim == 0.
  std::optional<Index> lower_index(Index i, int dim) const {
    const Index j = lower_[static_cast<std::size_t>(i) * d_ + dim];
    if (j < 0) return std::nullopt;
    return j;
  }

 private:
  void emit_degree(MultiIndex& scratch, int dim, int remaining) {
    if (dim == d_ - 1) {
      scratch[static_cast<std::size_t>(dim)] = remaining;
      order_.push_back(scratch);
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      scratch[static_cast<std::size_t>(dim)] = k;
      emit_degree(scratch, dim + 1, remaining - k);
    }
  }

  int d_;
  int m_;
  std::vector<MultiIndex> order_;
  std::map<MultiIndex, Index> position_;
  std::vector<Index> raise_;
  std::vector<Index> lower_;
};

}  // namespace kfp
