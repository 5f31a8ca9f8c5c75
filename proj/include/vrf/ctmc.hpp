#pragma once

// Finite continuous-time Markov chains: steady-state solving, uniformization,
// stochastic complementation and the fold-back construction for partitions
// whose returns land in a single state.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "vrf/kernels.hpp"

namespace vrf::ctmc {

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  kernels::MatrixView view() const { return {data_.data(), rows_, cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Generator matrix: non-negative off-diagonal rates, rows summing to zero.
class RateMatrix {
 public:
  /// Takes the off-diagonal rates (diagonal of `rates` is ignored) and fills
  /// q_ii = -sum_{j != i} q_ij.
  static RateMatrix from_rates(Matrix rates);

  /// Validates a complete generator (row sums within 1e-12 of zero, relative
  /// to the row's exit rate).
  explicit RateMatrix(Matrix q);

  std::size_t size() const { return q_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return q_(i, j); }
  const Matrix& matrix() const { return q_; }

 private:
  RateMatrix() = default;
  Matrix q_;
};

/// Probability vector over an indexed state set.
class Distribution {
 public:
  Distribution() = default;
  /// Validates non-negativity and normalization within 1e-10.
  explicit Distribution(std::vector<double> p);

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  std::span<const double> values() const { return p_; }

 private:
  std::vector<double> p_;
};

/// Two disjoint, non-empty index sets covering 0..n-1. L keeps the caller's order.
class Partition {
 public:
  Partition(std::size_t n, std::vector<std::size_t> left);

  std::size_t size() const { return in_left_.size(); }
  const std::vector<std::size_t>& left() const { return left_; }
  const std::vector<std::size_t>& right() const { return right_; }
  bool in_left(std::size_t i) const { return in_left_[i]; }

 private:
  std::vector<std::size_t> left_;
  std::vector<std::size_t> right_;
  std::vector<bool> in_left_;
};

/// Throws StructuralError naming a state that is not mutually reachable with
/// state 0 in the positive-rate graph.
void check_irreducible(const RateMatrix& q);

/// Stationary distribution of an irreducible generator (pi Q = 0, pi e = 1),
/// computed by GTH elimination.
ctmc::Distribution steady_state(const RateMatrix& q);

/// Stationary distribution of an irreducible row-stochastic matrix.
ctmc::Distribution stationary(const Matrix& p);

/// max_j |(pi Q)_j|
double balance_residual(const RateMatrix& q, std::span<const double> pi);

/// P = I + Q / zeta; zeta defaults to max |q_ii|.
Matrix uniformize(const RateMatrix& q, std::optional<double> zeta = std::nullopt);

/// C = P_LL + P_LR (I - P_RR)^{-1} P_RL, indexed in `part.left()` order.
Matrix stochastic_complement(const Matrix& p, const Partition& part);

/// Conditional stationary distribution over L when every transition from R
/// back to L enters `entry_state` (a global index in L): solves
/// pi [Q_LL + Q_LR e e_i^T] = 0.
ctmc::Distribution fold_back_conditional(const RateMatrix& q, const Partition& part,
                                         std::size_t entry_state);

/// Same construction with one return state per connected component of R:
/// exits into a component are folded back to the unique L state that
/// component returns to. Throws TheoremInapplicable when some component
/// returns to L through more than one state.
ctmc::Distribution fold_back_conditional(const RateMatrix& q, const Partition& part);

}  // namespace vrf::ctmc
