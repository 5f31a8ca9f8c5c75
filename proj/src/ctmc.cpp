#include "vrf/ctmc.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "vrf/error.hpp"

namespace vrf::ctmc {

RateMatrix RateMatrix::from_rates(Matrix rates) {
  if (rates.rows() != rates.cols()) throw InvalidParameter("rate matrix must be square");
  const std::size_t n = rates.rows();
  for (std::size_t i = 0; i < n; ++i) {
    double out = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!(rates(i, j) >= 0.0) || !std::isfinite(rates(i, j)))
        throw InvalidParameter("off-diagonal rates must be finite and non-negative");
      out += rates(i, j);
    }
    rates(i, i) = -out;
  }
  RateMatrix r;
  r.q_ = std::move(rates);
  return r;
}

RateMatrix::RateMatrix(Matrix q) : q_(std::move(q)) {
  if (q_.rows() != q_.cols()) throw InvalidParameter("rate matrix must be square");
  for (std::size_t i = 0; i < q_.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < q_.cols(); ++j) {
      if (i != j && !(q_(i, j) >= 0.0)) throw InvalidParameter("off-diagonal rates must be non-negative");
      s += q_(i, j);
    }
    if (std::fabs(s) > 1e-12 * std::max(1.0, std::fabs(q_(i, i))))
      throw InvalidParameter("row " + std::to_string(i) + " of the rate matrix does not sum to zero");
  }
}

Distribution::Distribution(std::vector<double> p) : p_(std::move(p)) {
  double s = 0.0;
  for (double x : p_) {
    if (!(x >= 0.0) || x > 1.0 + 1e-12) throw InvalidParameter("probabilities must lie in [0, 1]");
    s += x;
  }
  if (std::fabs(s - 1.0) > 1e-10) throw InvalidParameter("probabilities must sum to 1");
}

Partition::Partition(std::size_t n, std::vector<std::size_t> left)
    : left_(std::move(left)), in_left_(n, false) {
  for (std::size_t i : left_) {
    if (i >= n) throw InvalidParameter("partition index out of range");
    if (in_left_[i]) throw InvalidParameter("partition index listed twice");
    in_left_[i] = true;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!in_left_[i]) right_.push_back(i);
  if (left_.empty()) throw InvalidParameter("partition: L must be non-empty");
}

namespace {

// Reachability from `start` over positive entries; `forward` follows i->j, else j->i.
std::vector<bool> reach(const Matrix& m, std::size_t start, bool forward) {
  const std::size_t n = m.rows();
  std::vector<bool> seen(n, false);
  std::deque<std::size_t> todo{start};
  seen[start] = true;
  while (!todo.empty()) {
    const std::size_t u = todo.front();
    todo.pop_front();
    for (std::size_t v = 0; v < n; ++v) {
      if (v == u || seen[v]) continue;
      const double w = forward ? m(u, v) : m(v, u);
      if (w > 0.0) {
        seen[v] = true;
        todo.push_back(v);
      }
    }
  }
  return seen;
}

void check_irreducible_matrix(const Matrix& m) {
  const std::size_t n = m.rows();
  if (n == 0) throw StructuralError("empty chain");
  const auto fwd = reach(m, 0, true);
  const auto bwd = reach(m, 0, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (!fwd[i]) throw StructuralError("chain is reducible: state " + std::to_string(i) + " is unreachable from state 0");
    if (!bwd[i]) throw StructuralError("chain is reducible: state 0 is unreachable from state " + std::to_string(i));
  }
}

// GTH state reduction on the off-diagonal part of `m`.
std::vector<double> gth(const Matrix& m) {
  const std::size_t n = m.rows();
  if (n == 1) return {1.0};
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = i == j ? 0.0 : m(i, j);

  for (std::size_t k = n - 1; k >= 1; --k) {
    std::span<const double> pivot_row = a.row(k).first(k);
    const double s = kernels::sum(pivot_row);
    if (!(s > 0.0)) throw StructuralError("GTH elimination met a state with no path to lower states");
    for (std::size_t i = 0; i < k; ++i) {
      const double f = a(i, k) / s;
      a(i, k) = f;
      if (f != 0.0) kernels::axpy(f, pivot_row, a.row(i).first(k));
    }
  }

  std::vector<double> pi(n, 0.0);
  pi[0] = 1.0;
  for (std::size_t k = 1; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += pi[i] * a(i, k);
    pi[k] = acc;
  }
  kernels::scale(1.0 / kernels::sum(pi), pi);
  return pi;
}

}  // namespace

void check_irreducible(const RateMatrix& q) { check_irreducible_matrix(q.matrix()); }

Distribution steady_state(const RateMatrix& q) {
  check_irreducible(q);
  return Distribution(gth(q.matrix()));
}

Distribution stationary(const Matrix& p) {
  if (p.rows() != p.cols()) throw InvalidParameter("probability matrix must be square");
  check_irreducible_matrix(p);
  return Distribution(gth(p));
}

double balance_residual(const RateMatrix& q, std::span<const double> pi) {
  std::vector<double> out(q.size());
  kernels::vec_mat(pi, q.matrix().view(), out);
  return kernels::max_abs(out);
}

Matrix uniformize(const RateMatrix& q, std::optional<double> zeta) {
  const std::size_t n = q.size();
  double zmin = 0.0;
  for (std::size_t i = 0; i < n; ++i) zmin = std::max(zmin, std::fabs(q(i, i)));
  const double z = zeta.value_or(zmin);
  if (!(z > 0.0)) throw InvalidParameter("uniformization rate must be positive");
  if (z < zmin) throw InvalidParameter("uniformization rate below max |q_ii|");
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p(i, j) = (i == j ? 1.0 : 0.0) + q(i, j) / z;
  return p;
}

Matrix stochastic_complement(const Matrix& p, const Partition& part) {
  if (p.rows() != part.size()) throw InvalidParameter("partition does not match the matrix size");
  const auto& L = part.left();
  const auto& R = part.right();
  const std::size_t nl = L.size();
  const std::size_t nr = R.size();

  Matrix c(nl, nl);
  for (std::size_t a = 0; a < nl; ++a)
    for (std::size_t b = 0; b < nl; ++b) c(a, b) = p(L[a], L[b]);
  if (nr == 0) return c;

  // Every state of R must be able to leave R, otherwise I - P_RR is singular.
  {
    std::vector<bool> exits(p.rows(), false);
    std::deque<std::size_t> todo;
    for (std::size_t r : R) {
      for (std::size_t l : L)
        if (p(r, l) > 0.0) {
          exits[r] = true;
          todo.push_back(r);
          break;
        }
    }
    while (!todo.empty()) {
      const std::size_t u = todo.front();
      todo.pop_front();
      for (std::size_t r : R)
        if (!exits[r] && r != u && p(r, u) > 0.0) {
          exits[r] = true;
          todo.push_back(r);
        }
    }
    for (std::size_t r : R)
      if (!exits[r])
        throw StructuralError("I - P_RR is singular: state " + std::to_string(r) +
                              " belongs to a closed class inside R");
  }

  Eigen::MatrixXd i_minus_prr(nr, nr);
  Eigen::MatrixXd prl(nr, nl);
  Eigen::MatrixXd plr(nl, nr);
  for (std::size_t a = 0; a < nr; ++a) {
    for (std::size_t b = 0; b < nr; ++b) i_minus_prr(a, b) = (a == b ? 1.0 : 0.0) - p(R[a], R[b]);
    for (std::size_t b = 0; b < nl; ++b) prl(a, b) = p(R[a], L[b]);
  }
  for (std::size_t a = 0; a < nl; ++a)
    for (std::size_t b = 0; b < nr; ++b) plr(a, b) = p(L[a], R[b]);

  const Eigen::MatrixXd x = i_minus_prr.partialPivLu().solve(prl);
  const Eigen::MatrixXd fold = plr * x;
  for (std::size_t a = 0; a < nl; ++a)
    for (std::size_t b = 0; b < nl; ++b) c(a, b) += fold(a, b);
  return c;
}

namespace {

Distribution solve_folded(const RateMatrix& q, const Partition& part,
                          const std::vector<std::size_t>& return_of_right) {
  const auto& L = part.left();
  const std::size_t n = q.size();
  std::vector<std::size_t> local(n, 0);
  for (std::size_t a = 0; a < L.size(); ++a) local[L[a]] = a;

  Matrix g(L.size(), L.size());
  for (std::size_t a = 0; a < L.size(); ++a) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == L[a]) continue;
      const double rate = q(L[a], j);
      if (rate <= 0.0) continue;
      const std::size_t target = part.in_left(j) ? local[j] : local[return_of_right[j]];
      if (target != a) g(a, target) += rate;
    }
  }
  return steady_state(RateMatrix::from_rates(std::move(g)));
}

}  // namespace

Distribution fold_back_conditional(const RateMatrix& q, const Partition& part, std::size_t entry_state) {
  if (q.size() != part.size()) throw InvalidParameter("partition does not match the matrix size");
  if (entry_state >= q.size() || !part.in_left(entry_state))
    throw InvalidParameter("entry state must belong to L");
  for (std::size_t r : part.right())
    for (std::size_t l : part.left())
      if (l != entry_state && q(r, l) > 0.0)
        throw TheoremInapplicable("transition " + std::to_string(r) + " -> " + std::to_string(l) +
                                  " returns to L outside the entry state " + std::to_string(entry_state));
  std::vector<std::size_t> ret(q.size(), entry_state);
  return solve_folded(q, part, ret);
}

Distribution fold_back_conditional(const RateMatrix& q, const Partition& part) {
  if (q.size() != part.size()) throw InvalidParameter("partition does not match the matrix size");
  const std::size_t n = q.size();
  const auto& R = part.right();

  // Connected components of R (undirected, positive rates within R).
  std::vector<long> comp(n, -1);
  long ncomp = 0;
  for (std::size_t seed : R) {
    if (comp[seed] >= 0) continue;
    std::deque<std::size_t> todo{seed};
    comp[seed] = ncomp;
    while (!todo.empty()) {
      const std::size_t u = todo.front();
      todo.pop_front();
      for (std::size_t v : R)
        if (comp[v] < 0 && (q(u, v) > 0.0 || q(v, u) > 0.0)) {
          comp[v] = ncomp;
          todo.push_back(v);
        }
    }
    ++ncomp;
  }

  std::vector<long> entry(static_cast<std::size_t>(ncomp), -1);
  for (std::size_t r : R)
    for (std::size_t l : part.left()) {
      if (q(r, l) <= 0.0) continue;
      long& e = entry[static_cast<std::size_t>(comp[r])];
      if (e >= 0 && static_cast<std::size_t>(e) != l)
        throw TheoremInapplicable("a component of R returns to L through states " + std::to_string(e) +
                                  " and " + std::to_string(l));
      e = static_cast<long>(l);
    }

  std::vector<std::size_t> ret(n, 0);
  for (std::size_t r : R) {
    const long e = entry[static_cast<std::size_t>(comp[r])];
    if (e < 0) throw StructuralError("state " + std::to_string(r) + " in R never returns to L");
    ret[r] = static_cast<std::size_t>(e);
  }
  return solve_folded(q, part, ret);
}

}  // namespace vrf::ctmc
