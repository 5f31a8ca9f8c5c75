#pragma once

// Dense double-precision kernels used by the Markov-chain solvers.
//
// Every kernel has a portable scalar reference implementation and, where the
// build and the CPU allow it, a vectorized variant (AVX2+FMA on x86-64, NEON
// on AArch64). The variant is picked once at startup; `set_isa` exists so the
// test suite can pin a variant and compare it against the reference.

#include <cstddef>
#include <span>
#include <string_view>

namespace vrf::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

/// Best variant supported by both this build and the running CPU.
Isa detected_isa();

/// Variant currently used by the free functions below. Defaults to
/// detected_isa(), unless VRF_ISA=scalar is set in the environment.
Isa active_isa();

/// Selects a variant. Returns false (and leaves the selection unchanged)
/// when the variant is unavailable.
bool set_isa(Isa isa);

/// Raw row-major matrix view: `rows` x `cols`, row stride `stride`.
struct MatrixView {
  const double* data;
  std::size_t rows;
  std::size_t cols;
  std::size_t stride;
};

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*max_abs)(const double* x, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*scale)(double alpha, double* x, std::size_t n);
  // y = x^T A  (x has A.rows entries, y has A.cols entries)
  void (*vec_mat)(const double* x, MatrixView a, double* y);
};

const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in
const KernelTable* neon_table();  // nullptr when not compiled in
const KernelTable& table();       // active table

inline double dot(std::span<const double> a, std::span<const double> b) {
  return table().dot(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

inline double sum(std::span<const double> x) { return table().sum(x.data(), x.size()); }

inline double max_abs(std::span<const double> x) { return table().max_abs(x.data(), x.size()); }

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  table().axpy(alpha, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

inline void scale(double alpha, std::span<double> x) { table().scale(alpha, x.data(), x.size()); }

inline void vec_mat(std::span<const double> x, MatrixView a, std::span<double> y) {
  table().vec_mat(x.data(), a, y.data());
}

}  // namespace vrf::kernels
