#include "vrf/kernels.hpp"

#include <cmath>

namespace vrf::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double max_abs_scalar(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::fmax(m, std::fabs(x[i]));
  return m;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void vec_mat_scalar(const double* x, MatrixView a, double* y) {
  for (std::size_t j = 0; j < a.cols; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    axpy_scalar(xi, a.data + i * a.stride, y, a.cols);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{dot_scalar, sum_scalar, max_abs_scalar,
                             axpy_scalar, scale_scalar, vec_mat_scalar};
  return t;
}

}  // namespace vrf::kernels
