#include "cascadeqa/kernels/kernels.hpp"

#include <cmath>

namespace cascadeqa::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(w + r * cols, x, cols);
}

void gemv_t_acc_scalar(const double* w, std::size_t rows, std::size_t cols, const double* dy,
                       double* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    axpy_scalar(g, w + r * cols, dx, cols);
  }
}

void ger_acc_scalar(const double* dy, std::size_t rows, const double* x, std::size_t cols,
                    double* dw) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    axpy_scalar(g, x, dw + r * cols, cols);
  }
}

void adagrad_update_scalar(double* theta, double* acc, const double* g, std::size_t n, double lr) {
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    const double sq = gi * gi;
    acc[i] = acc[i] + sq;
    theta[i] = theta[i] - lr * gi / std::sqrt(acc[i]);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{dot_scalar,        axpy_scalar,    gemv_scalar,
                                 gemv_t_acc_scalar, ger_acc_scalar, adagrad_update_scalar};
  return table;
}

}  // namespace cascadeqa::kernels
