// Compiled with -mavx2 -mfma. Keep this TU free of inline library code that
// could leak AVX2 instructions into shared (COMDAT) symbols.
#include "cascadeqa/kernels/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace cascadeqa::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Four rows at a time so each load of x feeds four FMAs.
void gemv_avx2(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* w0 = w + r * cols;
    const double* w1 = w0 + cols;
    const double* w2 = w1 + cols;
    const double* w3 = w2 + cols;
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd();
    __m256d a3 = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d xv = _mm256_loadu_pd(x + c);
      a0 = _mm256_fmadd_pd(_mm256_loadu_pd(w0 + c), xv, a0);
      a1 = _mm256_fmadd_pd(_mm256_loadu_pd(w1 + c), xv, a1);
      a2 = _mm256_fmadd_pd(_mm256_loadu_pd(w2 + c), xv, a2);
      a3 = _mm256_fmadd_pd(_mm256_loadu_pd(w3 + c), xv, a3);
    }
    double s0 = hsum(a0);
    double s1 = hsum(a1);
    double s2 = hsum(a2);
    double s3 = hsum(a3);
    for (; c < cols; ++c) {
      s0 += w0[c] * x[c];
      s1 += w1[c] * x[c];
      s2 += w2[c] * x[c];
      s3 += w3[c] * x[c];
    }
    y[r] = s0;
    y[r + 1] = s1;
    y[r + 2] = s2;
    y[r + 3] = s3;
  }
  for (; r < rows; ++r) y[r] = dot_avx2(w + r * cols, x, cols);
}

void gemv_t_acc_avx2(const double* w, std::size_t rows, std::size_t cols, const double* dy,
                     double* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    axpy_avx2(g, w + r * cols, dx, cols);
  }
}

void ger_acc_avx2(const double* dy, std::size_t rows, const double* x, std::size_t cols,
                  double* dw) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    axpy_avx2(g, x, dw + r * cols, cols);
  }
}

// Separate mul/add (no FMA) and IEEE sqrt/div keep this bit-identical to the
// scalar reference.
void adagrad_update_avx2(double* theta, double* acc, const double* g, std::size_t n, double lr) {
  const __m256d vlr = _mm256_set1_pd(lr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d av = _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_mul_pd(gv, gv));
    _mm256_storeu_pd(acc + i, av);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, gv), _mm256_sqrt_pd(av));
    _mm256_storeu_pd(theta + i, _mm256_sub_pd(_mm256_loadu_pd(theta + i), step));
  }
  for (; i < n; ++i) {
    const double gi = g[i];
    const double sq = gi * gi;
    acc[i] = acc[i] + sq;
    theta[i] = theta[i] - lr * gi / __builtin_sqrt(acc[i]);
  }
}

const KernelTable kAvx2Table{dot_avx2,        axpy_avx2,    gemv_avx2,
                            gemv_t_acc_avx2, ger_acc_avx2, adagrad_update_avx2};

}  // namespace

const KernelTable* avx2_table() { return &kAvx2Table; }

}  // namespace cascadeqa::kernels

#else

namespace cascadeqa::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace cascadeqa::kernels

#endif
