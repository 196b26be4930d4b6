#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

// Dense fp64 inner loops used by the autodiff tape, the optimizer and the
// benchmark baseline. Each kernel has a scalar reference implementation and
// an AVX2/FMA variant; the active table is picked once from cpuid and can be
// forced to scalar with CASCADEQA_SIMD=scalar or set_isa().
//
// All matrices are row-major. Vectorized reductions do not reproduce the
// scalar summation order, so the two ISAs agree to roundoff, not bitwise.
// The exception is adagrad_update, which is element-wise and bit-identical.

namespace cascadeqa::kernels {

enum class Isa : std::uint8_t { Scalar = 0, Avx2 = 1 };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = W x, W is rows x cols
  void (*gemv)(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
  // dx += W^T dy
  void (*gemv_t_acc)(const double* w, std::size_t rows, std::size_t cols, const double* dy,
                     double* dx);
  // dW += dy x^T
  void (*ger_acc)(const double* dy, std::size_t rows, const double* x, std::size_t cols,
                  double* dw);
  // acc += g^2; theta -= lr * g / sqrt(acc)
  void (*adagrad_update)(double* theta, double* acc, const double* g, std::size_t n, double lr);
};

const KernelTable& scalar_table();
// Null when the translation unit was built without AVX2 support.
const KernelTable* avx2_table();

bool cpu_supports_avx2();
Isa active_isa();
// Falls back to scalar when the requested ISA is unavailable; returns the ISA in effect.
Isa set_isa(Isa isa);
std::string_view isa_name(Isa isa);
const KernelTable& table_for(Isa isa);

// Multiply-accumulate counter for the instrumented dense ops (dot, gemv,
// gemv_t_acc, ger_acc). Relaxed atomic; monotone within a process.
std::uint64_t mac_count();
void add_macs(std::uint64_t n);

// Dispatching front-ends.
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* dy, double* dx);
void ger_acc(const double* dy, std::size_t rows, const double* x, std::size_t cols, double* dw);
void adagrad_update(double* theta, double* acc, const double* g, std::size_t n, double lr);

}  // namespace cascadeqa::kernels
