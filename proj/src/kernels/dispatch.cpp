#include "cascadeqa/kernels/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace cascadeqa::kernels {
namespace {

std::atomic<std::uint64_t> g_macs{0};

Isa detect_default() {
  if (const char* env = std::getenv("CASCADEQA_SIMD"); env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Isa::Scalar;
  }
  return cpu_supports_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&table_for(detect_default())};
  return slot;
}

inline const KernelTable& active() { return *active_slot().load(std::memory_order_relaxed); }

}  // namespace

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  if (avx2_table() == nullptr) return false;
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& table_for(Isa isa) {
  if (isa == Isa::Avx2 && cpu_supports_avx2()) return *avx2_table();
  return scalar_table();
}

Isa active_isa() { return &active() == &scalar_table() ? Isa::Scalar : Isa::Avx2; }

Isa set_isa(Isa isa) {
  active_slot().store(&table_for(isa), std::memory_order_relaxed);
  return active_isa();
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

std::uint64_t mac_count() { return g_macs.load(std::memory_order_relaxed); }
void add_macs(std::uint64_t n) { g_macs.fetch_add(n, std::memory_order_relaxed); }

double dot(const double* a, const double* b, std::size_t n) {
  add_macs(n);
  return active().dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy(alpha, x, y, n); }

void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y) {
  add_macs(rows * cols);
  active().gemv(w, rows, cols, x, y);
}

void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* dy, double* dx) {
  add_macs(rows * cols);
  active().gemv_t_acc(w, rows, cols, dy, dx);
}

void ger_acc(const double* dy, std::size_t rows, const double* x, std::size_t cols, double* dw) {
  add_macs(rows * cols);
  active().ger_acc(dy, rows, x, cols, dw);
}

void adagrad_update(double* theta, double* acc, const double* g, std::size_t n, double lr) {
  active().adagrad_update(theta, acc, g, n, lr);
}

}  // namespace cascadeqa::kernels
