// Backend selection and dispatch.

#include "hte/kernels/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "kernel_tables.hpp"

namespace hte::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend resolve_initial_backend() {
  if (const char* env = std::getenv("HTEBENCH_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(env, "avx2") == 0 && backend_available(Backend::Avx2)) return Backend::Avx2;
  }
  return backend_available(Backend::Avx2) ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<const KernelTable*> g_active{nullptr};
std::atomic<Backend> g_backend{Backend::Scalar};

const KernelTable* activate(Backend backend) {
  const KernelTable* t = &table_for(backend);
  g_backend.store(backend, std::memory_order_relaxed);
  g_active.store(t, std::memory_order_release);
  return t;
}

inline const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) t = activate(resolve_initial_backend());
  return *t;
}

}  // namespace

bool backend_available(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
      return avx2::table() != nullptr && cpu_has_avx2();
  }
  return false;
}

const KernelTable& table_for(Backend backend) {
  if (backend == Backend::Avx2) {
    const KernelTable* t = avx2::table();
    if (t == nullptr) throw std::runtime_error("AVX2 kernels not compiled into this binary");
    return *t;
  }
  return scalar::kTable;
}

Backend active_backend() {
  active();
  return g_backend.load(std::memory_order_relaxed);
}

const char* backend_name(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
  }
  return "unknown";
}

void force_backend(Backend backend) {
  if (!backend_available(backend)) {
    throw std::runtime_error(std::string("kernel backend unavailable: ") + backend_name(backend));
  }
  activate(backend);
}

double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
double sum(const double* a, std::size_t n) { return active().sum(a, n); }
double sumsq(const double* a, std::size_t n) { return active().sumsq(a, n); }
double sumsq_diff(const double* a, const double* b, std::size_t n) { return active().sumsq_diff(a, b, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy(alpha, x, y, n); }
void scale(double alpha, double* x, std::size_t n) { active().scale(alpha, x, n); }
void matmul_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  active().matmul_nn(a, b, c, m, k, n);
}
void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  active().matmul_nt(a, b, c, m, k, n);
}
void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  active().matmul_tn(a, b, c, m, k, n);
}

}  // namespace hte::kernels
