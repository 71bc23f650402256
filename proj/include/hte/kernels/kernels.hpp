#pragma once

// Data-parallel arithmetic kernels used by the learners, DGPs and metrics.
//
// Every kernel exists as a scalar reference implementation and, on x86-64
// hardware with AVX2+FMA, as a vectorized variant. The backend is selected
// once at startup (best available, overridable via the HTEBENCH_KERNELS
// environment variable or force_backend()), so a given process always runs
// one backend and repeated runs on the same machine are bit-identical.
// Scalar and SIMD variants are equivalence-tested against each other; they
// may differ by reassociation rounding in reductions and one rounding per
// fused multiply-add, never more.

#include <cstddef>
#include <string>

namespace hte::kernels {

enum class Backend { Scalar, Avx2 };

// Backend chosen for this process (resolved on first use).
Backend active_backend();
const char* backend_name(Backend backend);
bool backend_available(Backend backend);
// Test hook; throws std::runtime_error if the backend is unsupported here.
void force_backend(Backend backend);

// Reductions.
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
double sumsq(const double* a, std::size_t n);
// Sum of squared differences; the RMSE/MSE workhorse.
double sumsq_diff(const double* a, const double* b, std::size_t n);

// Elementwise updates.
void axpy(double alpha, const double* x, double* y, std::size_t n);  // y += alpha*x
void scale(double alpha, double* x, std::size_t n);                  // x *= alpha

// Row-major matrix products, C overwritten.
// nn: C(m,n) = A(m,k) * B(k,n)
// nt: C(m,n) = A(m,k) * B(n,k)^T
// tn: C(m,n) = A(k,m)^T * B(k,n)
void matmul_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);

// Function table; one entry per kernel, used by the dispatcher and the
// scalar/SIMD equivalence tests.
struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*sumsq)(const double*, std::size_t);
  double (*sumsq_diff)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  void (*matmul_nn)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);
  void (*matmul_nt)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);
  void (*matmul_tn)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);
};

const KernelTable& table_for(Backend backend);

}  // namespace hte::kernels
