// AVX2+FMA kernel variants. Compiled with -mavx2 -mfma on x86-64 only; the
// dispatcher never selects this table unless the CPU reports AVX2 support.
//
// Reductions run four accumulator lanes and fold them at the end, so they
// differ from the scalar reference by summation order (rounding) only.

#include "kernel_tables.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace hte::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double dot(const double* a, const double* b, std::size_t n) {
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
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
  double acc = hsum(acc0);
  for (; i < n; ++i) acc += a[i];
  return acc;
}

double sumsq(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(a + i);
    acc0 = _mm256_fmadd_pd(v, v, acc0);
  }
  double acc = hsum(acc0);
  for (; i < n; ++i) acc += a[i] * a[i];
  return acc;
}

double sumsq_diff(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc0 = _mm256_fmadd_pd(d, d, acc0);
  }
  double acc = hsum(acc0);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

inline void zero_row(double* c, std::size_t n) {
  const __m256d z = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) _mm256_storeu_pd(c + j, z);
  for (; j < n; ++j) c[j] = 0.0;
}

inline void fma_row(double a_scalar, const double* b_row, double* c_row, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a_scalar);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    _mm256_storeu_pd(c_row + j, _mm256_fmadd_pd(va, _mm256_loadu_pd(b_row + j), _mm256_loadu_pd(c_row + j)));
  }
  for (; j < n; ++j) c_row[j] += a_scalar * b_row[j];
}

void matmul_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* c_row = c + i * n;
    zero_row(c_row, n);
    for (std::size_t p = 0; p < k; ++p) {
      fma_row(a[i * k + p], b + p * n, c_row, n);
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      c[i * n + j] = dot(a_row, b + j * k, k);
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) zero_row(c + i * n, n);
  for (std::size_t p = 0; p < k; ++p) {
    const double* a_row = a + p * m;
    const double* b_row = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      fma_row(a_row[i], b_row, c + i * n, n);
    }
  }
}

const KernelTable kTable = {
    dot, sum, sumsq, sumsq_diff, axpy, scale, matmul_nn, matmul_nt, matmul_tn,
};

}  // namespace

const KernelTable* table() { return &kTable; }

}  // namespace hte::kernels::avx2

#else

namespace hte::kernels::avx2 {
const KernelTable* table() { return nullptr; }
}

#endif
