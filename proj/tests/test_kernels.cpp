#include <doctest.h>

#include <cmath>
#include <vector>

#include "hte/common/rng.hpp"
#include "hte/kernels/kernels.hpp"

using namespace hte;

namespace {

std::vector<double> random_vector(std::size_t n, rng::Rng& stream, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * stream.normal();
  return v;
}

bool close(double a, double b, double rel = 1e-12) {
  return std::abs(a - b) <= rel * (1.0 + std::abs(a) + std::abs(b));
}

}  // namespace

TEST_CASE("scalar and simd kernel variants agree") {
  if (!kernels::backend_available(kernels::Backend::Avx2)) {
    MESSAGE("AVX2 unavailable; dispatch falls back to scalar");
    return;
  }
  const auto& scalar = kernels::table_for(kernels::Backend::Scalar);
  const auto& simd = kernels::table_for(kernels::Backend::Avx2);

  rng::Rng stream(42);
  // Deliberately awkward lengths to exercise the vector remainders.
  for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 31u, 64u, 257u, 1000u}) {
    const auto a = random_vector(n, stream);
    const auto b = random_vector(n, stream);

    CHECK(close(scalar.dot(a.data(), b.data(), n), simd.dot(a.data(), b.data(), n)));
    CHECK(close(scalar.sum(a.data(), n), simd.sum(a.data(), n)));
    CHECK(close(scalar.sumsq(a.data(), n), simd.sumsq(a.data(), n)));
    CHECK(close(scalar.sumsq_diff(a.data(), b.data(), n), simd.sumsq_diff(a.data(), b.data(), n)));

    // axpy may differ by one rounding per element (FMA contraction).
    auto y_scalar = b;
    auto y_simd = b;
    scalar.axpy(0.37, a.data(), y_scalar.data(), n);
    simd.axpy(0.37, a.data(), y_simd.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(close(y_scalar[i], y_simd[i], 1e-15));

    // scale is a single multiply per element and must match bitwise.
    auto z_scalar = a;
    auto z_simd = a;
    scalar.scale(-1.25, z_scalar.data(), n);
    simd.scale(-1.25, z_simd.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(z_scalar[i] == z_simd[i]);
  }
}

TEST_CASE("matmul variants agree across backends and match a naive oracle") {
  rng::Rng stream(7);
  const std::size_t m = 13, k = 21, n = 9;
  const auto a = random_vector(m * k, stream);
  const auto b_nn = random_vector(k * n, stream);
  const auto b_nt = random_vector(n * k, stream);
  const auto a_tn = random_vector(k * m, stream);

  std::vector<double> naive(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b_nn[p * n + j];
      naive[i * n + j] = acc;
    }
  }

  auto check_backend = [&](const kernels::KernelTable& table) {
    std::vector<double> c(m * n, -1.0);
    table.matmul_nn(a.data(), b_nn.data(), c.data(), m, k, n);
    for (std::size_t i = 0; i < m * n; ++i) CHECK(close(c[i], naive[i]));

    // nt: against nn applied to the explicit transpose.
    std::vector<double> b_t(k * n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < k; ++p) b_t[p * n + j] = b_nt[j * k + p];
    }
    std::vector<double> c_nt(m * n, -1.0), c_ref(m * n, -1.0);
    table.matmul_nt(a.data(), b_nt.data(), c_nt.data(), m, k, n);
    kernels::table_for(kernels::Backend::Scalar).matmul_nn(a.data(), b_t.data(), c_ref.data(), m, k, n);
    for (std::size_t i = 0; i < m * n; ++i) CHECK(close(c_nt[i], c_ref[i]));

    // tn likewise.
    std::vector<double> a_t(m * k);
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t i = 0; i < m; ++i) a_t[i * k + p] = a_tn[p * m + i];
    }
    std::vector<double> c_tn(m * n, -1.0), c_ref2(m * n, -1.0);
    table.matmul_tn(a_tn.data(), b_nn.data(), c_tn.data(), m, k, n);
    kernels::table_for(kernels::Backend::Scalar)
        .matmul_nn(a_t.data(), b_nn.data(), c_ref2.data(), m, k, n);
    for (std::size_t i = 0; i < m * n; ++i) CHECK(close(c_tn[i], c_ref2[i]));
  };

  check_backend(kernels::table_for(kernels::Backend::Scalar));
  if (kernels::backend_available(kernels::Backend::Avx2)) {
    check_backend(kernels::table_for(kernels::Backend::Avx2));
  }
}

TEST_CASE("backend dispatch is explicit and sticky") {
  const auto original = kernels::active_backend();
  kernels::force_backend(kernels::Backend::Scalar);
  CHECK(kernels::active_backend() == kernels::Backend::Scalar);
  const double v[] = {1.0, 2.0, 3.0};
  CHECK(kernels::sum(v, 3) == 6.0);
  kernels::force_backend(original);
  CHECK(kernels::active_backend() == original);
}
