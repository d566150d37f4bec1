#include <doctest.h>

#include <cmath>
#include <vector>

#include "eleatt/kernels.hpp"
#include "eleatt/rng.hpp"

using namespace eleatt;
using kernels::Isa;

namespace {

std::vector<double> random_vector(RngStream& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("kernel selection") {
  CHECK(kernels::isa_available(Isa::scalar));
  CHECK(kernels::parse_isa("scalar") == Isa::scalar);
  CHECK(kernels::parse_isa("avx2") == Isa::avx2);
  {
    kernels::ScopedIsa guard(Isa::scalar);
    CHECK(kernels::active().isa == Isa::scalar);
  }
  CHECK(kernels::active().isa == kernels::detect_isa());
}

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  const kernels::KernelTable* simd = kernels::avx2_table();
  if (simd == nullptr) {
    MESSAGE("AVX2 unavailable on this machine; equivalence not exercised");
    return;
  }
  const kernels::KernelTable& ref = kernels::scalar_table();
  RngStream rng(21);

  // Odd sizes hit every remainder path of the 4-wide loops.
  for (std::size_t n : {1u, 3u, 4u, 5u, 8u, 17u, 64u, 101u}) {
    const auto x = random_vector(rng, n), y = random_vector(rng, n);
    std::vector<double> r1(n), r2(n);
    ref.add(n, x.data(), y.data(), r1.data());
    simd->add(n, x.data(), y.data(), r2.data());
    CHECK(r1 == r2);
    ref.sub(n, x.data(), y.data(), r1.data());
    simd->sub(n, x.data(), y.data(), r2.data());
    CHECK(r1 == r2);
    ref.mul(n, x.data(), y.data(), r1.data());
    simd->mul(n, x.data(), y.data(), r2.data());
    CHECK(r1 == r2);
    std::vector<double> a1 = y, a2 = y;
    ref.axpy(n, 0.37, x.data(), a1.data());
    simd->axpy(n, 0.37, x.data(), a2.data());
    CHECK(a1 == a2);

    const kernels::AdamCoefficients k{0.9, 0.999, 1e-8, 0.005 / (1 - 0.9), 1 / (1 - 0.999)};
    std::vector<double> p1 = x, p2 = x, m1(n, 0.1), m2(n, 0.1), v1(n, 0.2), v2(n, 0.2);
    ref.adam(n, k, y.data(), p1.data(), m1.data(), v1.data());
    simd->adam(n, k, y.data(), p2.data(), m2.data(), v2.data());
    CHECK(p1 == p2);
    CHECK(m1 == m2);
    CHECK(v1 == v2);
  }

  for (auto [m, n, k] : {std::array<std::size_t, 3>{1, 1, 1}, {3, 5, 7}, {4, 8, 16}, {9, 13, 6}, {33, 17, 21}}) {
    const auto a = random_vector(rng, m * k), b = random_vector(rng, k * n);
    std::vector<double> c1(m * n), c2(m * n);
    ref.gemm_nn(m, n, k, a.data(), b.data(), c1.data(), false);
    simd->gemm_nn(m, n, k, a.data(), b.data(), c2.data(), false);
    CHECK(max_diff(c1, c2) < 1e-12);
    ref.gemm_nn(m, n, k, a.data(), b.data(), c1.data(), true);
    simd->gemm_nn(m, n, k, a.data(), b.data(), c2.data(), true);
    CHECK(max_diff(c1, c2) < 1e-12);

    const auto at = random_vector(rng, k * m);
    std::vector<double> d1(m * n, 0.5), d2(m * n, 0.5);
    ref.gemm_tn_acc(m, n, k, at.data(), b.data(), d1.data());
    simd->gemm_tn_acc(m, n, k, at.data(), b.data(), d2.data());
    CHECK(max_diff(d1, d2) < 1e-12);

    const auto bt = random_vector(rng, n * k);
    std::vector<double> e1(m * n, -0.5), e2(m * n, -0.5);
    ref.gemm_nt_acc(m, n, k, a.data(), bt.data(), e1.data());
    simd->gemm_nt_acc(m, n, k, a.data(), bt.data(), e2.data());
    CHECK(max_diff(e1, e2) < 1e-12);
  }
}
