// Compiled with -mavx2 -mfma. Only reached through avx2_table() after a
// runtime CPU check.
#include "eleatt/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace eleatt::kernels {
namespace {

constexpr std::size_t kLanes = 4;

// GEMM uses FMA, so results differ from the scalar reference by rounding
// only. The elementwise kernels avoid FMA and match the reference bitwise.

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
  const std::size_t nv = n - n % kLanes;
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    }
    const double* ai = a + i * k;
    std::size_t p = 0;
    // Two rank-1 updates per pass halve the loads/stores of c.
    for (; p + 1 < k; p += 2) {
      const __m256d a0 = _mm256_set1_pd(ai[p]);
      const __m256d a1 = _mm256_set1_pd(ai[p + 1]);
      const double* b0 = b + p * n;
      const double* b1 = b0 + n;
      std::size_t j = 0;
      for (; j < nv; j += kLanes) {
        __m256d acc = _mm256_loadu_pd(ci + j);
        acc = _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j), acc);
        acc = _mm256_fmadd_pd(a1, _mm256_loadu_pd(b1 + j), acc);
        _mm256_storeu_pd(ci + j, acc);
      }
      for (; j < n; ++j) ci[j] = std::fma(ai[p + 1], b1[j], std::fma(ai[p], b0[j], ci[j]));
    }
    for (; p < k; ++p) {
      const __m256d a0 = _mm256_set1_pd(ai[p]);
      const double* b0 = b + p * n;
      std::size_t j = 0;
      for (; j < nv; j += kLanes) {
        _mm256_storeu_pd(ci + j,
                         _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j), _mm256_loadu_pd(ci + j)));
      }
      for (; j < n; ++j) ci[j] = std::fma(ai[p], b0[j], ci[j]);
    }
  }
}

void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                 double* c) {
  const std::size_t nv = n - n % kLanes;
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const __m256d av = _mm256_set1_pd(ap[i]);
      double* ci = c + i * n;
      std::size_t j = 0;
      for (; j < nv; j += kLanes) {
        _mm256_storeu_pd(ci + j,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j), _mm256_loadu_pd(ci + j)));
      }
      for (; j < n; ++j) ci[j] = std::fma(ap[i], bp[j], ci[j]);
    }
  }
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void gemm_nt_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                 double* c) {
  const std::size_t kv = k - k % kLanes;
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      __m256d acc = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p < kv; p += kLanes) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(ai + p), _mm256_loadu_pd(bj + p), acc);
      }
      double s = hsum(acc);
      for (; p < k; ++p) s = std::fma(ai[p], bj[p], s);
      c[i * n + j] += s;
    }
  }
}

template <typename VecOp, typename ScalarOp>
inline void binary(std::size_t n, const double* x, const double* y, double* out, VecOp vop,
                   ScalarOp sop) {
  const std::size_t nv = n - n % kLanes;
  std::size_t i = 0;
  for (; i < nv; i += kLanes) {
    _mm256_storeu_pd(out + i, vop(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = sop(x[i], y[i]);
}

void add(std::size_t n, const double* x, const double* y, double* out) {
  binary(
      n, x, y, out, [](__m256d p, __m256d q) { return _mm256_add_pd(p, q); },
      [](double p, double q) { return p + q; });
}

void sub(std::size_t n, const double* x, const double* y, double* out) {
  binary(
      n, x, y, out, [](__m256d p, __m256d q) { return _mm256_sub_pd(p, q); },
      [](double p, double q) { return p - q; });
}

void mul(std::size_t n, const double* x, const double* y, double* out) {
  binary(
      n, x, y, out, [](__m256d p, __m256d q) { return _mm256_mul_pd(p, q); },
      [](double p, double q) { return p * q; });
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  const std::size_t nv = n - n % kLanes;
  std::size_t i = 0;
  for (; i < nv; i += kLanes) {
    const __m256d prod = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void adam(std::size_t n, const AdamCoefficients& k, const double* grad, double* param, double* m,
          double* v) {
  const double one_minus_b1 = 1.0 - k.beta1;
  const double one_minus_b2 = 1.0 - k.beta2;
  const __m256d b1 = _mm256_set1_pd(k.beta1);
  const __m256d b2 = _mm256_set1_pd(k.beta2);
  const __m256d c1 = _mm256_set1_pd(one_minus_b1);
  const __m256d c2 = _mm256_set1_pd(one_minus_b2);
  const __m256d eps = _mm256_set1_pd(k.epsilon);
  const __m256d step = _mm256_set1_pd(k.step_size);
  const __m256d vcorr = _mm256_set1_pd(k.v_correction);
  const std::size_t nv = n - n % kLanes;
  std::size_t i = 0;
  for (; i < nv; i += kLanes) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi =
        _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(c1, g));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(c2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, vcorr)), eps);
    const __m256d delta = _mm256_div_pd(_mm256_mul_pd(step, mi), denom);
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), delta));
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = k.beta1 * m[i] + one_minus_b1 * g;
    v[i] = k.beta2 * v[i] + one_minus_b2 * (g * g);
    const double denom = std::sqrt(v[i] * k.v_correction) + k.epsilon;
    param[i] = param[i] - k.step_size * m[i] / denom;
  }
}

}  // namespace

const KernelTable& avx2_table_unchecked() {
  static const KernelTable table{Isa::avx2, "avx2", gemm_nn, gemm_tn_acc, gemm_nt_acc,
                                 add,       sub,    mul,     axpy,        adam};
  return table;
}

}  // namespace eleatt::kernels
