#pragma once

#include <cstddef>
#include <string_view>

// Inner-loop kernels behind Tensor2 arithmetic and the Adam update. Every
// kernel has a portable scalar reference; x86-64 builds add an AVX2/FMA
// variant selected at runtime when the CPU supports it.

namespace eleatt::kernels {

enum class Isa { scalar, avx2 };

struct AdamCoefficients {
  double beta1;
  double beta2;
  double epsilon;
  double step_size;     // lr / (1 - beta1^t)
  double v_correction;  // 1 / (1 - beta2^t)
};

struct KernelTable {
  Isa isa;
  std::string_view name;

  // c[m x n] = a[m x k] * b[k x n]  (accumulate=false) or c += a*b.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate);
  // c[m x n] += a^T * b where a is k x m.
  void (*gemm_tn_acc)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                      const double* b, double* c);
  // c[m x n] += a * b^T where a is m x k and b is n x k.
  void (*gemm_nt_acc)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                      const double* b, double* c);

  void (*add)(std::size_t n, const double* x, const double* y, double* out);
  void (*sub)(std::size_t n, const double* x, const double* y, double* out);
  void (*mul)(std::size_t n, const double* x, const double* y, double* out);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // In-place bias-corrected Adam update over n parameters.
  void (*adam)(std::size_t n, const AdamCoefficients& k, const double* grad, double* param,
               double* m, double* v);
};

const KernelTable& scalar_table();
/// nullptr when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

bool isa_available(Isa isa);
/// Best ISA the running CPU supports, unless ELEATT_ISA=scalar|avx2 overrides.
Isa detect_isa();

/// Kernel table used by the tensor ops on every thread.
const KernelTable& active();
/// Forces an ISA; throws ConfigError when it is unavailable.
void select(Isa isa);
Isa parse_isa(std::string_view name);

/// RAII override of the active ISA (used by the equivalence tests and benches).
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa);
  ~ScopedIsa();
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

}  // namespace eleatt::kernels
