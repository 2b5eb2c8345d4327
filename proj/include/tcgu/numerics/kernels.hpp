#pragma once

// Inner-loop arithmetic kernels. Each kernel has a portable scalar reference
// and an AVX2/FMA variant; the active table is chosen once per process from
// CPUID, or forced with TCGU_SIMD=scalar. All matrices are row-major with the
// leading dimension equal to the column count.

#include <cstddef>
#include <string_view>

namespace tcgu::kernels {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  std::string_view name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// C(m,n) = A(m,k) * B(k,n), or C += ... when accumulate is set.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c, bool accumulate);
  /// C(m,n) = A(m,k) * B(n,k)^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c, bool accumulate);
  /// C(m,n) = A(k,m)^T * B(k,n)
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c, bool accumulate);
};

const KernelTable& scalar_table() noexcept;

/// nullptr when the build has no AVX2 variant.
const KernelTable* avx2_table() noexcept;

/// True when the running CPU reports AVX2 and FMA.
bool cpu_has_avx2() noexcept;

/// The table used by all numerics code in this process.
const KernelTable& active() noexcept;

/// Test hook: pin the active table. Throws if the ISA is unavailable.
void force(Isa isa);

}  // namespace tcgu::kernels
