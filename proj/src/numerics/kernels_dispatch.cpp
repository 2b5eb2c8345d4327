#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "kernels_impl.hpp"
#include "tcgu/numerics/kernels.hpp"

namespace tcgu::kernels {
namespace {

constexpr KernelTable kScalar{
    Isa::kScalar,      "scalar",          &scalar::dot,     &scalar::sum_squares,
    &scalar::axpy,     &scalar::gemm_nn,  &scalar::gemm_nt, &scalar::gemm_tn,
};

#if defined(TCGU_HAVE_AVX2)
constexpr KernelTable kAvx2{
    Isa::kAvx2,      "avx2",          &avx2::dot,     &avx2::sum_squares,
    &avx2::axpy,     &avx2::gemm_nn,  &avx2::gemm_nt, &avx2::gemm_tn,
};
#endif

const KernelTable* select_default() {
  if (const char* env = std::getenv("TCGU_SIMD"); env && std::string_view(env) == "scalar") {
    return &kScalar;
  }
  if (const KernelTable* t = avx2_table(); t && cpu_has_avx2()) return t;
  return &kScalar;
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> table{select_default()};
  return table;
}

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

const KernelTable* avx2_table() noexcept {
#if defined(TCGU_HAVE_AVX2)
  return &kAvx2;
#else
  return nullptr;
#endif
}

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& active() noexcept { return *slot().load(std::memory_order_relaxed); }

void force(Isa isa) {
  if (isa == Isa::kScalar) {
    slot().store(&kScalar);
    return;
  }
  const KernelTable* t = avx2_table();
  if (!t || !cpu_has_avx2()) throw std::runtime_error("AVX2 kernels unavailable on this host");
  slot().store(t);
}

}  // namespace tcgu::kernels
