// Compiled with -mavx2 -mfma; only reached after a CPUID check.

#include <immintrin.h>

#include <algorithm>
#include <cstring>
#include <vector>

#include "kernels_impl.hpp"

namespace tcgu::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

constexpr std::size_t kMr = 6;
constexpr std::size_t kNr = 8;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 72;

// 6x8 register tile: acc = sum_l ap[l*6 + r] * bp[l*8 + j] over a packed
// k-panel, then added into C for the valid rows/cols.
inline void micro_tile(std::size_t kc, const double* ap, const double* bp, double* c,
                       std::size_t ldc, std::size_t rows, std::size_t cols) {
  __m256d acc[kMr][2];
  for (std::size_t r = 0; r < kMr; ++r) acc[r][0] = acc[r][1] = _mm256_setzero_pd();
  for (std::size_t l = 0; l < kc; ++l) {
    const __m256d b0 = _mm256_loadu_pd(bp + l * kNr);
    const __m256d b1 = _mm256_loadu_pd(bp + l * kNr + 4);
    for (std::size_t r = 0; r < kMr; ++r) {
      const __m256d av = _mm256_broadcast_sd(ap + l * kMr + r);
      acc[r][0] = _mm256_fmadd_pd(av, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_pd(av, b1, acc[r][1]);
    }
  }
  if (rows == kMr && cols == kNr) {
    for (std::size_t r = 0; r < kMr; ++r) {
      double* cr = c + r * ldc;
      _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), acc[r][0]));
      _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), acc[r][1]));
    }
    return;
  }
  alignas(32) double tile[kMr][kNr];
  for (std::size_t r = 0; r < kMr; ++r) {
    _mm256_store_pd(tile[r], acc[r][0]);
    _mm256_store_pd(tile[r] + 4, acc[r][1]);
  }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) c[r * ldc + j] += tile[r][j];
}

// C(m,n) += A(m,k) B(k,n), where A(i,l) = a[i*ai + l*al] and
// B(l,j) = b[l*bl + j*bj]. Blocked and packed so both panels are read
// contiguously by the micro tile.
void gemm_strided(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t ai,
                  std::size_t al, const double* b, std::size_t bl, std::size_t bj, double* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * m * n);
  if (m == 0 || n == 0 || k == 0) return;
  const std::size_t npanels = (n + kNr - 1) / kNr;
  std::vector<double> bpack(npanels * kKc * kNr);
  std::vector<double> apack(((kMc + kMr - 1) / kMr) * kKc * kMr);
  for (std::size_t l0 = 0; l0 < k; l0 += kKc) {
    const std::size_t kc = std::min(kKc, k - l0);
    for (std::size_t p = 0; p < npanels; ++p) {
      double* dst = bpack.data() + p * kKc * kNr;
      const std::size_t j0 = p * kNr;
      const std::size_t w = std::min(kNr, n - j0);
      for (std::size_t l = 0; l < kc; ++l) {
        const double* src = b + (l0 + l) * bl + j0 * bj;
        std::size_t j = 0;
        for (; j < w; ++j) dst[l * kNr + j] = src[j * bj];
        for (; j < kNr; ++j) dst[l * kNr + j] = 0.0;
      }
    }
    for (std::size_t i0 = 0; i0 < m; i0 += kMc) {
      const std::size_t mc = std::min(kMc, m - i0);
      const std::size_t mpanels = (mc + kMr - 1) / kMr;
      for (std::size_t q = 0; q < mpanels; ++q) {
        double* dst = apack.data() + q * kKc * kMr;
        for (std::size_t r = 0; r < kMr; ++r) {
          const std::size_t i = i0 + q * kMr + r;
          if (i < m) {
            const double* src = a + i * ai + l0 * al;
            for (std::size_t l = 0; l < kc; ++l) dst[l * kMr + r] = src[l * al];
          } else {
            for (std::size_t l = 0; l < kc; ++l) dst[l * kMr + r] = 0.0;
          }
        }
      }
      for (std::size_t p = 0; p < npanels; ++p) {
        const std::size_t j0 = p * kNr;
        const std::size_t cols = std::min(kNr, n - j0);
        const double* bp = bpack.data() + p * kKc * kNr;
        for (std::size_t q = 0; q < mpanels; ++q) {
          const std::size_t row0 = i0 + q * kMr;
          micro_tile(kc, apack.data() + q * kKc * kMr, bp, c + row0 * n + j0, n,
                     std::min(kMr, m - row0), cols);
        }
      }
    }
  }
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_squares(const double* x, std::size_t n) { return dot(x, x, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
  gemm_strided(m, n, k, a, k, 1, b, n, 1, c, accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
  gemm_strided(m, n, k, a, 1, m, b, n, 1, c, accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
  gemm_strided(m, n, k, a, k, 1, b, 1, k, c, accumulate);
}

}  // namespace tcgu::kernels::avx2
