// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; callers must consult cpu_has_avx2() before dispatching here.

#include <cstring>
#include <immintrin.h>

#include "hiersign/kernels.hpp"

namespace hiersign::kernels {
namespace {

void gemm_nn(int m, int n, int k, const double* a, int lda, const double* b,
             int ldb, double* c, int ldc, bool accumulate) {
  const int n4 = n & ~3;
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * ldc;
    if (!accumulate) std::memset(crow, 0, sizeof(double) * n);
    const double* arow = a + static_cast<std::size_t>(i) * lda;
    for (int s = 0; s < k; ++s) {
      const __m256d av = _mm256_set1_pd(arow[s]);
      const double* brow = b + static_cast<std::size_t>(s) * ldb;
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d cj = _mm256_loadu_pd(crow + j);
        cj = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cj);
        _mm256_storeu_pd(crow + j, cj);
      }
      for (; j < n; ++j) crow[j] += arow[s] * brow[j];
    }
  }
}

void gemm_tn(int m, int n, int k, const double* a, int lda, const double* b,
             int ldb, double* c, int ldc, bool accumulate) {
  if (!accumulate) {
    for (int i = 0; i < m; ++i)
      std::memset(c + static_cast<std::size_t>(i) * ldc, 0, sizeof(double) * n);
  }
  const int n4 = n & ~3;
  for (int s = 0; s < k; ++s) {
    const double* arow = a + static_cast<std::size_t>(s) * lda;
    const double* brow = b + static_cast<std::size_t>(s) * ldb;
    for (int i = 0; i < m; ++i) {
      const __m256d av = _mm256_set1_pd(arow[i]);
      double* crow = c + static_cast<std::size_t>(i) * ldc;
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d cj = _mm256_loadu_pd(crow + j);
        cj = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cj);
        _mm256_storeu_pd(crow + j, cj);
      }
      for (; j < n; ++j) crow[j] += arow[i] * brow[j];
    }
  }
}

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

void gemm_nt(int m, int n, int k, const double* a, int lda, const double* b,
             int ldb, double* c, int ldc, bool accumulate) {
  const int k4 = k & ~3;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * lda;
    double* crow = c + static_cast<std::size_t>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * ldb;
      __m256d acc = _mm256_setzero_pd();
      int s = 0;
      for (; s < k4; s += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(arow + s),
                              _mm256_loadu_pd(brow + s), acc);
      double dot = hsum(acc);
      for (; s < k; ++s) dot += arow[s] * brow[s];
      crow[j] = accumulate ? crow[j] + dot : dot;
    }
  }
}

void axpy(int n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  const int n4 = n & ~3;
  int i = 0;
  for (; i < n4; i += 4) {
    __m256d yi = _mm256_loadu_pd(y + i);
    yi = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yi);
    _mm256_storeu_pd(y + i, yi);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double l1_norm(int n, const double* x) {
  const __m256d absmask =
      _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  __m256d acc = _mm256_setzero_pd();
  const int n4 = n & ~3;
  int i = 0;
  for (; i < n4; i += 4)
    acc = _mm256_add_pd(acc, _mm256_and_pd(absmask, _mm256_loadu_pd(x + i)));
  double total = hsum(acc);
  for (; i < n; ++i) total += x[i] < 0.0 ? -x[i] : x[i];
  return total;
}

void sign_pm1(int n, const double* x, std::int8_t* s) {
  // movemask over 4 lanes -> 4 packed sign bytes via a 16-entry table.
  static const std::uint32_t lut[16] = {
      0x01010101u, 0x010101FFu, 0x0101FF01u, 0x0101FFFFu,
      0x01FF0101u, 0x01FF01FFu, 0x01FFFF01u, 0x01FFFFFFu,
      0xFF010101u, 0xFF0101FFu, 0xFF01FF01u, 0xFF01FFFFu,
      0xFFFF0101u, 0xFFFF01FFu, 0xFFFFFF01u, 0xFFFFFFFFu,
  };
  const __m256d zero = _mm256_setzero_pd();
  const int n4 = n & ~3;
  int i = 0;
  for (; i < n4; i += 4) {
    const int m =
        _mm256_movemask_pd(_mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_LT_OQ));
    std::uint32_t packed = lut[m];
    std::memcpy(s + i, &packed, 4);
  }
  for (; i < n; ++i) s[i] = x[i] < 0.0 ? -1 : 1;
}

void vote_accumulate(int n, const std::int8_t* s, std::int16_t* acc) {
  const int n16 = n & ~15;
  int i = 0;
  for (; i < n16; i += 16) {
    const __m128i s8 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(s + i));
    const __m256i s16 = _mm256_cvtepi8_epi16(s8);
    __m256i a = _mm256_loadu_si256(reinterpret_cast<__m256i*>(acc + i));
    a = _mm256_add_epi16(a, s16);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(acc + i), a);
  }
  for (; i < n; ++i) acc[i] = static_cast<std::int16_t>(acc[i] + s[i]);
}

void sign_step(int n, double mu, const std::int8_t* s, double* v) {
  // mu * (+/-1) is exact, so this matches the scalar kernel bit for bit.
  const __m256d muv = _mm256_set1_pd(mu);
  const int n4 = n & ~3;
  int i = 0;
  for (; i < n4; i += 4) {
    std::int32_t tmp;
    std::memcpy(&tmp, s + i, 4);
    const __m128i s8 = _mm_cvtsi32_si128(tmp);
    const __m256d sd = _mm256_cvtepi32_pd(_mm_cvtepi8_epi32(s8));
    __m256d vi = _mm256_loadu_pd(v + i);
    vi = _mm256_sub_pd(vi, _mm256_mul_pd(muv, sd));
    _mm256_storeu_pd(v + i, vi);
  }
  for (; i < n; ++i) v[i] -= mu * s[i];
}

void relu_forward(int n, double* x) {
  const __m256d zero = _mm256_setzero_pd();
  const int n4 = n & ~3;
  int i = 0;
  for (; i < n4; i += 4)
    _mm256_storeu_pd(x + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(int n, const double* act, double* grad) {
  const __m256d zero = _mm256_setzero_pd();
  const int n4 = n & ~3;
  int i = 0;
  for (; i < n4; i += 4) {
    const __m256d mask =
        _mm256_cmp_pd(_mm256_loadu_pd(act + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(grad + i,
                     _mm256_and_pd(mask, _mm256_loadu_pd(grad + i)));
  }
  for (; i < n; ++i)
    if (!(act[i] > 0.0)) grad[i] = 0.0;
}

void pack_signs(int n, const std::int8_t* s, std::uint8_t* out) {
  // movemask_epi8 picks each byte's MSB, which is set exactly for -1 bytes;
  // inverting yields the +1 bitmap in LSB-first payload order.
  const int nbytes = (n + 7) / 8;
  std::memset(out, 0, static_cast<std::size_t>(nbytes));
  const int n32 = n & ~31;
  int i = 0;
  for (; i < n32; i += 32) {
    const __m256i s8 =
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(s + i));
    const std::uint32_t bits = ~static_cast<std::uint32_t>(_mm256_movemask_epi8(s8));
    std::memcpy(out + (i >> 3), &bits, 4);
  }
  for (; i < n; ++i)
    if (s[i] > 0) out[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table = {
      "avx2",    gemm_nn,       gemm_tn,   gemm_nt,       axpy,
      l1_norm,   sign_pm1,      vote_accumulate, sign_step, relu_forward,
      relu_backward, pack_signs, scalar().unpack_signs,
  };
  return table;
}

}  // namespace hiersign::kernels
