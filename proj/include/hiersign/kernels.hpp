#pragma once

#include <cstdint>
#include <string_view>

namespace hiersign::kernels {

// Data-parallel inner loops behind the training pipeline. All matrices are
// row-major doubles. Sign vectors are int8 with entries in {-1, +1}
// (0 is allowed only under the ternary tie policy).
//
// Two implementations exist: a scalar reference and an AVX2+FMA variant,
// selected once at startup from cpuid. `HIERSIGN_KERNELS=scalar|avx2|auto`
// overrides the choice. Elementwise and integer kernels are bit-identical
// across implementations; reduction kernels (gemm_*, l1_norm) may differ in
// the last few ulps because the accumulation order differs.
struct KernelTable {
  const char* name;

  // c[m x n] (+)= a[m x k] * b[k x n]
  void (*gemm_nn)(int m, int n, int k, const double* a, int lda,
                  const double* b, int ldb, double* c, int ldc,
                  bool accumulate);
  // c[m x n] (+)= a^T * b with a stored [k x m]: c[i][j] = sum_s a[s][i]*b[s][j]
  void (*gemm_tn)(int m, int n, int k, const double* a, int lda,
                  const double* b, int ldb, double* c, int ldc,
                  bool accumulate);
  // c[m x n] (+)= a * b^T with b stored [n x k]: c[i][j] = dot(a_i, b_j)
  void (*gemm_nt)(int m, int n, int k, const double* a, int lda,
                  const double* b, int ldb, double* c, int ldc,
                  bool accumulate);

  // y += alpha * x
  void (*axpy)(int n, double alpha, const double* x, double* y);
  double (*l1_norm)(int n, const double* x);

  // s[i] = x[i] < 0 ? -1 : +1   (exact zeros map to +1)
  void (*sign_pm1)(int n, const double* x, std::int8_t* s);
  // acc[i] += s[i]
  void (*vote_accumulate)(int n, const std::int8_t* s, std::int16_t* acc);
  // v[i] -= mu * s[i]
  void (*sign_step)(int n, double mu, const std::int8_t* s, double* v);

  void (*relu_forward)(int n, double* x);
  // grad[i] = act[i] > 0 ? grad[i] : 0
  void (*relu_backward)(int n, const double* act, double* grad);

  // bit i of the payload (LSB-first within each byte) is 1 iff s[8*byte+i] == +1;
  // trailing pad bits of the last byte are zero. Payload size is (n+7)/8 bytes.
  void (*pack_signs)(int n, const std::int8_t* s, std::uint8_t* out);
  void (*unpack_signs)(int n, const std::uint8_t* in, std::int8_t* s);
};

// Dispatched table (resolved once, thread-safe).
const KernelTable& active();

// Always-available reference implementation.
const KernelTable& scalar();

// Lookup for tests and diagnostics; returns nullptr for unknown names.
const KernelTable* by_name(std::string_view name);

bool cpu_has_avx2();

}  // namespace hiersign::kernels
