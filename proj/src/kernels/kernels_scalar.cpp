#include <cmath>
#include <cstring>

#include "hiersign/kernels.hpp"

namespace hiersign::kernels {
namespace {

void gemm_nn(int m, int n, int k, const double* a, int lda, const double* b,
             int ldb, double* c, int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * ldc;
    if (!accumulate) std::memset(crow, 0, sizeof(double) * n);
    const double* arow = a + static_cast<std::size_t>(i) * lda;
    for (int s = 0; s < k; ++s) {
      const double av = arow[s];
      const double* brow = b + static_cast<std::size_t>(s) * ldb;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn(int m, int n, int k, const double* a, int lda, const double* b,
             int ldb, double* c, int ldc, bool accumulate) {
  if (!accumulate) {
    for (int i = 0; i < m; ++i)
      std::memset(c + static_cast<std::size_t>(i) * ldc, 0, sizeof(double) * n);
  }
  for (int s = 0; s < k; ++s) {
    const double* arow = a + static_cast<std::size_t>(s) * lda;
    const double* brow = b + static_cast<std::size_t>(s) * ldb;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + static_cast<std::size_t>(i) * ldc;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(int m, int n, int k, const double* a, int lda, const double* b,
             int ldb, double* c, int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * lda;
    double* crow = c + static_cast<std::size_t>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * ldb;
      double acc = 0.0;
      for (int s = 0; s < k; ++s) acc += arow[s] * brow[s];
      crow[j] = accumulate ? crow[j] + acc : acc;
    }
  }
}

void axpy(int n, double alpha, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double l1_norm(int n, const double* x) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::fabs(x[i]);
  return acc;
}

void sign_pm1(int n, const double* x, std::int8_t* s) {
  for (int i = 0; i < n; ++i) s[i] = x[i] < 0.0 ? -1 : 1;
}

void vote_accumulate(int n, const std::int8_t* s, std::int16_t* acc) {
  for (int i = 0; i < n; ++i) acc[i] = static_cast<std::int16_t>(acc[i] + s[i]);
}

void sign_step(int n, double mu, const std::int8_t* s, double* v) {
  for (int i = 0; i < n; ++i) v[i] -= mu * s[i];
}

void relu_forward(int n, double* x) {
  for (int i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(int n, const double* act, double* grad) {
  for (int i = 0; i < n; ++i)
    if (!(act[i] > 0.0)) grad[i] = 0.0;
}

void pack_signs(int n, const std::int8_t* s, std::uint8_t* out) {
  const int nbytes = (n + 7) / 8;
  std::memset(out, 0, static_cast<std::size_t>(nbytes));
  for (int i = 0; i < n; ++i)
    if (s[i] > 0) out[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
}

void unpack_signs(int n, const std::uint8_t* in, std::int8_t* s) {
  for (int i = 0; i < n; ++i)
    s[i] = (in[i >> 3] >> (i & 7)) & 1u ? 1 : -1;
}

}  // namespace

const KernelTable& scalar() {
  static const KernelTable table = {
      "scalar",  gemm_nn,       gemm_tn,   gemm_nt,       axpy,
      l1_norm,   sign_pm1,      vote_accumulate, sign_step, relu_forward,
      relu_backward, pack_signs, unpack_signs,
  };
  return table;
}

}  // namespace hiersign::kernels
