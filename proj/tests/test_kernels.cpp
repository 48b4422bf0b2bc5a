#include <doctest.h>

#include <cmath>
#include <vector>

#include "hiersign/kernels.hpp"
#include "hiersign/rng.hpp"

using namespace hiersign;

TEST_SUITE_BEGIN("kernels");

namespace {

std::vector<double> random_vec(int n, RngStream& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

std::vector<std::int8_t> random_signs(int n, RngStream& rng) {
  std::vector<std::int8_t> s(n);
  for (auto& x : s) x = rng.coin() ? 1 : -1;
  return s;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b,
                 double rel) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double tol = rel * (1.0 + std::max(std::fabs(a[i]), std::fabs(b[i])));
    REQUIRE(std::fabs(a[i] - b[i]) <= tol);
  }
}

// every table the build provides, always including the dispatched one
std::vector<const kernels::KernelTable*> tables() {
  std::vector<const kernels::KernelTable*> t = {&kernels::scalar()};
  if (const auto* avx2 = kernels::by_name("avx2");
      avx2 != nullptr && kernels::cpu_has_avx2())
    t.push_back(avx2);
  return t;
}

}  // namespace

TEST_CASE("gemm variants agree with the scalar reference") {
  auto rng = fork_rng(11, {.purpose = "gemm"});
  const auto& ref = kernels::scalar();
  const int sizes[][3] = {
      {3, 5, 7}, {16, 30, 784}, {1, 1, 1}, {7, 13, 10}, {4, 31, 9}};
  for (const auto* K : tables()) {
    for (const auto& sz : sizes) {
      const int m = sz[0], n = sz[1], k = sz[2];
      const auto a = random_vec(m * k, rng);
      const auto bt = random_vec(k * n, rng);
      std::vector<double> c0(m * n, 0.5), c1(m * n, 0.5);

      ref.gemm_nn(m, n, k, a.data(), k, bt.data(), n, c0.data(), n, true);
      K->gemm_nn(m, n, k, a.data(), k, bt.data(), n, c1.data(), n, true);
      check_close(c0, c1, 1e-12);

      // a as [k x m] for the transposed-left product
      std::vector<double> c2(m * n), c3(m * n);
      ref.gemm_tn(m, n, k, a.data(), m, bt.data(), n, c2.data(), n, false);
      K->gemm_tn(m, n, k, a.data(), m, bt.data(), n, c3.data(), n, false);
      check_close(c2, c3, 1e-12);

      // b as [n x k] for the transposed-right product
      std::vector<double> c4(m * n), c5(m * n);
      ref.gemm_nt(m, n, k, a.data(), k, bt.data(), k, c4.data(), n, false);
      K->gemm_nt(m, n, k, a.data(), k, bt.data(), k, c5.data(), n, false);
      check_close(c4, c5, 1e-12);
    }
  }
}

TEST_CASE("gemm_nn matches a hand-rolled triple loop") {
  auto rng = fork_rng(12, {.purpose = "gemm_oracle"});
  const int m = 5, n = 9, k = 11;
  const auto a = random_vec(m * k, rng);
  const auto b = random_vec(k * n, rng);
  std::vector<double> expect(m * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int s = 0; s < k; ++s) expect[i * n + j] += a[i * k + s] * b[s * n + j];
  for (const auto* K : tables()) {
    std::vector<double> c(m * n);
    K->gemm_nn(m, n, k, a.data(), k, b.data(), n, c.data(), n, false);
    check_close(expect, c, 1e-12);
  }
}

TEST_CASE("axpy and l1_norm agree across tables") {
  auto rng = fork_rng(13, {.purpose = "axpy"});
  for (int n : {1, 4, 15, 1024, 23860}) {
    const auto x = random_vec(n, rng);
    auto y0 = random_vec(n, rng);
    auto y1 = y0;
    kernels::scalar().axpy(n, 0.37, x.data(), y0.data());
    for (const auto* K : tables()) {
      auto y = y1;
      K->axpy(n, 0.37, x.data(), y.data());
      check_close(y0, y, 1e-13);
      const double l1_ref = kernels::scalar().l1_norm(n, x.data());
      const double l1 = K->l1_norm(n, x.data());
      CHECK(std::fabs(l1_ref - l1) <= 1e-12 * (1.0 + l1_ref));
    }
  }
}

TEST_CASE("elementwise and integer kernels are bit-identical across tables") {
  auto rng = fork_rng(14, {.purpose = "elementwise"});
  for (int n : {1, 7, 16, 33, 1000}) {
    auto x = random_vec(n, rng);
    x[0] = 0.0;  // exercise the zero convention
    if (n > 2) x[2] = -0.0;
    const auto s = random_signs(n, rng);

    std::vector<std::int8_t> sign_ref(n), sign_got(n);
    kernels::scalar().sign_pm1(n, x.data(), sign_ref.data());
    CHECK(sign_ref[0] == 1);  // 0 -> +1
    if (n > 2) CHECK(sign_ref[2] == 1);  // -0 -> +1 (not negative)

    std::vector<std::int16_t> acc_ref(n, 3), acc_got(n, 3);
    kernels::scalar().vote_accumulate(n, s.data(), acc_ref.data());

    auto v_ref = random_vec(n, rng);
    const auto v0 = v_ref;
    kernels::scalar().sign_step(n, 0.05, s.data(), v_ref.data());

    auto relu_ref = random_vec(n, rng);
    const auto relu0 = relu_ref;
    kernels::scalar().relu_forward(n, relu_ref.data());

    auto grad_ref = random_vec(n, rng);
    const auto grad0 = grad_ref;
    kernels::scalar().relu_backward(n, relu_ref.data(), grad_ref.data());

    for (const auto* K : tables()) {
      K->sign_pm1(n, x.data(), sign_got.data());
      CHECK(sign_got == sign_ref);

      acc_got.assign(n, 3);
      K->vote_accumulate(n, s.data(), acc_got.data());
      CHECK(acc_got == acc_ref);

      auto v = v0;
      K->sign_step(n, 0.05, s.data(), v.data());
      CHECK(v == v_ref);

      auto r = relu0;
      K->relu_forward(n, r.data());
      CHECK(r == relu_ref);

      auto g = grad0;
      K->relu_backward(n, r.data(), g.data());
      CHECK(g == grad_ref);
    }
  }
}

TEST_CASE("pack_signs layout and cross-table identity") {
  auto rng = fork_rng(15, {.purpose = "pack"});
  for (int n : {1, 8, 9, 32, 64, 100, 23860}) {
    const auto s = random_signs(n, rng);
    std::vector<std::uint8_t> ref((n + 7) / 8), got((n + 7) / 8);
    kernels::scalar().pack_signs(n, s.data(), ref.data());
    for (const auto* K : tables()) {
      K->pack_signs(n, s.data(), got.data());
      CHECK(got == ref);
      std::vector<std::int8_t> back(n);
      K->unpack_signs(n, ref.data(), back.data());
      CHECK(back == s);
    }
  }
  // spot check: all +1 over 9 coordinates -> 0xFF, 0x01
  std::vector<std::int8_t> ones(9, 1);
  std::vector<std::uint8_t> out(2);
  kernels::scalar().pack_signs(9, ones.data(), out.data());
  CHECK(out[0] == 0xFF);
  CHECK(out[1] == 0x01);
}

TEST_CASE("dispatch honors the environment override") {
  // active() is resolved once per process; just sanity-check it exists and
  // is one of the registered tables.
  const auto& k = kernels::active();
  CHECK(kernels::by_name(k.name) == &k);
}

TEST_SUITE_END();
