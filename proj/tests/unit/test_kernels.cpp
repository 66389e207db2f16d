#include "doctest.h"

#include <cmath>
#include <random>

#include "ccg/kernels.hpp"
#include "oracles.hpp"

using namespace ccg;

namespace {

std::vector<double> randv(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(0, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("gemm variants: serial equals parallel bitwise and matches the naive triple loop") {
  std::mt19937_64 rng(1);
  for (auto [m, n, k] : std::vector<std::array<std::size_t, 3>>{{1, 1, 1}, {3, 5, 7}, {17, 33, 64}, {64, 64, 64}}) {
    const auto a_nt = randv(rng, m * k), b_nt = randv(rng, n * k);
    std::vector<double> c0 = randv(rng, m * n), c1 = c0, c2 = c0, naive = c0;
    kernels::serial::gemm_nt(a_nt.data(), b_nt.data(), c1.data(), m, n, k);
    kernels::parallel::gemm_nt(a_nt.data(), b_nt.data(), c2.data(), m, n, k);
    CHECK(c1 == c2);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t t = 0; t < k; ++t) naive[i * n + j] += a_nt[i * k + t] * b_nt[j * k + t];
    for (std::size_t i = 0; i < naive.size(); ++i) CHECK(c1[i] == doctest::Approx(naive[i]).epsilon(1e-12));

    // gemm_nn: A(m×n)·B(n×k)
    const auto a = randv(rng, m * n), b = randv(rng, n * k);
    std::vector<double> d1(m * k, 0.0), d2 = d1, dn = d1;
    kernels::serial::gemm_nn(a.data(), b.data(), d1.data(), m, n, k);
    kernels::parallel::gemm_nn(a.data(), b.data(), d2.data(), m, n, k);
    CHECK(d1 == d2);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t t = 0; t < k; ++t)
        for (std::size_t j = 0; j < n; ++j) dn[i * k + t] += a[i * n + j] * b[j * k + t];
    for (std::size_t i = 0; i < dn.size(); ++i) CHECK(d1[i] == doctest::Approx(dn[i]).epsilon(1e-12));

    // gemm_tn: A(m×n)ᵀ·B(m×k)
    const auto bt = randv(rng, m * k);
    std::vector<double> e1(n * k, 0.0), e2 = e1, en = e1;
    kernels::serial::gemm_tn(a.data(), bt.data(), e1.data(), m, n, k);
    kernels::parallel::gemm_tn(a.data(), bt.data(), e2.data(), m, n, k);
    CHECK(e1 == e2);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < k; ++t)
        for (std::size_t i = 0; i < m; ++i) en[j * k + t] += a[i * n + j] * bt[i * k + t];
    for (std::size_t i = 0; i < en.size(); ++i) CHECK(e1[i] == doctest::Approx(en[i]).epsilon(1e-12));

    std::vector<double> dispatch(m * n, 0.0), serial(m * n, 0.0);
    kernels::gemm_nt(a_nt.data(), b_nt.data(), dispatch.data(), m, n, k);
    kernels::serial::gemm_nt(a_nt.data(), b_nt.data(), serial.data(), m, n, k);
    CHECK(dispatch == serial);
  }
}

TEST_CASE("cosine matrix") {
  std::mt19937_64 rng(2);
  const std::size_t a = 9, b = 13, d = 16;
  auto x = randv(rng, a * d), y = randv(rng, b * d);
  std::fill_n(y.begin() + 3 * d, d, 0.0);
  const auto s = kernels::serial::cosine_matrix(x.data(), a, y.data(), b, d);
  CHECK(s == kernels::parallel::cosine_matrix(x.data(), a, y.data(), b, d));
  CHECK(s == kernels::cosine_matrix(x.data(), a, y.data(), b, d));
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j) {
      double dot = 0, nx = 0, ny = 0;
      for (std::size_t t = 0; t < d; ++t) {
        dot += x[i * d + t] * y[j * d + t];
        nx += x[i * d + t] * x[i * d + t];
        ny += y[j * d + t] * y[j * d + t];
      }
      const double expect = (nx == 0 || ny == 0) ? 0.0 : dot / std::sqrt(nx * ny);
      CHECK(s[i * b + j] == doctest::Approx(expect).epsilon(1e-12));
      CHECK(std::abs(s[i * b + j]) <= 1.0 + 1e-12);
    }
  const double p[2] = {1, 2}, q[2] = {2, 1};
  CHECK(kernels::cosine_matrix(p, 1, q, 1, 2)[0] == doctest::Approx(0.8));
}

TEST_CASE("rouge_pairs: serial equals parallel and matches the oracle") {
  std::mt19937_64 rng(3);
  std::vector<std::string> cands, refs;
  for (int i = 0; i < 200; ++i) {
    cands.push_back(i % 17 == 0 ? "" : ref::random_sentence(rng, 1, 25));
    refs.push_back(ref::random_sentence(rng, 1, 25));
  }
  const auto s = kernels::serial::rouge_pairs(cands, refs);
  CHECK(s == kernels::parallel::rouge_pairs(cands, refs));
  CHECK(s == kernels::rouge_pairs(cands, refs));
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto c = ref::tokens(cands[i]), r = ref::tokens(refs[i]);
    CHECK(s[i].r1 == doctest::Approx(ref::rouge_n(c, r, 1).f).epsilon(1e-12));
    CHECK(s[i].r2 == doctest::Approx(ref::rouge_n(c, r, 2).f).epsilon(1e-12));
    CHECK(s[i].rl == doctest::Approx(ref::rouge_l(c, r).f).epsilon(1e-12));
  }
}

TEST_CASE("axpy and dot") {
  std::mt19937_64 rng(4);
  auto x = randv(rng, 1000), y1 = randv(rng, 1000), y2 = y1;
  kernels::serial::axpy(y1.data(), x.data(), 0.5, x.size());
  kernels::parallel::axpy(y2.data(), x.data(), 0.5, x.size());
  CHECK(y1 == y2);
  const double a[3] = {1, 2, 3}, b[3] = {4, 5, 6};
  CHECK(kernels::dot(a, b, 3) == 32.0);
  CHECK(kernels::max_threads() >= 1);
}
