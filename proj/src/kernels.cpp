#include "ccg/kernels.hpp"

#include <cmath>
#include <stdexcept>

#include <omp.h>

namespace ccg::kernels {

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

int max_threads() { return omp_get_max_threads(); }

namespace {

inline void axpy_row(double* dst, const double* src, double alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += alpha * src[i];
}

PairScores score_one(const std::string& c, const std::string& r) {
  const auto t = rouge::score_pair(c, r);
  return {t.r1, t.r2, t.rl};
}

double row_norm(const double* v, std::size_t d) { return std::sqrt(dot(v, v, d)); }

void check_pairs(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("rouge_pairs: candidate/reference count mismatch");
}

}  // namespace

namespace serial {

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(a + i * k, b + j * k, k);
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < n; ++p) {
      const double av = a[i * n + p];
      if (av != 0.0) axpy_row(c + i * k, b + p * k, av, k);
    }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * n + p];
      if (av != 0.0) axpy_row(c + p * k, b + i * k, av, k);
    }
}

std::vector<PairScores> rouge_pairs(std::span<const std::string> candidates,
                                    std::span<const std::string> references) {
  check_pairs(candidates.size(), references.size());
  std::vector<PairScores> out(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) out[i] = score_one(candidates[i], references[i]);
  return out;
}

std::vector<double> cosine_matrix(const double* x, std::size_t a, const double* y, std::size_t b,
                                  std::size_t d) {
  std::vector<double> out(a * b, 0.0);
  for (std::size_t i = 0; i < a; ++i) {
    const double ni = row_norm(x + i * d, d);
    for (std::size_t j = 0; j < b; ++j) {
      const double nj = row_norm(y + j * d, d);
      if (ni > 0 && nj > 0) out[i * b + j] = dot(x + i * d, y + j * d, d) / (ni * nj);
    }
  }
  return out;
}

void axpy(double* dst, const double* src, double alpha, std::size_t n) { axpy_row(dst, src, alpha, n); }

}  // namespace serial

namespace parallel {

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  const long total = static_cast<long>(m * n);
#pragma omp parallel for schedule(static)
  for (long idx = 0; idx < total; ++idx) {
    const std::size_t i = static_cast<std::size_t>(idx) / n;
    const std::size_t j = static_cast<std::size_t>(idx) % n;
    c[i * n + j] += dot(a + i * k, b + j * k, k);
  }
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  if (m >= static_cast<std::size_t>(omp_get_max_threads())) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(m); ++i)
      for (std::size_t p = 0; p < n; ++p) {
        const double av = a[i * n + p];
        if (av != 0.0) axpy_row(c + i * k, b + p * k, av, k);
      }
    return;
  }
  // Few rows: split the output columns instead; per-element order is unchanged.
#pragma omp parallel for schedule(static)
  for (long col = 0; col < static_cast<long>(k); ++col)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < n; ++p) {
        const double av = a[i * n + p];
        if (av != 0.0) c[i * k + col] += av * b[p * k + col];
      }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
#pragma omp parallel for schedule(static)
  for (long p = 0; p < static_cast<long>(n); ++p)
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * n + p];
      if (av != 0.0) axpy_row(c + p * k, b + i * k, av, k);
    }
}

std::vector<PairScores> rouge_pairs(std::span<const std::string> candidates,
                                    std::span<const std::string> references) {
  check_pairs(candidates.size(), references.size());
  std::vector<PairScores> out(candidates.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < static_cast<long>(candidates.size()); ++i)
    out[i] = score_one(candidates[i], references[i]);
  return out;
}

std::vector<double> cosine_matrix(const double* x, std::size_t a, const double* y, std::size_t b,
                                  std::size_t d) {
  std::vector<double> out(a * b, 0.0);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(a); ++i) {
    const double ni = row_norm(x + i * d, d);
    for (std::size_t j = 0; j < b; ++j) {
      const double nj = row_norm(y + j * d, d);
      if (ni > 0 && nj > 0) out[i * b + j] = dot(x + i * d, y + j * d, d) / (ni * nj);
    }
  }
  return out;
}

void axpy(double* dst, const double* src, double alpha, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(n); ++i) dst[i] += alpha * src[i];
}

}  // namespace parallel

namespace {
constexpr std::size_t kParallelWork = 1u << 15;
bool go_parallel(std::size_t work) { return work >= kParallelWork && omp_get_max_threads() > 1; }
}  // namespace

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  go_parallel(m * n * k) ? parallel::gemm_nt(a, b, c, m, n, k) : serial::gemm_nt(a, b, c, m, n, k);
}
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  go_parallel(m * n * k) ? parallel::gemm_nn(a, b, c, m, n, k) : serial::gemm_nn(a, b, c, m, n, k);
}
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  go_parallel(m * n * k) ? parallel::gemm_tn(a, b, c, m, n, k) : serial::gemm_tn(a, b, c, m, n, k);
}
std::vector<PairScores> rouge_pairs(std::span<const std::string> candidates,
                                    std::span<const std::string> references) {
  return omp_get_max_threads() > 1 ? parallel::rouge_pairs(candidates, references)
                                   : serial::rouge_pairs(candidates, references);
}
std::vector<double> cosine_matrix(const double* x, std::size_t a, const double* y, std::size_t b,
                                  std::size_t d) {
  return go_parallel(a * b * d) ? parallel::cosine_matrix(x, a, y, b, d)
                                : serial::cosine_matrix(x, a, y, b, d);
}
void axpy(double* dst, const double* src, double alpha, std::size_t n) {
  go_parallel(n) ? parallel::axpy(dst, src, alpha, n) : serial::axpy(dst, src, alpha, n);
}

}  // namespace ccg::kernels
