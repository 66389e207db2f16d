#pragma once

// Data-parallel inner loops. Every kernel exists twice: `serial::` is the
// reference used by the tests, `parallel::` is the OpenMP version. Both
// evaluate each output element with the same summation order, so their
// results are bitwise identical.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ccg/rouge.hpp"

namespace ccg::kernels {

struct PairScores {
  double r1 = 0.0, r2 = 0.0, rl = 0.0;
  bool operator==(const PairScores&) const = default;
};

namespace serial {
/// C(m×n) += A(m×k) · B(n×k)ᵀ
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
/// C(m×k) += A(m×n) · B(n×k)
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
/// C(n×k) += A(m×n)ᵀ · B(m×k)
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
/// ROUGE-1/2/L F1 for each aligned (candidate, reference) pair.
std::vector<PairScores> rouge_pairs(std::span<const std::string> candidates,
                                    std::span<const std::string> references);
/// Row-major (a×b) matrix of cosines between the rows of X(a×d) and Y(b×d);
/// a zero-norm row yields 0.
std::vector<double> cosine_matrix(const double* x, std::size_t a, const double* y, std::size_t b,
                                  std::size_t d);
/// dst[i] += src[i]
void axpy(double* dst, const double* src, double alpha, std::size_t n);
}  // namespace serial

namespace parallel {
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
std::vector<PairScores> rouge_pairs(std::span<const std::string> candidates,
                                    std::span<const std::string> references);
std::vector<double> cosine_matrix(const double* x, std::size_t a, const double* y, std::size_t b,
                                  std::size_t d);
void axpy(double* dst, const double* src, double alpha, std::size_t n);
}  // namespace parallel

/// Dispatchers: parallel above a work threshold and when more than one
/// thread is available, serial otherwise.
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
std::vector<PairScores> rouge_pairs(std::span<const std::string> candidates,
                                    std::span<const std::string> references);
std::vector<double> cosine_matrix(const double* x, std::size_t a, const double* y, std::size_t b,
                                  std::size_t d);
void axpy(double* dst, const double* src, double alpha, std::size_t n);

double dot(const double* a, const double* b, std::size_t n);

int max_threads();

}  // namespace ccg::kernels
