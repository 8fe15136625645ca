#pragma once

#include <cstddef>

namespace attnparse::kernels {

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
double sum(const double* x, std::size_t n);
double max(const double* x, std::size_t n);
void softmax(double* x, std::size_t n);
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
}  // namespace scalar

#if defined(ATTNPARSE_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
double sum(const double* x, std::size_t n);
double max(const double* x, std::size_t n);
void softmax(double* x, std::size_t n);
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
}  // namespace avx2
#endif

}  // namespace attnparse::kernels
