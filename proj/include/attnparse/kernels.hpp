#pragma once

// Dense inner loops used by attention recomputation, head combination and
// training. Each kernel has a scalar reference implementation and, on x86-64,
// an AVX2/FMA variant. The variant is picked once at runtime from CPUID and can
// be forced with ATTNPARSE_SIMD=scalar|avx2.

#include <cstddef>

#include "attnparse/matrix.hpp"

namespace attnparse::kernels {

struct KernelTable {
    const char* name;
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    void (*scale)(double alpha, double* x, std::size_t n);
    double (*sum)(const double* x, std::size_t n);
    double (*max)(const double* x, std::size_t n);
    // In-place max-subtracted softmax of one row.
    void (*softmax)(double* x, std::size_t n);
    // C[m x n] = A[m x k] * B[k x n]
    void (*gemm)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n);
    // C[m x n] = A[m x k] * B[n x k]^T
    void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n);
    // C[m x n] = A[k x m]^T * B[k x n]
    void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;

/// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_kernels() noexcept;

/// The table selected for this process.
const KernelTable& active() noexcept;

/// Replace the active table (tests and benchmarks). Not thread-safe against
/// concurrent kernel calls.
void set_active(const KernelTable& table) noexcept;

// Matrix-level conveniences over the active table.
Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
void softmax_rows(Matrix& m);
void axpy(double alpha, const Matrix& x, Matrix& y);

}  // namespace attnparse::kernels
