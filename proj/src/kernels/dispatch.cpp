#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "attnparse/kernels.hpp"
#include "kernels_impl.hpp"

namespace attnparse::kernels {

namespace {

constexpr KernelTable kScalar{
    "scalar",       scalar::dot,  scalar::axpy, scalar::scale,   scalar::sum,
    scalar::max,    scalar::softmax, scalar::gemm, scalar::gemm_nt, scalar::gemm_tn,
};

#if defined(ATTNPARSE_HAVE_AVX2)
constexpr KernelTable kAvx2{
    "avx2",       avx2::dot,  avx2::axpy, avx2::scale,   avx2::sum,
    avx2::max,    avx2::softmax, avx2::gemm, avx2::gemm_nt, avx2::gemm_tn,
};
#endif

bool cpu_has_avx2() noexcept {
#if defined(ATTNPARSE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable& select_initial() noexcept {
    const char* env = std::getenv("ATTNPARSE_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return kScalar;
    if (const KernelTable* t = avx2_kernels()) return *t;
    return kScalar;
}

std::atomic<const KernelTable*>& slot() noexcept {
    static std::atomic<const KernelTable*> table{&select_initial()};
    return table;
}

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

const KernelTable* avx2_kernels() noexcept {
#if defined(ATTNPARSE_HAVE_AVX2)
    static const bool ok = cpu_has_avx2();
    return ok ? &kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active() noexcept { return *slot().load(std::memory_order_acquire); }

void set_active(const KernelTable& table) noexcept { slot().store(&table, std::memory_order_release); }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    active().gemm(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimensions differ");
    Matrix c(a.rows(), b.rows());
    active().gemm_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("matmul_tn: inner dimensions differ");
    Matrix c(a.cols(), b.cols());
    active().gemm_tn(a.data(), b.data(), c.data(), a.cols(), a.rows(), b.cols());
    return c;
}

void softmax_rows(Matrix& m) {
    const auto& k = active();
    for (std::size_t i = 0; i < m.rows(); ++i) k.softmax(m.row(i).data(), m.cols());
}

void axpy(double alpha, const Matrix& x, Matrix& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) {
        throw std::invalid_argument("axpy: shape mismatch");
    }
    active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace attnparse::kernels
