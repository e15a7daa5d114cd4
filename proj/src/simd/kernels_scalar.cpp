#include "sbo/simd/kernels.hpp"

namespace sbo::simd {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += x[i] * y[i];
    }
    return sum;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t i = 0; i < rows; ++i) {
        y[i] = 0.0;
    }
    for (std::size_t j = 0; j < cols; ++j) {
        axpy_scalar(x[j], a + j * rows, y, rows);
    }
}

void gemv_t_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t j = 0; j < cols; ++j) {
        y[j] = dot_scalar(a + j * rows, x, rows);
    }
}

constexpr KernelTable kScalarTable{Isa::Scalar, dot_scalar, axpy_scalar, gemv_scalar, gemv_t_scalar};

} // namespace

const KernelTable& scalar_kernels() noexcept { return kScalarTable; }

} // namespace sbo::simd
