#pragma once

// Dense double-precision kernels used by the basis synthesis, the gradient
// reduction and the Lanczos reorthogonalization. Each kernel has a scalar
// reference variant and, when compiled in and supported by the CPU, an
// AVX2/FMA variant. The variant is picked once at runtime; SBO_SIMD=scalar
// in the environment forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace sbo::simd {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa) noexcept;

struct KernelTable {
    Isa isa;
    double (*dot)(const double* x, const double* y, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // y = A x, A column-major rows x cols
    void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
    // y = A^T x, A column-major rows x cols
    void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
};

const KernelTable& scalar_kernels() noexcept;

/// nullptr when the AVX2 variant was not compiled or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels() noexcept;

const KernelTable& active_kernels() noexcept;
Isa active_isa() noexcept;

/// Override the dispatch decision; returns false if the ISA is unavailable.
bool select_isa(Isa isa) noexcept;

double dot(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<double> y);
double squared_norm(std::span<const double> x);
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y);
void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
            std::span<double> y);

namespace detail {
const KernelTable* avx2_table_if_compiled() noexcept;
}

} // namespace sbo::simd
