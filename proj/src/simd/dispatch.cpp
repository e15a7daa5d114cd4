#include "sbo/simd/kernels.hpp"

#include "sbo/error.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace sbo::simd {

#ifndef SBO_HAVE_AVX2
namespace detail {
const KernelTable* avx2_table_if_compiled() noexcept { return nullptr; }
} // namespace detail
#endif

namespace {

bool cpu_has_avx2_fma() noexcept {
#if defined(__x86_64__) || defined(_M_X64)
#if defined(__GNUC__) || defined(__clang__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
#else
    return false;
#endif
}

const KernelTable* initial_table() noexcept {
    const char* env = std::getenv("SBO_SIMD");
    if (env != nullptr && std::string(env) == "scalar") {
        return &scalar_kernels();
    }
    if (const KernelTable* avx = avx2_kernels()) {
        return avx;
    }
    return &scalar_kernels();
}

std::atomic<const KernelTable*>& active_slot() noexcept {
    static std::atomic<const KernelTable*> slot{initial_table()};
    return slot;
}

} // namespace

std::string_view to_string(Isa isa) noexcept {
    return isa == Isa::Avx2 ? "avx2" : "scalar";
}

const KernelTable* avx2_kernels() noexcept {
    static const KernelTable* table = cpu_has_avx2_fma() ? detail::avx2_table_if_compiled() : nullptr;
    return table;
}

const KernelTable& active_kernels() noexcept { return *active_slot().load(std::memory_order_acquire); }

Isa active_isa() noexcept { return active_kernels().isa; }

bool select_isa(Isa isa) noexcept {
    if (isa == Isa::Scalar) {
        active_slot().store(&scalar_kernels(), std::memory_order_release);
        return true;
    }
    const KernelTable* avx = avx2_kernels();
    if (avx == nullptr) {
        return false;
    }
    active_slot().store(avx, std::memory_order_release);
    return true;
}

double dot(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), ErrorKind::Dimension, "dot: length mismatch");
    return active_kernels().dot(x.data(), y.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    require(x.size() == y.size(), ErrorKind::Dimension, "axpy: length mismatch");
    active_kernels().axpy(a, x.data(), y.data(), x.size());
}

double squared_norm(std::span<const double> x) { return active_kernels().dot(x.data(), x.data(), x.size()); }

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y) {
    require(a.size() >= rows * cols && x.size() == cols && y.size() == rows, ErrorKind::Dimension,
            "gemv: dimension mismatch");
    active_kernels().gemv(a.data(), rows, cols, x.data(), y.data());
}

void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
            std::span<double> y) {
    require(a.size() >= rows * cols && x.size() == rows && y.size() == cols, ErrorKind::Dimension,
            "gemv_t: dimension mismatch");
    active_kernels().gemv_t(a.data(), rows, cols, x.data(), y.data());
}

} // namespace sbo::simd
