// Compiled with -mavx2 -mfma. Only reached through the dispatch table after a
// runtime CPU check.

#include "sbo/simd/kernels.hpp"

#include <immintrin.h>

namespace sbo::simd {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), acc3);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    }
    double sum = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
    for (; i < n; ++i) {
        sum += x[i] * y[i];
    }
    return sum;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(y + i + 4,
                         _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
    }
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) {
        y[i] += a * x[i];
    }
}

// Four columns per pass so y is streamed once per block instead of once per column.
void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t i = 0; i < rows; ++i) {
        y[i] = 0.0;
    }
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
        const double* c0 = a + j * rows;
        const double* c1 = c0 + rows;
        const double* c2 = c1 + rows;
        const double* c3 = c2 + rows;
        const __m256d x0 = _mm256_set1_pd(x[j]);
        const __m256d x1 = _mm256_set1_pd(x[j + 1]);
        const __m256d x2 = _mm256_set1_pd(x[j + 2]);
        const __m256d x3 = _mm256_set1_pd(x[j + 3]);
        std::size_t i = 0;
        for (; i + 4 <= rows; i += 4) {
            __m256d acc = _mm256_loadu_pd(y + i);
            acc = _mm256_fmadd_pd(x0, _mm256_loadu_pd(c0 + i), acc);
            acc = _mm256_fmadd_pd(x1, _mm256_loadu_pd(c1 + i), acc);
            acc = _mm256_fmadd_pd(x2, _mm256_loadu_pd(c2 + i), acc);
            acc = _mm256_fmadd_pd(x3, _mm256_loadu_pd(c3 + i), acc);
            _mm256_storeu_pd(y + i, acc);
        }
        for (; i < rows; ++i) {
            y[i] += x[j] * c0[i] + x[j + 1] * c1[i] + x[j + 2] * c2[i] + x[j + 3] * c3[i];
        }
    }
    for (; j < cols; ++j) {
        axpy_avx2(x[j], a + j * rows, y, rows);
    }
}

void gemv_t_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
        const double* c0 = a + j * rows;
        const double* c1 = c0 + rows;
        const double* c2 = c1 + rows;
        const double* c3 = c2 + rows;
        __m256d s0 = _mm256_setzero_pd();
        __m256d s1 = _mm256_setzero_pd();
        __m256d s2 = _mm256_setzero_pd();
        __m256d s3 = _mm256_setzero_pd();
        std::size_t i = 0;
        for (; i + 4 <= rows; i += 4) {
            const __m256d xv = _mm256_loadu_pd(x + i);
            s0 = _mm256_fmadd_pd(_mm256_loadu_pd(c0 + i), xv, s0);
            s1 = _mm256_fmadd_pd(_mm256_loadu_pd(c1 + i), xv, s1);
            s2 = _mm256_fmadd_pd(_mm256_loadu_pd(c2 + i), xv, s2);
            s3 = _mm256_fmadd_pd(_mm256_loadu_pd(c3 + i), xv, s3);
        }
        double r0 = hsum(s0);
        double r1 = hsum(s1);
        double r2 = hsum(s2);
        double r3 = hsum(s3);
        for (; i < rows; ++i) {
            r0 += c0[i] * x[i];
            r1 += c1[i] * x[i];
            r2 += c2[i] * x[i];
            r3 += c3[i] * x[i];
        }
        y[j] = r0;
        y[j + 1] = r1;
        y[j + 2] = r2;
        y[j + 3] = r3;
    }
    for (; j < cols; ++j) {
        y[j] = dot_avx2(a + j * rows, x, rows);
    }
}

constexpr KernelTable kAvx2Table{Isa::Avx2, dot_avx2, axpy_avx2, gemv_avx2, gemv_t_avx2};

} // namespace

namespace detail {
const KernelTable* avx2_table_if_compiled() noexcept { return &kAvx2Table; }
} // namespace detail

} // namespace sbo::simd
