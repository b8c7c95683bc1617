// AVX2+FMA kernel variants. Compiled with -mavx2 -mfma on x86-64 only;
// callers must check avx2_available() before dispatching here.

#include "duetkd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace duetkd::kernels::avx2 {

namespace {

// Horizontal sum of a 4-lane double register.
inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t simd_end = n & ~std::size_t(3);
    for (; i < simd_end; i += 4) {
        __m256d va = _mm256_loadu_pd(a + i);
        __m256d vb = _mm256_loadu_pd(b + i);
        acc = _mm256_fmadd_pd(va, vb, acc);
    }
    double sum = hsum(acc);
    for (; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

double squared_norm(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t simd_end = n & ~std::size_t(3);
    for (; i < simd_end; i += 4) {
        __m256d va = _mm256_loadu_pd(a + i);
        acc = _mm256_fmadd_pd(va, va, acc);
    }
    double sum = hsum(acc);
    for (; i < n; ++i) sum += a[i] * a[i];
    return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    const std::size_t simd_end = n & ~std::size_t(3);
    for (; i < simd_end; i += 4) {
        __m256d vx = _mm256_loadu_pd(x + i);
        __m256d vy = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, vx, vy));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double* x, double alpha, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    const std::size_t simd_end = n & ~std::size_t(3);
    for (; i < simd_end; i += 4) {
        __m256d vx = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(x + i, _mm256_mul_pd(vx, va));
    }
    for (; i < n; ++i) x[i] *= alpha;
}

}  // namespace duetkd::kernels::avx2

#endif  // x86-64
