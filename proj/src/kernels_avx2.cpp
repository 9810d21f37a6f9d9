// AVX2 variants of the pairwise kernels. This translation unit is the only one
// compiled with -mavx2/-mfma; callers must check availability through
// avx2_backend() before dispatching here.

#include <cstddef>

#include "peflow/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

namespace peflow::kernels {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void conv_quadratic_avx2(const double* ex, size_t ne, const double* x, const double* m,
                         size_t n, double a, double* out) {
    const __m256d av = _mm256_set1_pd(a);
    for (size_t e = 0; e < ne; ++e) {
        const __m256d xe = _mm256_set1_pd(ex[e]);
        __m256d acc = _mm256_setzero_pd();
        size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const __m256d d = _mm256_sub_pd(xe, _mm256_loadu_pd(x + j));
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(m + j), _mm256_mul_pd(av, d), acc);
        }
        double tail = 0.0;
        for (; j < n; ++j) tail += m[j] * (a * (ex[e] - x[j]));
        out[e] = hsum(acc) + tail;
    }
}

void conv_smooth_abs_avx2(const double* ex, size_t ne, const double* x, const double* m,
                          size_t n, double eps, double* out) {
    const __m256d e2 = _mm256_set1_pd(eps * eps);
    for (size_t e = 0; e < ne; ++e) {
        const __m256d xe = _mm256_set1_pd(ex[e]);
        __m256d acc = _mm256_setzero_pd();
        size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const __m256d d = _mm256_sub_pd(xe, _mm256_loadu_pd(x + j));
            const __m256d r = _mm256_sqrt_pd(_mm256_fmadd_pd(d, d, e2));
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(m + j), _mm256_div_pd(d, r), acc);
        }
        double tail = 0.0;
        const double eps2 = eps * eps;
        for (; j < n; ++j) {
            const double d = ex[e] - x[j];
            tail += m[j] * (d / std::sqrt(d * d + eps2));
        }
        out[e] = hsum(acc) + tail;
    }
}

double energy_quadratic_avx2(const double* x, const double* m, size_t n, double a) {
    const __m256d half_a = _mm256_set1_pd(0.5 * a);
    double total = 0.0;
    for (size_t k = 0; k < n; ++k) {
        const __m256d xk = _mm256_set1_pd(x[k]);
        __m256d acc = _mm256_setzero_pd();
        size_t l = 0;
        for (; l + 4 <= n; l += 4) {
            const __m256d d = _mm256_sub_pd(xk, _mm256_loadu_pd(x + l));
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(m + l),
                                  _mm256_mul_pd(half_a, _mm256_mul_pd(d, d)), acc);
        }
        double row = hsum(acc);
        for (; l < n; ++l) {
            const double d = x[k] - x[l];
            row += m[l] * (0.5 * a * d * d);
        }
        total += m[k] * row;
    }
    return 0.5 * total;
}

double energy_smooth_abs_avx2(const double* x, const double* m, size_t n, double eps) {
    const __m256d e2 = _mm256_set1_pd(eps * eps);
    double total = 0.0;
    for (size_t k = 0; k < n; ++k) {
        const __m256d xk = _mm256_set1_pd(x[k]);
        __m256d acc = _mm256_setzero_pd();
        size_t l = 0;
        for (; l + 4 <= n; l += 4) {
            const __m256d d = _mm256_sub_pd(xk, _mm256_loadu_pd(x + l));
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(m + l),
                                  _mm256_sqrt_pd(_mm256_fmadd_pd(d, d, e2)), acc);
        }
        double row = hsum(acc);
        const double eps2 = eps * eps;
        for (; l < n; ++l) {
            const double d = x[k] - x[l];
            row += m[l] * std::sqrt(d * d + eps2);
        }
        total += m[k] * row;
    }
    return 0.5 * total;
}

double energy_abs_avx2(const double* x, const double* m, size_t n, double) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    double total = 0.0;
    for (size_t k = 0; k < n; ++k) {
        const __m256d xk = _mm256_set1_pd(x[k]);
        __m256d acc = _mm256_setzero_pd();
        size_t l = 0;
        for (; l + 4 <= n; l += 4) {
            const __m256d d = _mm256_sub_pd(xk, _mm256_loadu_pd(x + l));
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(m + l), _mm256_andnot_pd(sign_mask, d), acc);
        }
        double row = hsum(acc);
        for (; l < n; ++l) row += m[l] * std::abs(x[k] - x[l]);
        total += m[k] * row;
    }
    return 0.5 * total;
}

} // namespace

const Backend* avx2_backend() {
    if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) return nullptr;
    static const Backend b{"avx2",
                           conv_quadratic_avx2,
                           conv_smooth_abs_avx2,
                           energy_quadratic_avx2,
                           energy_smooth_abs_avx2,
                           energy_abs_avx2};
    return &b;
}

} // namespace peflow::kernels

#else  // non-x86 builds fall back to scalar

namespace peflow::kernels {
const Backend* avx2_backend() { return nullptr; }
} // namespace peflow::kernels

#endif
