// AVX2 + FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; nothing here may run before avx2::available() is checked.

#include "cfx/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define CFX_HAVE_AVX2_BUILD 1
#include <immintrin.h>
#endif

namespace cfx::kern::avx2 {

#if CFX_HAVE_AVX2_BUILD

bool available() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

namespace {

inline float hsum256(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
}

inline double hsum256d(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

float dot(const float* a, const float* b, std::size_t n) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    }
    float acc = hsum256(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vy = _mm256_loadu_ps(y + i);
        vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
        _mm256_storeu_ps(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

float l2_dist_sq(const float* a, const float* b, std::size_t n) {
    __m256 acc = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 d = _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
        acc = _mm256_fmadd_ps(d, d, acc);
    }
    float sum = hsum256(acc);
    for (; i < n; ++i) {
        float d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

void sgd_pair_update(float* p, float* q, std::size_t n, float lr, float err, float l2) {
    const __m256 keep = _mm256_set1_ps(1.0f - lr * l2);
    const __m256 step = _mm256_set1_ps(lr * err);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vp = _mm256_loadu_ps(p + i);
        __m256 vq = _mm256_loadu_ps(q + i);
        __m256 np = _mm256_fmadd_ps(keep, vp, _mm256_mul_ps(step, vq));
        __m256 nq = _mm256_fmadd_ps(keep, vq, _mm256_mul_ps(step, vp));
        _mm256_storeu_ps(p + i, np);
        _mm256_storeu_ps(q + i, nq);
    }
    const float keep_s = 1.0f - lr * l2;
    const float step_s = lr * err;
    for (; i < n; ++i) {
        float po = p[i];
        p[i] = keep_s * po + step_s * q[i];
        q[i] = keep_s * q[i] + step_s * po;
    }
}

void matvec_rows(const float* m, std::size_t rows, std::size_t cols, const float* v, float* out) {
    for (std::size_t r = 0; r < rows; ++r) out[r] = dot(m + r * cols, v, cols);
}

double dot_d(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double acc = hsum256d(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_d(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

#else  // non-x86 build: AVX2 backend never selected

bool available() { return false; }
float dot(const float* a, const float* b, std::size_t n) { return scalar::dot(a, b, n); }
void axpy(float alpha, const float* x, float* y, std::size_t n) { scalar::axpy(alpha, x, y, n); }
float l2_dist_sq(const float* a, const float* b, std::size_t n) { return scalar::l2_dist_sq(a, b, n); }
void sgd_pair_update(float* p, float* q, std::size_t n, float lr, float err, float l2) {
    scalar::sgd_pair_update(p, q, n, lr, err, l2);
}
void matvec_rows(const float* m, std::size_t rows, std::size_t cols, const float* v, float* out) {
    scalar::matvec_rows(m, rows, cols, v, out);
}
double dot_d(const double* a, const double* b, std::size_t n) { return scalar::dot_d(a, b, n); }
void axpy_d(double alpha, const double* x, double* y, std::size_t n) { scalar::axpy_d(alpha, x, y, n); }

#endif

}  // namespace cfx::kern::avx2
