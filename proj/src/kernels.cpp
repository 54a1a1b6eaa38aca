#include "cfx/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace cfx::kern {

namespace scalar {

float dot(const float* a, const float* b, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

float l2_dist_sq(const float* a, const float* b, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        float d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void sgd_pair_update(float* p, float* q, std::size_t n, float lr, float err, float l2) {
    const float keep = 1.0f - lr * l2;
    const float step = lr * err;
    for (std::size_t i = 0; i < n; ++i) {
        float po = p[i];
        p[i] = keep * po + step * q[i];
        q[i] = keep * q[i] + step * po;
    }
}

void matvec_rows(const float* m, std::size_t rows, std::size_t cols, const float* v, float* out) {
    for (std::size_t r = 0; r < rows; ++r) out[r] = dot(m + r * cols, v, cols);
}

double dot_d(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_d(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace scalar

namespace {

struct Dispatch {
    float (*dot)(const float*, const float*, std::size_t);
    void (*axpy)(float, const float*, float*, std::size_t);
    float (*l2_dist_sq)(const float*, const float*, std::size_t);
    void (*sgd_pair_update)(float*, float*, std::size_t, float, float, float);
    void (*matvec_rows)(const float*, std::size_t, std::size_t, const float*, float*);
    double (*dot_d)(const double*, const double*, std::size_t);
    void (*axpy_d)(double, const double*, double*, std::size_t);
    Backend which;
};

constexpr Dispatch kScalarTable = {
    scalar::dot,    scalar::axpy,        scalar::l2_dist_sq, scalar::sgd_pair_update,
    scalar::matvec_rows, scalar::dot_d,  scalar::axpy_d,     Backend::Scalar,
};

constexpr Dispatch kAvx2Table = {
    avx2::dot,      avx2::axpy,          avx2::l2_dist_sq,   avx2::sgd_pair_update,
    avx2::matvec_rows,   avx2::dot_d,    avx2::axpy_d,       Backend::Avx2,
};

Dispatch resolve(Backend backend) {
    if (backend == Backend::Auto) {
        const char* env = std::getenv("CFX_KERNEL");
        if (env != nullptr && std::strcmp(env, "scalar") == 0) return kScalarTable;
        if (env != nullptr && std::strcmp(env, "avx2") == 0 && avx2::available()) return kAvx2Table;
        return avx2::available() ? kAvx2Table : kScalarTable;
    }
    if (backend == Backend::Avx2 && avx2::available()) return kAvx2Table;
    return kScalarTable;
}

std::atomic<const Dispatch*> g_active{nullptr};

const Dispatch& active() {
    const Dispatch* table = g_active.load(std::memory_order_acquire);
    if (table == nullptr) {
        static const Dispatch resolved = resolve(Backend::Auto);
        g_active.store(&resolved, std::memory_order_release);
        return resolved;
    }
    return *table;
}

}  // namespace

void set_backend(Backend backend) {
    static Dispatch s_table;
    s_table = resolve(backend);
    g_active.store(&s_table, std::memory_order_release);
}

Backend active_backend() { return active().which; }

const char* backend_name() {
    return active().which == Backend::Avx2 ? "avx2" : "scalar";
}

float dot(const float* a, const float* b, std::size_t n) { return active().dot(a, b, n); }
void axpy(float alpha, const float* x, float* y, std::size_t n) { active().axpy(alpha, x, y, n); }
float l2_dist_sq(const float* a, const float* b, std::size_t n) { return active().l2_dist_sq(a, b, n); }
void sgd_pair_update(float* p, float* q, std::size_t n, float lr, float err, float l2) {
    active().sgd_pair_update(p, q, n, lr, err, l2);
}
void matvec_rows(const float* m, std::size_t rows, std::size_t cols, const float* v, float* out) {
    active().matvec_rows(m, rows, cols, v, out);
}
double dot_d(const double* a, const double* b, std::size_t n) { return active().dot_d(a, b, n); }
void axpy_d(double alpha, const double* x, double* y, std::size_t n) { active().axpy_d(alpha, x, y, n); }

}  // namespace cfx::kern
