#pragma once

#include <cstddef>

// Arithmetic inner loops used by training, ranking and the fitting code.
// Scalar reference implementations live in kern::scalar; AVX2+FMA variants
// (kern::avx2) are selected at runtime when the CPU supports them. The two
// backends are equivalence-tested; they agree up to floating-point
// reassociation, not bit-for-bit. Within one process the active backend is
// fixed, which keeps every run on a given machine reproducible.
namespace cfx::kern {

enum class Backend { Auto, Scalar, Avx2 };

// Selects the backend. Auto picks AVX2 when available, else scalar.
// Honors CFX_KERNEL=scalar|avx2 on first use.
void set_backend(Backend backend);
Backend active_backend();
const char* backend_name();

float dot(const float* a, const float* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);  // y += alpha * x
float l2_dist_sq(const float* a, const float* b, std::size_t n);

// Paired SGD step for factor vectors p, q with prediction error err:
//   p <- p + lr * (err * q - l2 * p)
//   q <- q + lr * (err * p_old - l2 * q)
void sgd_pair_update(float* p, float* q, std::size_t n, float lr, float err, float l2);

// out[r] = dot(m[r * cols .. r * cols + cols), v) for r in [0, rows).
void matvec_rows(const float* m, std::size_t rows, std::size_t cols, const float* v, float* out);

double dot_d(const double* a, const double* b, std::size_t n);
void axpy_d(double alpha, const double* x, double* y, std::size_t n);

namespace scalar {
float dot(const float* a, const float* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
float l2_dist_sq(const float* a, const float* b, std::size_t n);
void sgd_pair_update(float* p, float* q, std::size_t n, float lr, float err, float l2);
void matvec_rows(const float* m, std::size_t rows, std::size_t cols, const float* v, float* out);
double dot_d(const double* a, const double* b, std::size_t n);
void axpy_d(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

namespace avx2 {
bool available();  // compiled in and supported by this CPU
float dot(const float* a, const float* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
float l2_dist_sq(const float* a, const float* b, std::size_t n);
void sgd_pair_update(float* p, float* q, std::size_t n, float lr, float err, float l2);
void matvec_rows(const float* m, std::size_t rows, std::size_t cols, const float* v, float* out);
double dot_d(const double* a, const double* b, std::size_t n);
void axpy_d(double alpha, const double* x, double* y, std::size_t n);
}  // namespace avx2

}  // namespace cfx::kern
