#include <doctest.h>

#include <cmath>
#include <vector>

#include "cfx/kernels.hpp"
#include "cfx/rng.hpp"

using namespace cfx;

namespace {

std::vector<float> random_vec(size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (float& x : v) x = static_cast<float>(rng.next_gaussian());
    return v;
}

std::vector<double> random_vec_d(size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.next_gaussian();
    return v;
}

const std::vector<size_t> kSizes = {1, 2, 3, 7, 8, 9, 15, 16, 17, 31, 32, 33, 96, 100, 257};

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar and avx2 dot agree") {
    if (!kern::avx2::available()) return;
    Rng rng(1);
    for (size_t n : kSizes) {
        auto a = random_vec(n, rng);
        auto b = random_vec(n, rng);
        float s = kern::scalar::dot(a.data(), b.data(), n);
        float v = kern::avx2::dot(a.data(), b.data(), n);
        CHECK(v == doctest::Approx(s).epsilon(1e-4));
    }
}

TEST_CASE("scalar and avx2 axpy agree") {
    if (!kern::avx2::available()) return;
    Rng rng(2);
    for (size_t n : kSizes) {
        auto x = random_vec(n, rng);
        auto y0 = random_vec(n, rng);
        auto ys = y0, yv = y0;
        kern::scalar::axpy(0.37f, x.data(), ys.data(), n);
        kern::avx2::axpy(0.37f, x.data(), yv.data(), n);
        for (size_t i = 0; i < n; ++i) CHECK(yv[i] == doctest::Approx(ys[i]).epsilon(1e-5));
    }
}

TEST_CASE("scalar and avx2 l2_dist_sq agree") {
    if (!kern::avx2::available()) return;
    Rng rng(3);
    for (size_t n : kSizes) {
        auto a = random_vec(n, rng);
        auto b = random_vec(n, rng);
        float s = kern::scalar::l2_dist_sq(a.data(), b.data(), n);
        float v = kern::avx2::l2_dist_sq(a.data(), b.data(), n);
        CHECK(v == doctest::Approx(s).epsilon(1e-4));
    }
}

TEST_CASE("scalar and avx2 sgd_pair_update agree") {
    if (!kern::avx2::available()) return;
    Rng rng(4);
    for (size_t n : kSizes) {
        auto p0 = random_vec(n, rng);
        auto q0 = random_vec(n, rng);
        auto ps = p0, qs = q0, pv = p0, qv = q0;
        kern::scalar::sgd_pair_update(ps.data(), qs.data(), n, 0.01f, 0.8f, 0.05f);
        kern::avx2::sgd_pair_update(pv.data(), qv.data(), n, 0.01f, 0.8f, 0.05f);
        for (size_t i = 0; i < n; ++i) {
            CHECK(pv[i] == doctest::Approx(ps[i]).epsilon(1e-5));
            CHECK(qv[i] == doctest::Approx(qs[i]).epsilon(1e-5));
        }
    }
}

TEST_CASE("scalar and avx2 matvec_rows agree") {
    if (!kern::avx2::available()) return;
    Rng rng(5);
    const size_t rows = 13, cols = 32;
    auto m = random_vec(rows * cols, rng);
    auto v = random_vec(cols, rng);
    std::vector<float> out_s(rows), out_v(rows);
    kern::scalar::matvec_rows(m.data(), rows, cols, v.data(), out_s.data());
    kern::avx2::matvec_rows(m.data(), rows, cols, v.data(), out_v.data());
    for (size_t r = 0; r < rows; ++r) CHECK(out_v[r] == doctest::Approx(out_s[r]).epsilon(1e-4));
}

TEST_CASE("scalar and avx2 double kernels agree") {
    if (!kern::avx2::available()) return;
    Rng rng(6);
    for (size_t n : kSizes) {
        auto a = random_vec_d(n, rng);
        auto b = random_vec_d(n, rng);
        CHECK(kern::avx2::dot_d(a.data(), b.data(), n) ==
              doctest::Approx(kern::scalar::dot_d(a.data(), b.data(), n)).epsilon(1e-12));
        auto ys = b, yv = b;
        kern::scalar::axpy_d(-1.3, a.data(), ys.data(), n);
        kern::avx2::axpy_d(-1.3, a.data(), yv.data(), n);
        for (size_t i = 0; i < n; ++i) CHECK(yv[i] == doctest::Approx(ys[i]).epsilon(1e-12));
    }
}

TEST_CASE("dispatch honors set_backend") {
    kern::set_backend(kern::Backend::Scalar);
    CHECK(kern::active_backend() == kern::Backend::Scalar);
    kern::set_backend(kern::Backend::Auto);
    if (kern::avx2::available()) {
        CHECK(kern::active_backend() == kern::Backend::Avx2);
    } else {
        CHECK(kern::active_backend() == kern::Backend::Scalar);
    }
}

TEST_CASE("dot of known vectors") {
    std::vector<float> a = {1.0f, 2.0f, 3.0f};
    std::vector<float> b = {4.0f, 5.0f, 6.0f};
    CHECK(kern::dot(a.data(), b.data(), 3) == doctest::Approx(32.0f));
    CHECK(kern::l2_dist_sq(a.data(), b.data(), 3) == doctest::Approx(27.0f));
}

}  // TEST_SUITE
