#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "duetkd/kernels.hpp"

using namespace duetkd;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

// Restore whatever backend dispatch had picked before a test forced one.
struct BackendGuard {
    kernels::Backend saved = kernels::active_backend();
    ~BackendGuard() { kernels::set_backend(saved); }
};

}  // namespace

TEST_CASE("scalar kernels match closed-form values") {
    const double a[] = {1.0, 2.0, 3.0};
    const double b[] = {4.0, -5.0, 6.0};
    CHECK(kernels::scalar::dot(a, b, 3) == doctest::Approx(12.0).epsilon(1e-15));
    CHECK(kernels::scalar::squared_norm(a, 3) == doctest::Approx(14.0).epsilon(1e-15));

    double y[] = {1.0, 1.0, 1.0};
    kernels::scalar::axpy(2.0, a, y, 3);
    CHECK(y[0] == doctest::Approx(3.0));
    CHECK(y[1] == doctest::Approx(5.0));
    CHECK(y[2] == doctest::Approx(7.0));

    double x[] = {2.0, -4.0};
    kernels::scalar::scale(x, 0.5, 2);
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(-2.0));
}

TEST_CASE("scalar handles empty and single-element inputs") {
    CHECK(kernels::scalar::dot(nullptr, nullptr, 0) == 0.0);
    CHECK(kernels::scalar::squared_norm(nullptr, 0) == 0.0);
    const double one = 3.0;
    CHECK(kernels::scalar::dot(&one, &one, 1) == doctest::Approx(9.0));
}

#if defined(__x86_64__) || defined(_M_X64)
TEST_CASE("avx2 kernels are equivalent to the scalar reference") {
    if (!kernels::avx2_available()) {
        MESSAGE("AVX2 unavailable on this machine; skipping equivalence sweep");
        return;
    }
    std::mt19937_64 rng(42);
    // Cover every remainder lane (n mod 4) and a range of larger sizes.
    std::vector<std::size_t> sizes;
    for (std::size_t n = 0; n <= 67; ++n) sizes.push_back(n);
    for (std::size_t n : {128u, 257u, 1024u, 4099u}) sizes.push_back(n);

    for (std::size_t n : sizes) {
        auto a = random_vec(rng, n);
        auto b = random_vec(rng, n);

        double ds = kernels::scalar::dot(a.data(), b.data(), n);
        double dv = kernels::avx2::dot(a.data(), b.data(), n);
        CHECK(std::abs(ds - dv) <= 1e-9 * (1.0 + std::abs(ds)));

        double ss = kernels::scalar::squared_norm(a.data(), n);
        double sv = kernels::avx2::squared_norm(a.data(), n);
        CHECK(std::abs(ss - sv) <= 1e-9 * (1.0 + ss));

        auto ys = b, yv = b;
        kernels::scalar::axpy(0.37, a.data(), ys.data(), n);
        kernels::avx2::axpy(0.37, a.data(), yv.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(ys[i] - yv[i]) <= 1e-12 * (1.0 + std::abs(ys[i])));

        auto xs = a, xv = a;
        kernels::scalar::scale(xs.data(), -1.75, n);
        kernels::avx2::scale(xv.data(), -1.75, n);
        for (std::size_t i = 0; i < n; ++i) CHECK(xs[i] == xv[i]);
    }
}
#endif

TEST_CASE("dispatch honors set_backend") {
    BackendGuard guard;

    kernels::set_backend(kernels::Backend::Scalar);
    CHECK(kernels::active_backend() == kernels::Backend::Scalar);
    const double a[] = {1.0, 2.0};
    CHECK(kernels::dot(a, a, 2) == doctest::Approx(5.0));

    if (kernels::avx2_available()) {
        kernels::set_backend(kernels::Backend::Avx2);
        CHECK(kernels::active_backend() == kernels::Backend::Avx2);
        CHECK(kernels::dot(a, a, 2) == doctest::Approx(5.0));
    } else {
        CHECK_THROWS_AS(kernels::set_backend(kernels::Backend::Avx2), std::runtime_error);
    }
}

TEST_CASE("backend names are stable") {
    CHECK(kernels::backend_name(kernels::Backend::Scalar) == "scalar");
    CHECK(kernels::backend_name(kernels::Backend::Avx2) == "avx2");
}

TEST_CASE("dispatched kernels agree with scalar regardless of backend") {
    BackendGuard guard;
    std::mt19937_64 rng(7);
    auto a = random_vec(rng, 333);
    auto b = random_vec(rng, 333);
    double reference = kernels::scalar::dot(a.data(), b.data(), 333);

    for (auto backend : {kernels::Backend::Scalar, kernels::Backend::Avx2}) {
        if (backend == kernels::Backend::Avx2 && !kernels::avx2_available()) continue;
        kernels::set_backend(backend);
        double got = kernels::dot(a.data(), b.data(), 333);
        CHECK(std::abs(got - reference) <= 1e-9 * (1.0 + std::abs(reference)));
    }
}
