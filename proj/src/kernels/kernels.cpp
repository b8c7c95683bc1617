#include "duetkd/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace duetkd::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double squared_norm(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
    return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double* x, double alpha, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

}  // namespace scalar

bool avx2_available() {
#if defined(DUETKD_HAVE_AVX2_SOURCES) && (defined(__x86_64__) || defined(_M_X64))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

Backend pick_initial_backend() {
    const char* env = std::getenv("DUETKD_KERNELS");
    if (env != nullptr) {
        std::string v(env);
        if (v == "scalar") return Backend::Scalar;
        if (v == "avx2") {
            if (!avx2_available())
                throw std::runtime_error("DUETKD_KERNELS=avx2 but AVX2 is unavailable");
            return Backend::Avx2;
        }
        // anything else, including "auto", falls through to detection
    }
    return avx2_available() ? Backend::Avx2 : Backend::Scalar;
}

Backend& current_backend() {
    static Backend b = pick_initial_backend();
    return b;
}

}  // namespace

Backend active_backend() { return current_backend(); }

std::string backend_name(Backend b) {
    return b == Backend::Avx2 ? "avx2" : "scalar";
}

void set_backend(Backend b) {
    if (b == Backend::Avx2 && !avx2_available())
        throw std::runtime_error("AVX2 kernels not available on this machine/build");
    current_backend() = b;
}

double dot(const double* a, const double* b, std::size_t n) {
#if defined(DUETKD_HAVE_AVX2_SOURCES)
    if (current_backend() == Backend::Avx2) return avx2::dot(a, b, n);
#endif
    return scalar::dot(a, b, n);
}

double squared_norm(const double* a, std::size_t n) {
#if defined(DUETKD_HAVE_AVX2_SOURCES)
    if (current_backend() == Backend::Avx2) return avx2::squared_norm(a, n);
#endif
    return scalar::squared_norm(a, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
#if defined(DUETKD_HAVE_AVX2_SOURCES)
    if (current_backend() == Backend::Avx2) return avx2::axpy(alpha, x, y, n);
#endif
    return scalar::axpy(alpha, x, y, n);
}

void scale(double* x, double alpha, std::size_t n) {
#if defined(DUETKD_HAVE_AVX2_SOURCES)
    if (current_backend() == Backend::Avx2) return avx2::scale(x, alpha, n);
#endif
    return scalar::scale(x, alpha, n);
}

}  // namespace duetkd::kernels
