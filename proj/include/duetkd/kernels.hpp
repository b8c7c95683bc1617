#pragma once

// Dense double-precision kernels behind the engine's inner loops
// (embedding-store similarity scans, student logits and SGD updates).
// A scalar reference implementation always exists; on x86-64 an
// AVX2+FMA variant is selected at runtime when the CPU supports it.
// The active backend can be forced with the DUETKD_KERNELS environment
// variable ("scalar", "avx2", "auto") or set_backend().

#include <cstddef>
#include <string>

namespace duetkd::kernels {

enum class Backend { Scalar, Avx2 };

// Currently dispatched backend.
Backend active_backend();
std::string backend_name(Backend b);

// Force a backend. Throws std::runtime_error if it is not available
// on this machine/build.
void set_backend(Backend b);

bool avx2_available();

// Dispatched entry points.
double dot(const double* a, const double* b, std::size_t n);
double squared_norm(const double* a, std::size_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
// x *= alpha
void scale(double* x, double alpha, std::size_t n);

// Reference implementations, always available. Used as the equivalence
// oracle for the SIMD variants and as the fallback path.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_norm(const double* a, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double* x, double alpha, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_norm(const double* a, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double* x, double alpha, std::size_t n);
}  // namespace avx2
#endif

}  // namespace duetkd::kernels
