#pragma once

// Dense double-precision vector kernels used by the diffusion math and the
// denoiser. Every kernel has a scalar reference implementation; vectorized
// variants (AVX2+FMA on x86-64, NEON on AArch64) are selected once at runtime.

#include <cstddef>
#include <span>
#include <string_view>

namespace ardiff::kernels {

enum class Backend {
    Scalar,
    Avx2,
    Neon,
};

struct KernelTable {
    Backend backend;
    /// y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    /// out[i] = a * x[i] + b * y[i]; out may alias x or y.
    void (*axpby)(double a, const double* x, double b, const double* y, double* out, std::size_t n);
    double (*dot)(const double* x, const double* y, std::size_t n);
    double (*sum_squares)(const double* x, std::size_t n);
};

const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in
const KernelTable* neon_table();  // nullptr when not compiled in

bool cpu_supports(Backend backend);

/// The table used by the free functions below. Chosen on first use: the best
/// backend the CPU supports, unless ARDIFF_KERNELS=scalar|avx2|neon says otherwise.
const KernelTable& active();

/// Forces a backend for the rest of the process. Returns false (and leaves
/// the selection unchanged) when the backend is unavailable.
bool select_backend(Backend backend);

std::string_view backend_name(Backend backend);

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    active().axpy(a, x.data(), y.data(), y.size());
}

inline void axpby(double a, std::span<const double> x, double b, std::span<const double> y, std::span<double> out) {
    active().axpby(a, x.data(), b, y.data(), out.data(), out.size());
}

inline double dot(std::span<const double> x, std::span<const double> y) {
    return active().dot(x.data(), y.data(), x.size());
}

inline double sum_squares(std::span<const double> x) {
    return active().sum_squares(x.data(), x.size());
}

}  // namespace ardiff::kernels
