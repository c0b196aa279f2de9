// Built only on AArch64, where Advanced SIMD is architecturally guaranteed.
#include "ardiff/kernels.hpp"

#include <arm_neon.h>

namespace ardiff::kernels {
namespace {

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    }
    for (; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void axpby_neon(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    const float64x2_t vb = vdupq_n_f64(b);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t by = vmulq_f64(vb, vld1q_f64(y + i));
        vst1q_f64(out + i, vfmaq_f64(by, va, vld1q_f64(x + i)));
    }
    for (; i < n; ++i) {
        out[i] = a * x[i] + b * y[i];
    }
}

double dot_neon(const double* x, const double* y, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
    }
    double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) {
        acc += x[i] * y[i];
    }
    return acc;
}

double sum_squares_neon(const double* x, std::size_t n) {
    return dot_neon(x, x, n);
}

}  // namespace

const KernelTable* neon_table() {
    static const KernelTable table{Backend::Neon, axpy_neon, axpby_neon, dot_neon, sum_squares_neon};
    return &table;
}

}  // namespace ardiff::kernels
