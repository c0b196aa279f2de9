#include "ardiff/kernels.hpp"

namespace ardiff::kernels {
namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void axpby_scalar(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a * x[i] + b * y[i];
    }
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += x[i] * y[i];
    }
    return acc;
}

double sum_squares_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += x[i] * x[i];
    }
    return acc;
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{Backend::Scalar, axpy_scalar, axpby_scalar, dot_scalar, sum_squares_scalar};
    return table;
}

}  // namespace ardiff::kernels
