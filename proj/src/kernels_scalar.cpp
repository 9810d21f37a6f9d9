#include <cmath>
#include <cstddef>

#include "peflow/kernels.hpp"

namespace peflow::kernels {

namespace {

void conv_quadratic_scalar(const double* ex, size_t ne, const double* x, const double* m,
                           size_t n, double a, double* out) {
    for (size_t e = 0; e < ne; ++e) {
        double acc = 0.0;
        for (size_t j = 0; j < n; ++j) acc += m[j] * (a * (ex[e] - x[j]));
        out[e] = acc;
    }
}

void conv_smooth_abs_scalar(const double* ex, size_t ne, const double* x, const double* m,
                            size_t n, double eps, double* out) {
    const double e2 = eps * eps;
    for (size_t e = 0; e < ne; ++e) {
        double acc = 0.0;
        for (size_t j = 0; j < n; ++j) {
            const double d = ex[e] - x[j];
            acc += m[j] * (d / std::sqrt(d * d + e2));
        }
        out[e] = acc;
    }
}

double energy_quadratic_scalar(const double* x, const double* m, size_t n, double a) {
    double total = 0.0;
    for (size_t k = 0; k < n; ++k) {
        double row = 0.0;
        for (size_t l = 0; l < n; ++l) {
            const double d = x[k] - x[l];
            row += m[l] * (0.5 * a * d * d);
        }
        total += m[k] * row;
    }
    return 0.5 * total;
}

double energy_smooth_abs_scalar(const double* x, const double* m, size_t n, double eps) {
    const double e2 = eps * eps;
    double total = 0.0;
    for (size_t k = 0; k < n; ++k) {
        double row = 0.0;
        for (size_t l = 0; l < n; ++l) {
            const double d = x[k] - x[l];
            row += m[l] * std::sqrt(d * d + e2);
        }
        total += m[k] * row;
    }
    return 0.5 * total;
}

double energy_abs_scalar(const double* x, const double* m, size_t n, double) {
    double total = 0.0;
    for (size_t k = 0; k < n; ++k) {
        double row = 0.0;
        for (size_t l = 0; l < n; ++l) row += m[l] * std::abs(x[k] - x[l]);
        total += m[k] * row;
    }
    return 0.5 * total;
}

} // namespace

const Backend& scalar_backend() {
    static const Backend b{"scalar",
                           conv_quadratic_scalar,
                           conv_smooth_abs_scalar,
                           energy_quadratic_scalar,
                           energy_smooth_abs_scalar,
                           energy_abs_scalar};
    return b;
}

} // namespace peflow::kernels
