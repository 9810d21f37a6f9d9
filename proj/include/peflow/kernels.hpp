#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "peflow/potential.hpp"

namespace peflow::kernels {

// The O(N^2) pairwise sums are the hot loops of the solver. Each has a scalar
// reference implementation and an AVX2 variant; the backend is picked once at
// runtime (PEFLOW_KERNELS=scalar|avx2|auto overrides). Backends may reorder
// summation, so cross-backend agreement is to rounding, not bitwise.

// out[e] = sum_j m[j] * W'(ex[e] - x[j]) for the parametrized potential family.
using ConvolveFn = void (*)(const double* ex, size_t ne, const double* x, const double* m,
                            size_t n, double param, double* out);
// 0.5 * sum_{k,l} m[k] m[l] W(x[k] - x[l]), self-terms included.
using EnergyFn = double (*)(const double* x, const double* m, size_t n, double param);

struct Backend {
    const char* name;
    ConvolveFn conv_quadratic;   // W'(d) = param * d
    ConvolveFn conv_smooth_abs;  // W'(d) = d / sqrt(d^2 + param^2)
    EnergyFn energy_quadratic;   // W(d) = (param/2) d^2
    EnergyFn energy_smooth_abs;  // W(d) = sqrt(d^2 + param^2)
    EnergyFn energy_abs;         // W(d) = |d|, param unused
};

const Backend& scalar_backend();
const Backend* avx2_backend();  // nullptr when AVX2 is not available at runtime
const Backend& active_backend();
void select_backend(std::string_view name);  // "scalar" | "avx2" | "auto"

// (W' * rho)(e) for each evaluation point, through the active backend where a
// vectorized form exists (Zero is identically 0; Custom runs scalar).
void wprime_convolve(const Potential& p, std::span<const double> eval_points,
                     std::span<const double> xs, std::span<const double> ms,
                     std::span<double> out);

// 0.5 sum_{k,l} m_k m_l W(x_k - x_l) including k = l (W(0) need not vanish).
double interaction_energy(const Potential& p, std::span<const double> xs,
                          std::span<const double> ms);

// Same double sum with W(d) = |d| (the gravitational interaction energy).
double abs_interaction_energy(std::span<const double> xs, std::span<const double> ms);

} // namespace peflow::kernels
