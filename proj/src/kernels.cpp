#include "peflow/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace peflow::kernels {

namespace {

const Backend* g_active = nullptr;

const Backend* resolve(std::string_view name) {
    if (name == "scalar") return &scalar_backend();
    if (name == "avx2") {
        const Backend* b = avx2_backend();
        if (!b) throw std::runtime_error("avx2 kernels requested but unavailable on this CPU");
        return b;
    }
    if (name == "auto" || name.empty()) {
        if (const Backend* b = avx2_backend()) return b;
        return &scalar_backend();
    }
    throw std::runtime_error("unknown kernel backend: " + std::string(name));
}

} // namespace

const Backend& active_backend() {
    if (!g_active) {
        const char* env = std::getenv("PEFLOW_KERNELS");
        g_active = resolve(env ? env : "auto");
    }
    return *g_active;
}

void select_backend(std::string_view name) { g_active = resolve(name); }

void wprime_convolve(const Potential& p, std::span<const double> ex,
                     std::span<const double> xs, std::span<const double> ms,
                     std::span<double> out) {
    const Backend& b = active_backend();
    switch (p.kind()) {
        case PotentialKind::Zero:
            for (double& o : out) o = 0.0;
            return;
        case PotentialKind::Quadratic:
            b.conv_quadratic(ex.data(), ex.size(), xs.data(), ms.data(), xs.size(),
                             p.curvature(), out.data());
            return;
        case PotentialKind::SmoothAbs:
            b.conv_smooth_abs(ex.data(), ex.size(), xs.data(), ms.data(), xs.size(),
                              p.epsilon(), out.data());
            return;
        case PotentialKind::Custom:
            for (size_t e = 0; e < ex.size(); ++e) {
                double acc = 0.0;
                for (size_t j = 0; j < xs.size(); ++j)
                    acc += ms[j] * p.w_prime(ex[e] - xs[j]);
                out[e] = acc;
            }
            return;
    }
}

double interaction_energy(const Potential& p, std::span<const double> xs,
                          std::span<const double> ms) {
    const Backend& b = active_backend();
    switch (p.kind()) {
        case PotentialKind::Zero: return 0.0;
        case PotentialKind::Quadratic:
            return b.energy_quadratic(xs.data(), ms.data(), xs.size(), p.curvature());
        case PotentialKind::SmoothAbs:
            return b.energy_smooth_abs(xs.data(), ms.data(), xs.size(), p.epsilon());
        case PotentialKind::Custom: {
            double total = 0.0;
            for (size_t k = 0; k < xs.size(); ++k) {
                double row = 0.0;
                for (size_t l = 0; l < xs.size(); ++l) row += ms[l] * p.w(xs[k] - xs[l]);
                total += ms[k] * row;
            }
            return 0.5 * total;
        }
    }
    return 0.0;
}

double abs_interaction_energy(std::span<const double> xs, std::span<const double> ms) {
    return active_backend().energy_abs(xs.data(), ms.data(), xs.size(), 0.0);
}

} // namespace peflow::kernels
