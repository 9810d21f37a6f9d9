#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace peflow {

/// Finitely supported probability measure: sorted distinct atoms with positive
/// masses summing to 1 (within 1e-12). Coincident input atoms are merged at
/// construction by summing their masses. Immutable.
class DiscreteMeasure {
public:
    DiscreteMeasure(std::vector<double> positions, std::vector<double> masses);

    size_t size() const { return xs_.size(); }
    std::span<const double> positions() const { return xs_; }
    std::span<const double> masses() const { return ms_; }
    double position(size_t i) const { return xs_[i]; }
    double mass(size_t i) const { return ms_[i]; }
    double second_moment() const { return second_moment_; }
    double support_diameter() const { return xs_.back() - xs_.front(); }

    static DiscreteMeasure from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

private:
    std::vector<double> xs_, ms_;
    double second_moment_ = 0.0;
};

/// Absolutely continuous initial velocity as a piecewise-linear table with
/// constant extrapolation beyond the breakpoint range. Total-variation queries
/// are exact for this representation. Immutable.
class InitialVelocity {
public:
    InitialVelocity(std::vector<double> breakpoints, std::vector<double> values);
    static InitialVelocity constant(double v);

    double operator()(double x) const;

    // Exact int_a^b |v0'|; requires a <= b; additive over adjacent intervals.
    double total_variation(double a, double b) const;

    // Modulus omega(r): sup of the total variation over windows of length <= r.
    double modulus(double r) const;

    std::span<const double> breakpoints() const { return xs_; }
    std::span<const double> values() const { return vs_; }

    static InitialVelocity from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

private:
    std::vector<double> xs_, vs_;
    std::vector<double> prefix_tv_;  // prefix_tv_[i] = TV over [x_0, x_i]
};

/// Description of a rho_0 to be quantized: explicit atoms, uniform(a,b),
/// gaussian(mu,sigma), or a tabulated CDF.
struct MeasureSpec {
    enum class Kind { Atoms, Uniform, Gaussian, TabulatedCdf } kind = Kind::Uniform;
    std::vector<double> atom_positions, atom_masses;  // Atoms
    double a = 0.0, b = 1.0;                          // Uniform
    double mu = 0.0, sigma = 1.0;                     // Gaussian
    std::vector<double> cdf_x, cdf_f;                 // TabulatedCdf (f nondecreasing 0..1)
    int n = 0;                                        // requested atom count (0 = spec default)

    double quantile(double u) const;  // F^{-1}(u) for u in (0,1); Atoms unsupported
    static MeasureSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Quantile-midpoint quantization: N atoms at F^{-1}((k-1/2)/N) with mass 1/N.
/// An explicit atom list is returned unchanged (after coincident-merge).
DiscreteMeasure quantize(const MeasureSpec& spec, int n);

/// Per-atom (x, m, v) triples merged at load: coincident atoms sum masses and
/// mass-average velocities. Returns the measure plus per-atom velocities
/// aligned with it.
std::pair<DiscreteMeasure, std::vector<double>>
merge_coincident(std::span<const double> xs, std::span<const double> ms,
                 std::span<const double> vs);

// Inverse standard normal CDF, accurate to ~1e-15 (rational guess + Newton).
double normal_quantile(double u);

} // namespace peflow
