#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "peflow/initial_data.hpp"
#include "peflow/trajectory_map.hpp"

namespace peflow::diag {

// Tolerance budget. Each check's default tolerance is
//     tol = A * kIntegratorEps + B * dt_grid^2
// with the constants below; kIntegratorEps bounds the RK4 + event-location
// error of a default-options run (dt_init 1e-3, t_tol 1e-10). Reports always
// carry the worst slack so the thresholds stay auditable.
inline constexpr double kIntegratorEps = 1e-10;
inline constexpr double kEnergyTolA = 100.0;   // E from snapshot states only
inline constexpr double kPairTolA = 1000.0;    // qspp/stability/oleinik position ratios
inline constexpr double kFlowTolA = 100.0;     // FP accumulation of the force integral
inline constexpr double kKineticTolB = 1.0;    // trapezoid on the snapshot grid

struct CheckRecord {
    std::string name;
    bool pass = false;
    double worst_slack = 0.0;  // most negative margin; >= -tol passes
    double tol = 0.0;
    size_t examined = 0;
    std::string note;
    nlohmann::json to_json() const;
};

struct DiagnosticsReport {
    std::vector<CheckRecord> checks;
    std::string config_hash;
    double c_used = 0.0;
    bool all_pass() const;
    nlohmann::json to_json() const;
};

struct EnergyBreakdown {
    double kinetic = 0.0, potential = 0.0, total = 0.0;
};

// Energy at a snapshot time, right limits at events. EP maps use W(x) = |x|.
EnergyBreakdown energy(const TrajectoryMap& tm, double t);

// E(t) <= E(s) + tol across all ordered snapshot pairs (events contribute
// both one-sided values).
CheckRecord check_energy_monotone(const TrajectoryMap& tm, double tol = -1.0);

// theta(t) = e^{(c+1)t^2} int_0^t e^{-(c+1)s^2} ds by adaptive quadrature.
double theta(double t, double c);

// int_0^t sum m gdot^2 ds <= (sum m v0^2 + 0.5 sum sum m m W'(xi-xj)^2) theta(t).
CheckRecord check_kinetic_bound(const TrajectoryMap& tm, double tol = -1.0);

// |X(y,t)-X(z,t)|/sigma(t) <= |X(y,s)-X(z,s)|/sigma(s) for grid 0 < s <= t.
CheckRecord check_qspp(const TrajectoryMap& tm, double tol = -1.0);

// 0 <= X(y,t)-X(z,t) <= cosh(sqrt(c)t)(y-z) + sinh_scale(t,c) TV(v0;[z,y]).
CheckRecord check_stability(const TrajectoryMap& tm, const InitialVelocity& v0,
                            double tol = -1.0);

// (v(x,t)-v(y,t))(x-y) <= kappa(t)(x-y)^2 on cluster pairs, t >= t_min.
CheckRecord check_oleinik(const TrajectoryMap& tm, double tol = -1.0, double t_min = 1e-9);

// |sum m g(X) v(t+) - sum m g(X)(v0 - I(t))| with I the force integral:
// integrator-accumulated when present, else trapezoid over snapshots.
double flow_equation_residual(const TrajectoryMap& tm, double t,
                              const std::function<double(double)>& g);
// Worst residual over the basis {1, id, per-cluster indicators}.
double flow_equation_residual_basis(const TrajectoryMap& tm, double t);
CheckRecord check_flow_equation(const TrajectoryMap& tm, double tol = -1.0);

// C-infinity bump phi(x,t) = psi((x-xc)/xw) psi((t-tc)/tw), compact support.
struct SpaceTimeBump {
    double x_center = 0.0, x_halfwidth = 1.0;
    double t_center = 0.0, t_halfwidth = 1.0;
    double value(double x, double t) const;
    double dx(double x, double t) const;
    double dt(double x, double t) const;
    double t_support_end() const { return t_center + t_halfwidth; }
};

struct WeakFormResiduals {
    double mass = 0.0, momentum = 0.0;
};

// Residuals of the two weak-form identities, time integrals by trapezoid on
// the snapshot grid (event times included as nodes).
WeakFormResiduals weak_form_residual(const TrajectoryMap& tm, const SpaceTimeBump& phi);

// Quadratic Wasserstein distance between discrete measures via the exact
// quantile coupling.
double wasserstein2(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// The full suite (energy, kinetic, qspp, stability, oleinik, flow).
DiagnosticsReport run_all_checks(const TrajectoryMap& tm, const InitialVelocity& v0,
                                 std::span<const std::string> which = {});

} // namespace peflow::diag
