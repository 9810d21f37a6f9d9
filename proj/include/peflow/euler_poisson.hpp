#pragma once

#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "peflow/dynamics.hpp"
#include "peflow/initial_data.hpp"
#include "peflow/trajectory_map.hpp"

namespace peflow::ep {

// (sgn * mu)(x) = sum_i m_i sgn(x - x_i), with sgn(0) = 0.
double sgn_convolve(const DiscreteMeasure& mu, double x);

struct EpOptions {
    std::vector<double> output_times;  // empty: 61 uniform times on [0, T]
    static EpOptions from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Exact event-driven integration of the 1D Euler-Poisson particle system:
// piecewise-constant forces (mass right minus mass left), closed-form
// parabolas between events, closed-form quadratic event roots, mass-weighted
// inelastic merges. No step-size or gap tolerance enters.
TrajectoryMap simulate_ep(const DiscreteMeasure& rho0, const InitialVelocity& v0,
                          double horizon, const EpOptions& opts = {});
TrajectoryMap simulate_ep(const DiscreteMeasure& rho0, const std::vector<double>& v0_atoms,
                          double horizon, const EpOptions& opts = {});

struct EpsilonContinuationReport {
    std::vector<double> epsilons;       // decreasing
    std::vector<double> times;          // shared output grid
    std::vector<std::vector<double>> distance;  // [k][time]: Lagrangian L2 to the EP run
    double final_distance = 0.0;        // d_K at the horizon
    double monotonicity_slack = 0.0;    // most positive d_{k+1}(T) - d_k(T)
    bool monotone = false;              // up to the slack tolerance used
    bool converged = false;             // d_K(T) <= tol
    nlohmann::json to_json() const;
};

// Runs the smoothed dynamics with SmoothAbs(eps_k) for each k and compares,
// atom by atom, against the exact EP run on the shared grid.
EpsilonContinuationReport epsilon_continuation(const DiscreteMeasure& rho0,
                                               const InitialVelocity& v0, double horizon,
                                               std::span<const double> epsilons,
                                               const SolverOptions& smooth_opts = {},
                                               double tol = 1e-3,
                                               double monotone_slack = 1e-6,
                                               int jobs = 1);

std::vector<double> default_epsilons(int k_max);  // 2^0 .. 2^-k_max

// LHS - RHS of the subdifferential inequality for |x|: nonnegative up to
// rounding, computed by exact double sums.
double check_subdiff(const DiscreteMeasure& mu, std::span<const double> g);

} // namespace peflow::ep
