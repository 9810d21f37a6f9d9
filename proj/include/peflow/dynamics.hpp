#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "peflow/initial_data.hpp"
#include "peflow/potential.hpp"
#include "peflow/trajectory_map.hpp"

namespace peflow {

struct SolverOptions {
    double dt_init = 1e-3;
    double gap_tol = -1.0;  // < 0: 1e-9 * support diameter
    double t_tol = -1.0;    // < 0: 1e-10 * max(1, T)
    std::vector<double> output_times;  // empty: 61 uniform times on [0, T]
    double max_steps = 1e7;

    static SolverOptions from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Live integration state: ordered clusters plus the per-atom force integral
// accumulated with the same RK4 stage weights that update the velocities.
struct SimState {
    double time = 0.0;
    std::vector<double> pos, vel, mass;
    std::vector<std::vector<uint32_t>> members;  // sorted atom ids per cluster
    std::vector<double> force_integral;          // per original atom

    size_t cluster_count() const { return pos.size(); }
    double min_gap() const;
    double total_momentum() const;
};

// a_k = -sum_j M_j W'(gamma_k - gamma_j) over clusters (self term vanishes).
std::vector<double> accelerations(const SimState& state, const Potential& p);

// One classical RK4 step of the smooth between-collision ODE. The caller is
// responsible for resolving any collision inside (t, t+dt) first.
SimState advance_segment(const SimState& state, const Potential& p, double dt);

// Earliest time in (before.time, after.time] at which an adjacent gap reaches
// gap_tol (or crosses), located by bisection on re-integrated substeps to
// t_tol. Returns nullopt when no gap closed.
std::optional<double> locate_collision(const SimState& before, const SimState& after,
                                       const Potential& p, double gap_tol, double t_tol);

// Perfectly inelastic merge of an adjacent run [first, last] of clusters:
// summed mass, member union, mass-weighted position and velocity.
MergeEvent merge(SimState& state, size_t first, size_t last);

TrajectoryMap simulate(const DiscreteMeasure& rho0, const InitialVelocity& v0,
                       const Potential& p, double horizon, const SolverOptions& opts = {});

// Per-atom initial velocities variant (coincident atoms already merged).
TrajectoryMap simulate(const DiscreteMeasure& rho0, const std::vector<double>& v0_atoms,
                       const Potential& p, double horizon, const SolverOptions& opts = {});

} // namespace peflow
