#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "peflow/initial_data.hpp"
#include "peflow/potential.hpp"

namespace peflow {

// A merged cluster keeps the smallest member atom index as its id.
struct MergeEvent {
    double time = 0.0;
    std::vector<uint32_t> participants;     // pre-merge cluster ids, left to right
    std::vector<uint32_t> absorbed;         // participants minus the resulting id
    uint32_t resulting = 0;
    std::vector<double> pre_velocities;     // aligned with participants
    std::vector<double> pre_masses;
    double post_velocity = 0.0;
    double gap_residual = 0.0;              // worst participant gap at the event time
};

// Cluster state at one instant. Event times are stored twice: a left-limit
// entry (pre_event) directly followed by a right-limit entry (post_event).
struct Snapshot {
    double time = 0.0;
    bool pre_event = false;
    bool post_event = false;
    std::vector<double> pos, vel, mass;       // per live cluster, positions increasing
    std::vector<uint32_t> ids;                // cluster id = min member atom
    std::vector<uint32_t> cluster_of_atom;    // atom index -> cluster index here
    // Per original atom: int_0^t (W' * rho_s)(X(s)) ds, accumulated by the
    // integrator (empty for trajectories loaded from CSV).
    std::vector<double> force_integral;
};

struct Interaction {
    enum class Kind { Smooth, EulerPoisson } kind = Kind::Smooth;
    Potential potential;  // meaningful for Smooth
    double semiconvexity() const {
        return kind == Kind::Smooth ? potential.semiconvexity() : 0.0;
    }
    bool is_ep() const { return kind == Kind::EulerPoisson; }
};

// Monotone piecewise-linear map through given nodes with capped end slopes.
class MonotoneMap {
public:
    MonotoneMap(std::vector<double> xs, std::vector<double> ys, double end_slope_cap);
    double operator()(double x) const;
    size_t node_count() const { return xs_.size(); }

private:
    std::vector<double> xs_, ys_;
    double left_slope_ = 0.0, right_slope_ = 0.0;
};

struct VelocityField {
    double time = 0.0;
    bool at_event = false;  // right-limit values returned at an event time
    std::vector<double> positions, velocities, masses;
};

/// Full history of one sticky-particle run: initial data, merge events, and
/// cluster snapshots at the output grid plus all event times. Immutable after
/// simulation; all queries are safe concurrently.
class TrajectoryMap {
public:
    TrajectoryMap(std::vector<double> x0, std::vector<double> m0, std::vector<double> v0,
                  Interaction interaction, double horizon,
                  std::vector<Snapshot> snapshots, std::vector<MergeEvent> events,
                  std::string options_json = {});

    size_t atom_count() const { return x0_.size(); }
    double horizon() const { return horizon_; }
    std::span<const double> initial_positions() const { return x0_; }
    std::span<const double> initial_masses() const { return m0_; }
    std::span<const double> initial_velocities() const { return v0_; }
    const Interaction& interaction() const { return interaction_; }
    const std::vector<Snapshot>& snapshots() const { return snaps_; }
    const std::vector<MergeEvent>& events() const { return events_; }
    const std::string& options_json() const { return options_json_; }

    bool has_force_integrals() const;

    // Position of atom i's cluster at t in [0, horizon]; cubic Hermite between
    // snapshots (exact at snapshot times). Throws std::out_of_range otherwise.
    double eval_x(size_t atom, double t) const;

    // Monotone map f with f(X(y,s)) = X(y,t) on atoms, 0 < s <= t; end slopes
    // capped at sinh(sqrt(c) t)/sinh(sqrt(c) s) (t/s when c = 0).
    MonotoneMap flow_between(double s, double t) const;

    DiscreteMeasure push_forward(double t) const;

    // Mass-weighted average of per-atom g over each time-t cluster.
    std::vector<double> conditional_expectation(double t, std::span<const double> g) const;

    // Borel velocity on supp(rho_t); right limits at event times (flagged).
    VelocityField velocity_field(double t) const;

    // Latest snapshot with time <= t (the right-limit entry at event times).
    const Snapshot& state_at(double t) const;
    // Unique snapshot times (event times once), with their right-limit states.
    std::vector<size_t> unique_time_indices() const;

private:
    size_t locate(double t) const;

    std::vector<double> x0_, m0_, v0_;
    Interaction interaction_;
    double horizon_;
    std::vector<Snapshot> snaps_;
    std::vector<MergeEvent> events_;
    std::string options_json_;
};

// sinh(sqrt(c) t)/sqrt(c) with its c -> 0 limit t.
double sinh_scale(double t, double c);
// The QSPP normalization sigma(t): sinh(sqrt(c) t), or t when c = 0.
double qspp_sigma(double t, double c);
// One-sided Lipschitz constant sqrt(c)/tanh(sqrt(c) t), or 1/t when c = 0.
double oleinik_kappa(double t, double c);

} // namespace peflow
