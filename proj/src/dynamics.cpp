#include "peflow/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "peflow/errors.hpp"
#include "peflow/kernels.hpp"

namespace peflow {

SolverOptions SolverOptions::from_json(const nlohmann::json& j) {
    SolverOptions o;
    for (auto& [key, _] : j.items()) {
        static const char* known[] = {"dt_init", "gap_tol", "t_tol", "output_times",
                                      "max_steps"};
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return key == k; }) == std::end(known))
            throw ValidationError("unknown key in solver opts: " + key);
    }
    o.dt_init = j.value("dt_init", o.dt_init);
    o.gap_tol = j.value("gap_tol", o.gap_tol);
    o.t_tol = j.value("t_tol", o.t_tol);
    o.max_steps = j.value("max_steps", o.max_steps);
    if (j.contains("output_times"))
        o.output_times = j.at("output_times").get<std::vector<double>>();
    if (!(o.dt_init > 0)) throw ValidationError("dt_init must be > 0");
    if (!(o.max_steps > 0)) throw ValidationError("max_steps must be > 0");
    return o;
}

nlohmann::json SolverOptions::to_json() const {
    return nlohmann::json{{"dt_init", dt_init},
                          {"gap_tol", gap_tol},
                          {"t_tol", t_tol},
                          {"output_times", output_times},
                          {"max_steps", max_steps}};
}

double SimState::min_gap() const {
    double g = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k + 1 < pos.size(); ++k) g = std::min(g, pos[k + 1] - pos[k]);
    return g;
}

double SimState::total_momentum() const {
    double p = 0.0;
    for (size_t k = 0; k < pos.size(); ++k) p += mass[k] * vel[k];
    return p;
}

std::vector<double> accelerations(const SimState& state, const Potential& p) {
    const size_t n = state.cluster_count();
    std::vector<double> conv(n);
    kernels::wprime_convolve(p, state.pos, state.pos, state.mass, conv);
    for (double& c : conv) c = -c;
    return conv;
}

namespace {

// RK4 stage evaluation on flat position/velocity arrays.
void eval_accels(const Potential& p, const std::vector<double>& pos,
                 const std::vector<double>& mass, std::vector<double>& out) {
    kernels::wprime_convolve(p, pos, pos, mass, out);
    for (double& c : out) c = -c;
}

} // namespace

SimState advance_segment(const SimState& state, const Potential& p, double dt) {
    if (dt == 0.0) return state;
    const size_t n = state.cluster_count();
    SimState next = state;
    next.time = state.time + dt;

    std::vector<double> xs(n), a1(n), a2(n), a3(n), a4(n);
    std::vector<double> k1x(n), k2x(n), k3x(n), k4x(n);

    eval_accels(p, state.pos, state.mass, a1);
    for (size_t k = 0; k < n; ++k) k1x[k] = state.vel[k];

    for (size_t k = 0; k < n; ++k) xs[k] = state.pos[k] + 0.5 * dt * k1x[k];
    eval_accels(p, xs, state.mass, a2);
    for (size_t k = 0; k < n; ++k) k2x[k] = state.vel[k] + 0.5 * dt * a1[k];

    for (size_t k = 0; k < n; ++k) xs[k] = state.pos[k] + 0.5 * dt * k2x[k];
    eval_accels(p, xs, state.mass, a3);
    for (size_t k = 0; k < n; ++k) k3x[k] = state.vel[k] + 0.5 * dt * a2[k];

    for (size_t k = 0; k < n; ++k) xs[k] = state.pos[k] + dt * k3x[k];
    eval_accels(p, xs, state.mass, a4);
    for (size_t k = 0; k < n; ++k) k4x[k] = state.vel[k] + dt * a3[k];

    for (size_t k = 0; k < n; ++k) {
        next.pos[k] = state.pos[k] + dt / 6.0 * (k1x[k] + 2 * k2x[k] + 2 * k3x[k] + k4x[k]);
        const double dv = dt / 6.0 * (a1[k] + 2 * a2[k] + 2 * a3[k] + a4[k]);
        next.vel[k] = state.vel[k] + dv;
        // force integral advances by -dv for every member (identical stage sums)
        for (uint32_t atom : state.members[k]) next.force_integral[atom] -= dv;
        if (!std::isfinite(next.pos[k]) || !std::isfinite(next.vel[k]))
            throw IntegrationError("non-finite state at t=" + std::to_string(next.time));
    }
    return next;
}

std::optional<double> locate_collision(const SimState& before, const SimState& after,
                                       const Potential& p, double gap_tol, double t_tol) {
    if (after.min_gap() > gap_tol) return std::nullopt;
    // Bisect on the substep length; contact is certain at hi.
    double lo = 0.0, hi = after.time - before.time;
    while (hi - lo > t_tol) {
        const double mid = 0.5 * (lo + hi);
        const SimState trial = advance_segment(before, p, mid);
        if (trial.min_gap() <= gap_tol) hi = mid;
        else lo = mid;
    }
    return before.time + hi;
}

MergeEvent merge(SimState& state, size_t first, size_t last) {
    if (last <= first || last >= state.cluster_count())
        throw std::logic_error("merge needs an adjacent run of >= 2 clusters");
    MergeEvent ev;
    ev.time = state.time;
    double msum = 0.0, xsum = 0.0, vsum = 0.0;
    std::vector<uint32_t> members;
    for (size_t k = first; k <= last; ++k) {
        ev.participants.push_back(state.members[k].front());
        ev.pre_velocities.push_back(state.vel[k]);
        ev.pre_masses.push_back(state.mass[k]);
        msum += state.mass[k];
        xsum += state.mass[k] * state.pos[k];
        vsum += state.mass[k] * state.vel[k];
        members.insert(members.end(), state.members[k].begin(), state.members[k].end());
        if (k > first)
            ev.gap_residual = std::max(ev.gap_residual, state.pos[k] - state.pos[k - 1]);
    }
    std::sort(members.begin(), members.end());
    ev.resulting = members.front();
    for (uint32_t id : ev.participants)
        if (id != ev.resulting) ev.absorbed.push_back(id);
    ev.post_velocity = vsum / msum;

    state.pos[first] = xsum / msum;
    state.vel[first] = ev.post_velocity;
    state.mass[first] = msum;
    state.members[first] = std::move(members);
    state.pos.erase(state.pos.begin() + first + 1, state.pos.begin() + last + 1);
    state.vel.erase(state.vel.begin() + first + 1, state.vel.begin() + last + 1);
    state.mass.erase(state.mass.begin() + first + 1, state.mass.begin() + last + 1);
    state.members.erase(state.members.begin() + first + 1, state.members.begin() + last + 1);
    return ev;
}

namespace {

Snapshot make_snapshot(const SimState& s, bool pre, bool post) {
    Snapshot snap;
    snap.time = s.time;
    snap.pre_event = pre;
    snap.post_event = post;
    snap.pos = s.pos;
    snap.vel = s.vel;
    snap.mass = s.mass;
    snap.force_integral = s.force_integral;
    size_t atoms = 0;
    for (const auto& mem : s.members) atoms += mem.size();
    snap.cluster_of_atom.resize(atoms);
    snap.ids.resize(s.cluster_count());
    for (size_t k = 0; k < s.cluster_count(); ++k) {
        snap.ids[k] = s.members[k].front();
        for (uint32_t atom : s.members[k]) snap.cluster_of_atom[atom] = static_cast<uint32_t>(k);
    }
    return snap;
}

// Merge every adjacent run with gaps <= gap_tol, transitively, rescanning
// after each merge (Prop-style maximal colliding sets).
void merge_cascade(SimState& state, double gap_tol, std::vector<MergeEvent>& events) {
    bool merged = true;
    while (merged) {
        merged = false;
        for (size_t k = 0; k + 1 < state.cluster_count(); ++k) {
            if (state.pos[k + 1] - state.pos[k] <= gap_tol) {
                size_t last = k + 1;
                while (last + 1 < state.cluster_count() &&
                       state.pos[last + 1] - state.pos[last] <= gap_tol)
                    ++last;
                events.push_back(merge(state, k, last));
                merged = true;
                break;
            }
        }
    }
}

std::vector<double> resolve_output_times(const SolverOptions& opts, double T) {
    std::vector<double> times = opts.output_times;
    if (times.empty()) {
        const int n = 61;
        times.resize(n);
        for (int i = 0; i < n; ++i) times[static_cast<size_t>(i)] = T * i / (n - 1);
    }
    for (double t : times)
        if (!(t >= 0.0) || t > T) throw ValidationError("output time outside [0, T]");
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    if (times.empty() || times.front() != 0.0) times.insert(times.begin(), 0.0);
    if (times.back() != T) times.push_back(T);
    return times;
}

} // namespace

TrajectoryMap simulate(const DiscreteMeasure& rho0, const InitialVelocity& v0,
                       const Potential& p, double horizon, const SolverOptions& opts) {
    std::vector<double> v0_atoms(rho0.size());
    for (size_t i = 0; i < rho0.size(); ++i) v0_atoms[i] = v0(rho0.position(i));
    return simulate(rho0, v0_atoms, p, horizon, opts);
}

TrajectoryMap simulate(const DiscreteMeasure& rho0, const std::vector<double>& v0_atoms,
                       const Potential& p, double horizon, const SolverOptions& opts) {
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");
    const size_t n = rho0.size();
    if (v0_atoms.size() != n) throw std::invalid_argument("per-atom velocities size mismatch");

    const double diam = rho0.support_diameter();
    const double gap_tol = opts.gap_tol > 0 ? opts.gap_tol : 1e-9 * std::max(diam, 1e-30);
    const double t_tol = opts.t_tol > 0 ? opts.t_tol : 1e-10 * std::max(1.0, horizon);
    const std::vector<double> out_times = resolve_output_times(opts, horizon);

    SimState state;
    state.time = 0.0;
    state.pos.assign(rho0.positions().begin(), rho0.positions().end());
    state.vel = v0_atoms;
    state.mass.assign(rho0.masses().begin(), rho0.masses().end());
    state.members.resize(n);
    for (size_t i = 0; i < n; ++i) state.members[i] = {static_cast<uint32_t>(i)};
    state.force_integral.assign(n, 0.0);

    std::vector<MergeEvent> events;
    std::vector<Snapshot> snaps;

    // Atoms closer than gap_tol at load merge immediately (recorded at t = 0).
    if (state.min_gap() <= gap_tol) {
        snaps.push_back(make_snapshot(state, true, false));
        merge_cascade(state, gap_tol, events);
        snaps.push_back(make_snapshot(state, false, true));
    } else {
        snaps.push_back(make_snapshot(state, false, false));
    }

    double dt = opts.dt_init;
    size_t next_out = 1;  // out_times[0] == 0 already recorded
    double steps = 0;

    while (next_out < out_times.size()) {
        if (++steps > opts.max_steps)
            throw TruncationError("max_steps exceeded at t=" + std::to_string(state.time));
        const double t_target = out_times[next_out];
        if (state.time >= t_target) {  // an event snapshot already sits here
            ++next_out;
            continue;
        }
        const bool clamped = (t_target - state.time) <= dt;
        const double h = clamped ? (t_target - state.time) : dt;
        SimState after = advance_segment(state, p, h);
        if (clamped) after.time = t_target;

        const double g0 = state.min_gap();
        const double g1 = after.min_gap();
        if (g1 > gap_tol && g1 < 0.5 * g0 && h > 16 * t_tol) {
            dt = 0.5 * h;  // gap shrinking fast: refine before accepting
            continue;
        }

        if (auto t_hit = locate_collision(state, after, p, gap_tol, t_tol)) {
            SimState at_event = advance_segment(state, p, *t_hit - state.time);
            snaps.push_back(make_snapshot(at_event, true, false));
            merge_cascade(at_event, gap_tol, events);
            snaps.push_back(make_snapshot(at_event, false, true));
            state = std::move(at_event);
            dt = opts.dt_init;
            continue;
        }

        state = std::move(after);
        if (clamped) {
            snaps.push_back(make_snapshot(state, false, false));
            ++next_out;
        } else if (dt < opts.dt_init) {
            dt = std::min(2 * dt, opts.dt_init);
        }
    }

    Interaction inter{Interaction::Kind::Smooth, p};
    return TrajectoryMap(std::vector<double>(rho0.positions().begin(), rho0.positions().end()),
                         std::vector<double>(rho0.masses().begin(), rho0.masses().end()),
                         v0_atoms, std::move(inter), horizon, std::move(snaps),
                         std::move(events), opts.to_json().dump());
}

} // namespace peflow
