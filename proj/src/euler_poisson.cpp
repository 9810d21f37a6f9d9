#include "peflow/euler_poisson.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "peflow/errors.hpp"

namespace peflow::ep {

double sgn_convolve(const DiscreteMeasure& mu, double x) {
    double acc = 0.0;
    for (size_t i = 0; i < mu.size(); ++i) {
        const double d = x - mu.position(i);
        acc += mu.mass(i) * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
    }
    return acc;
}

EpOptions EpOptions::from_json(const nlohmann::json& j) {
    EpOptions o;
    for (auto& [key, _] : j.items())
        if (key != "output_times") throw ValidationError("unknown key in ep opts: " + key);
    if (j.contains("output_times"))
        o.output_times = j.at("output_times").get<std::vector<double>>();
    return o;
}

nlohmann::json EpOptions::to_json() const {
    return nlohmann::json{{"output_times", output_times}};
}

namespace {

struct EpState {
    double time = 0.0;
    std::vector<double> pos, vel, mass, accel;
    std::vector<std::vector<uint32_t>> members;
    std::vector<double> force_integral;  // per atom, exact per segment

    size_t count() const { return pos.size(); }
};

// accel_k = mass strictly right of k minus mass strictly left of k.
void recompute_accels(EpState& s) {
    const size_t n = s.count();
    s.accel.resize(n);
    double left = 0.0;
    std::vector<double> lefts(n);
    for (size_t k = 0; k < n; ++k) {
        lefts[k] = left;
        left += s.mass[k];
    }
    const double total = left;
    for (size_t k = 0; k < n; ++k) {
        const double right = total - lefts[k] - s.mass[k];
        s.accel[k] = right - lefts[k];
    }
}

// Advance every cluster by tau along its exact parabola.
void advance_exact(EpState& s, double tau) {
    for (size_t k = 0; k < s.count(); ++k) {
        s.pos[k] += (s.vel[k] + 0.5 * s.accel[k] * tau) * tau;
        const double dv = s.accel[k] * tau;
        // (sgn * rho)(gamma_k) = -accel_k, constant on the segment
        for (uint32_t atom : s.members[k]) s.force_integral[atom] += -s.accel[k] * tau;
        s.vel[k] += dv;
    }
    s.time += tau;
}

// Smallest positive root of g0 + dv t + (da/2) t^2; da < 0 and g0 > 0
// guarantee exactly one.
double gap_root(double g0, double dv, double da) {
    const double a = 0.5 * da, b = dv, c = g0;
    const double disc = b * b - 4 * a * c;
    const double s = std::sqrt(disc);
    const double q = -0.5 * (b + std::copysign(s, b == 0.0 ? 1.0 : b));
    const double r1 = q / a;
    const double r2 = c / q;
    double best = std::numeric_limits<double>::infinity();
    if (r1 > 0) best = std::min(best, r1);
    if (r2 > 0) best = std::min(best, r2);
    return best;
}

// Earliest collision among adjacent pairs; ties go to the leftmost pair.
std::pair<double, size_t> next_event(const EpState& s) {
    double best = std::numeric_limits<double>::infinity();
    size_t pair = 0;
    for (size_t k = 0; k + 1 < s.count(); ++k) {
        const double g0 = s.pos[k + 1] - s.pos[k];
        const double dv = s.vel[k + 1] - s.vel[k];
        const double da = s.accel[k + 1] - s.accel[k];  // = -(m_k + m_{k+1}) < 0
        const double tau = gap_root(g0, dv, da);
        if (tau < best) {
            best = tau;
            pair = k;
        }
    }
    return {best, pair};
}

Snapshot ep_snapshot(const EpState& s, bool pre, bool post) {
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
    snap.ids.resize(s.count());
    for (size_t k = 0; k < s.count(); ++k) {
        snap.ids[k] = s.members[k].front();
        for (uint32_t atom : s.members[k]) snap.cluster_of_atom[atom] = static_cast<uint32_t>(k);
    }
    return snap;
}

MergeEvent ep_merge(EpState& s, size_t first, size_t last) {
    MergeEvent ev;
    ev.time = s.time;
    double msum = 0.0, xsum = 0.0, vsum = 0.0;
    std::vector<uint32_t> members;
    for (size_t k = first; k <= last; ++k) {
        ev.participants.push_back(s.members[k].front());
        ev.pre_velocities.push_back(s.vel[k]);
        ev.pre_masses.push_back(s.mass[k]);
        msum += s.mass[k];
        xsum += s.mass[k] * s.pos[k];
        vsum += s.mass[k] * s.vel[k];
        members.insert(members.end(), s.members[k].begin(), s.members[k].end());
        if (k > first) ev.gap_residual = std::max(ev.gap_residual, s.pos[k] - s.pos[k - 1]);
    }
    std::sort(members.begin(), members.end());
    ev.resulting = members.front();
    for (uint32_t id : ev.participants)
        if (id != ev.resulting) ev.absorbed.push_back(id);
    ev.post_velocity = vsum / msum;

    s.pos[first] = xsum / msum;
    s.vel[first] = ev.post_velocity;
    s.mass[first] = msum;
    s.members[first] = std::move(members);
    s.pos.erase(s.pos.begin() + first + 1, s.pos.begin() + last + 1);
    s.vel.erase(s.vel.begin() + first + 1, s.vel.begin() + last + 1);
    s.mass.erase(s.mass.begin() + first + 1, s.mass.begin() + last + 1);
    s.members.erase(s.members.begin() + first + 1, s.members.begin() + last + 1);
    return ev;
}

void ep_merge_cascade(EpState& s, double tie_tol, std::vector<MergeEvent>& events) {
    bool merged = true;
    while (merged) {
        merged = false;
        for (size_t k = 0; k + 1 < s.count(); ++k) {
            if (s.pos[k + 1] - s.pos[k] <= tie_tol) {
                size_t last = k + 1;
                while (last + 1 < s.count() && s.pos[last + 1] - s.pos[last] <= tie_tol) ++last;
                events.push_back(ep_merge(s, k, last));
                merged = true;
                break;
            }
        }
    }
    recompute_accels(s);
}

std::vector<double> ep_output_times(const EpOptions& opts, double T) {
    std::vector<double> times = opts.output_times;
    if (times.empty()) {
        const int n = 61;
        times.resize(static_cast<size_t>(n));
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

TrajectoryMap simulate_ep(const DiscreteMeasure& rho0, const InitialVelocity& v0,
                          double horizon, const EpOptions& opts) {
    std::vector<double> v0_atoms(rho0.size());
    for (size_t i = 0; i < rho0.size(); ++i) v0_atoms[i] = v0(rho0.position(i));
    return simulate_ep(rho0, v0_atoms, horizon, opts);
}

TrajectoryMap simulate_ep(const DiscreteMeasure& rho0, const std::vector<double>& v0_atoms,
                          double horizon, const EpOptions& opts) {
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");
    const size_t n = rho0.size();
    if (v0_atoms.size() != n) throw std::invalid_argument("per-atom velocities size mismatch");
    for (double v : v0_atoms)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite initial velocity");

    const double tie_tol = 1e-13 * std::max(rho0.support_diameter(), 1e-30);
    const std::vector<double> out_times = ep_output_times(opts, horizon);

    EpState s;
    s.pos.assign(rho0.positions().begin(), rho0.positions().end());
    s.vel = v0_atoms;
    s.mass.assign(rho0.masses().begin(), rho0.masses().end());
    s.members.resize(n);
    for (size_t i = 0; i < n; ++i) s.members[i] = {static_cast<uint32_t>(i)};
    s.force_integral.assign(n, 0.0);
    recompute_accels(s);

    std::vector<MergeEvent> events;
    std::vector<Snapshot> snaps;
    snaps.push_back(ep_snapshot(s, false, false));

    size_t next_out = 1;
    while (next_out < out_times.size()) {
        auto [tau, pair] = next_event(s);
        (void)pair;
        const double t_event = s.time + tau;
        // Emit exact snapshots at every output time before the event.
        while (next_out < out_times.size() && out_times[next_out] < t_event) {
            EpState probe = s;
            advance_exact(probe, out_times[next_out] - s.time);
            probe.time = out_times[next_out];
            snaps.push_back(ep_snapshot(probe, false, false));
            ++next_out;
        }
        if (next_out >= out_times.size() || t_event > horizon) break;
        advance_exact(s, tau);
        s.time = t_event;
        snaps.push_back(ep_snapshot(s, true, false));
        ep_merge_cascade(s, tie_tol, events);
        snaps.push_back(ep_snapshot(s, false, true));
        while (next_out < out_times.size() && out_times[next_out] <= s.time) ++next_out;
    }

    std::sort(snaps.begin(), snaps.end(), [](const Snapshot& a, const Snapshot& b) {
        if (a.time != b.time) return a.time < b.time;
        return a.pre_event && !b.pre_event;
    });

    Interaction inter{Interaction::Kind::EulerPoisson, Potential::zero()};
    return TrajectoryMap(std::vector<double>(rho0.positions().begin(), rho0.positions().end()),
                         std::vector<double>(rho0.masses().begin(), rho0.masses().end()),
                         v0_atoms, std::move(inter), horizon, std::move(snaps),
                         std::move(events), opts.to_json().dump());
}

std::vector<double> default_epsilons(int k_max) {
    std::vector<double> eps;
    for (int k = 0; k <= k_max; ++k) eps.push_back(std::ldexp(1.0, -k));
    return eps;
}

EpsilonContinuationReport epsilon_continuation(const DiscreteMeasure& rho0,
                                               const InitialVelocity& v0, double horizon,
                                               std::span<const double> epsilons,
                                               const SolverOptions& smooth_opts, double tol,
                                               double monotone_slack, int jobs) {
    if (epsilons.empty()) throw std::invalid_argument("epsilon sequence must be nonempty");
    for (size_t k = 0; k < epsilons.size(); ++k) {
        if (!(epsilons[k] > 0.0))
            throw ValidationError("epsilon sequence must be positive (smooth_abs needs eps > 0)");
        if (k > 0 && !(epsilons[k] < epsilons[k - 1]))
            throw ValidationError("epsilon sequence must be decreasing");
    }

    EpOptions ep_opts;
    ep_opts.output_times = smooth_opts.output_times;
    const TrajectoryMap exact = simulate_ep(rho0, v0, horizon, ep_opts);

    // The exact run's output grid (events excluded) is the comparison grid.
    std::vector<double> grid;
    for (const Snapshot& s : exact.snapshots())
        if (!s.pre_event && !s.post_event) grid.push_back(s.time);

    EpsilonContinuationReport rep;
    rep.epsilons.assign(epsilons.begin(), epsilons.end());
    rep.times = grid;
    rep.distance.resize(epsilons.size());

    const size_t n = rho0.size();
    auto run_member = [&](size_t k) {
        const TrajectoryMap tm =
            simulate(rho0, v0, Potential::smooth_abs(epsilons[k]), horizon, smooth_opts);
        std::vector<double> d(grid.size());
        for (size_t ti = 0; ti < grid.size(); ++ti) {
            double acc = 0.0;
            for (size_t i = 0; i < n; ++i) {
                const double diff = tm.eval_x(i, grid[ti]) - exact.eval_x(i, grid[ti]);
                acc += rho0.mass(i) * diff * diff;
            }
            d[ti] = std::sqrt(acc);
        }
        return d;
    };

    if (jobs <= 1) {
        for (size_t k = 0; k < epsilons.size(); ++k) {
            try {
                rep.distance[k] = run_member(k);
            } catch (const std::exception& e) {
                throw IntegrationError("epsilon sweep member " + std::to_string(k) +
                                       " failed: " + e.what());
            }
        }
    } else {
        std::vector<std::future<std::vector<double>>> futs(epsilons.size());
        size_t launched = 0, done = 0;
        while (done < epsilons.size()) {
            while (launched < epsilons.size() &&
                   launched - done < static_cast<size_t>(jobs)) {
                futs[launched] = std::async(std::launch::async, run_member, launched);
                ++launched;
            }
            try {
                rep.distance[done] = futs[done].get();
            } catch (const std::exception& e) {
                throw IntegrationError("epsilon sweep member " + std::to_string(done) +
                                       " failed: " + e.what());
            }
            ++done;
        }
    }

    const size_t last_t = grid.size() - 1;
    rep.final_distance = rep.distance.back()[last_t];
    rep.monotonicity_slack = 0.0;
    for (size_t k = 0; k + 1 < epsilons.size(); ++k)
        rep.monotonicity_slack = std::max(
            rep.monotonicity_slack, rep.distance[k + 1][last_t] - rep.distance[k][last_t]);
    rep.monotone = rep.monotonicity_slack <= monotone_slack;
    rep.converged = rep.final_distance <= tol;
    return rep;
}

nlohmann::json EpsilonContinuationReport::to_json() const {
    return nlohmann::json{{"epsilons", epsilons},
                          {"times", times},
                          {"distance", distance},
                          {"final_distance", final_distance},
                          {"monotonicity_slack", monotonicity_slack},
                          {"monotone", monotone},
                          {"converged", converged}};
}

double check_subdiff(const DiscreteMeasure& mu, std::span<const double> g) {
    if (g.size() != mu.size()) throw std::invalid_argument("g must be per-atom");
    const auto xs = mu.positions();
    const auto ms = mu.masses();
    double lhs = 0.0, base = 0.0, inner = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        double conv = 0.0;
        for (size_t j = 0; j < xs.size(); ++j) {
            const double d = xs[i] - xs[j];
            lhs += 0.5 * ms[i] * ms[j] * std::abs(d + (g[i] - g[j]));
            base += 0.5 * ms[i] * ms[j] * std::abs(d);
            conv += ms[j] * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
        }
        inner += ms[i] * conv * g[i];
    }
    return lhs - (base + inner);
}

} // namespace peflow::ep
