#include "peflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "peflow/errors.hpp"
#include "peflow/kernels.hpp"

namespace peflow::diag {

namespace {

double max_grid_spacing(const TrajectoryMap& tm) {
    double dt = 0.0;
    const auto& snaps = tm.snapshots();
    for (size_t i = 1; i < snaps.size(); ++i)
        dt = std::max(dt, snaps[i].time - snaps[i - 1].time);
    return dt;
}

double default_tol(const TrajectoryMap& tm, double a, double b) {
    const double dt = max_grid_spacing(tm);
    return a * kIntegratorEps + b * dt * dt;
}

double kinetic_of(const Snapshot& s) {
    double ke = 0.0;
    for (size_t k = 0; k < s.pos.size(); ++k) ke += s.mass[k] * s.vel[k] * s.vel[k];
    return 0.5 * ke;
}

double potential_of(const TrajectoryMap& tm, const Snapshot& s) {
    if (tm.interaction().is_ep()) return kernels::abs_interaction_energy(s.pos, s.mass);
    return kernels::interaction_energy(tm.interaction().potential, s.pos, s.mass);
}

// sgn or W' convolution against the snapshot's cluster measure, at arbitrary
// evaluation points.
void convolve_at(const TrajectoryMap& tm, const Snapshot& s, std::span<const double> ex,
                 std::span<double> out) {
    if (tm.interaction().is_ep()) {
        for (size_t e = 0; e < ex.size(); ++e) {
            double acc = 0.0;
            for (size_t k = 0; k < s.pos.size(); ++k) {
                const double d = ex[e] - s.pos[k];
                acc += s.mass[k] * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
            }
            out[e] = acc;
        }
        return;
    }
    kernels::wprime_convolve(tm.interaction().potential, ex, s.pos, s.mass, out);
}

} // namespace

nlohmann::json CheckRecord::to_json() const {
    return nlohmann::json{{"name", name},         {"pass", pass}, {"worst_slack", worst_slack},
                          {"tol", tol},           {"examined", examined},
                          {"note", note}};
}

bool DiagnosticsReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckRecord& c) { return c.pass; });
}

nlohmann::json DiagnosticsReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const CheckRecord& c : checks) arr.push_back(c.to_json());
    return nlohmann::json{{"checks", arr}, {"config_hash", config_hash}, {"c_used", c_used}};
}

EnergyBreakdown energy(const TrajectoryMap& tm, double t) {
    const Snapshot& s = tm.state_at(t);
    EnergyBreakdown e;
    e.kinetic = kinetic_of(s);
    e.potential = potential_of(tm, s);
    e.total = e.kinetic + e.potential;
    return e;
}

CheckRecord check_energy_monotone(const TrajectoryMap& tm, double tol) {
    CheckRecord rec;
    rec.name = "energy";
    rec.tol = tol >= 0 ? tol : default_tol(tm, kEnergyTolA, 0.0);
    const auto& snaps = tm.snapshots();
    // Against all ordered pairs: the binding earlier energy is the running
    // minimum, so one forward sweep covers every (s, t) with s <= t.
    double run_min = kinetic_of(snaps[0]) + potential_of(tm, snaps[0]);
    double worst = 0.0;
    for (size_t i = 1; i < snaps.size(); ++i) {
        const double e = kinetic_of(snaps[i]) + potential_of(tm, snaps[i]);
        worst = std::min(worst, run_min - e);
        run_min = std::min(run_min, e);
        ++rec.examined;
    }
    rec.worst_slack = worst;
    rec.pass = worst >= -rec.tol;
    return rec;
}

double theta(double t, double c) {
    if (t == 0.0) return 0.0;
    if (!(t > 0.0) || !std::isfinite(t)) throw std::domain_error("theta needs finite t >= 0");
    const double lam = c + 1.0;
    // Adaptive Simpson on f(s) = exp(-lam s^2) over [0, t].
    auto f = [lam](double s) { return std::exp(-lam * s * s); };
    std::function<double(double, double, double, double, double, double, int)> simpson =
        [&](double a, double b, double fa, double fb, double fm, double whole,
            int depth) -> double {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
        const double flm = f(lm), frm = f(rm);
        const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
        const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
        if (depth > 40) throw IntegrationError("theta quadrature failed to converge");
        if (depth > 4 && std::abs(left + right - whole) < 1e-13 * (1 + std::abs(whole)))
            return left + right + (left + right - whole) / 15.0;
        return simpson(a, m, fa, fm, flm, left, depth + 1) +
               simpson(m, b, fm, fb, frm, right, depth + 1);
    };
    const double fa = f(0.0), fb = f(t), fm = f(0.5 * t);
    const double whole = t / 6.0 * (fa + 4 * fm + fb);
    const double integral = simpson(0.0, t, fa, fb, fm, whole, 0);
    return std::exp(lam * t * t) * integral;
}

CheckRecord check_kinetic_bound(const TrajectoryMap& tm) { return check_kinetic_bound(tm, -1.0); }

CheckRecord check_kinetic_bound(const TrajectoryMap& tm, double tol) {
    CheckRecord rec;
    rec.name = "kinetic_bound";
    rec.tol = tol >= 0 ? tol : default_tol(tm, kEnergyTolA, kKineticTolB);
    const double c = tm.interaction().semiconvexity();

    // Constant factor: sum m v0^2 + 0.5 sum sum m m W'(xi - xj)^2.
    const auto x0 = tm.initial_positions();
    const auto m0 = tm.initial_masses();
    const auto v0 = tm.initial_velocities();
    double factor = 0.0;
    for (size_t i = 0; i < x0.size(); ++i) factor += m0[i] * v0[i] * v0[i];
    std::vector<double> conv; // W'(x_i - x_j) row sums of squares need explicit loop
    for (size_t i = 0; i < x0.size(); ++i) {
        for (size_t j = 0; j < x0.size(); ++j) {
            double w;
            if (tm.interaction().is_ep()) {
                const double d = x0[i] - x0[j];
                w = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
            } else {
                w = tm.interaction().potential.w_prime(x0[i] - x0[j]);
            }
            factor += 0.5 * m0[i] * m0[j] * w * w;
        }
    }

    // Trapezoid of 2*KE over the snapshot sequence (events are nodes with
    // both one-sided values; the zero-width interval contributes nothing).
    const auto& snaps = tm.snapshots();
    double integral = 0.0, worst = 0.0;
    for (size_t i = 1; i < snaps.size(); ++i) {
        const double dt = snaps[i].time - snaps[i - 1].time;
        integral += 0.5 * dt * (2 * kinetic_of(snaps[i - 1]) + 2 * kinetic_of(snaps[i]));
        const double bound = factor * theta(snaps[i].time, c);
        worst = std::min(worst, bound - integral);
        ++rec.examined;
    }
    rec.worst_slack = worst;
    rec.pass = worst >= -rec.tol;
    return rec;
}

CheckRecord check_qspp(const TrajectoryMap& tm, double tol) {
    CheckRecord rec;
    rec.name = "qspp";
    rec.tol = tol >= 0 ? tol : default_tol(tm, kPairTolA, 0.0);
    const double c = tm.interaction().semiconvexity();
    const auto idx = tm.unique_time_indices();
    const auto& snaps = tm.snapshots();
    const size_t n = tm.atom_count();
    double worst = 0.0;
    for (size_t a = 0; a < idx.size(); ++a) {
        const Snapshot& ss = snaps[idx[a]];
        if (!(ss.time > 0.0)) continue;
        const double sig_s = qspp_sigma(ss.time, c);
        for (size_t b = a; b < idx.size(); ++b) {
            const Snapshot& st = snaps[idx[b]];
            const double sig_t = qspp_sigma(st.time, c);
            for (size_t i = 0; i < n; ++i)
                for (size_t j = i + 1; j < n; ++j) {
                    const double ds =
                        std::abs(ss.pos[ss.cluster_of_atom[i]] - ss.pos[ss.cluster_of_atom[j]]);
                    const double dtv =
                        std::abs(st.pos[st.cluster_of_atom[i]] - st.pos[st.cluster_of_atom[j]]);
                    worst = std::min(worst, ds / sig_s - dtv / sig_t);
                    ++rec.examined;
                }
        }
    }
    rec.worst_slack = worst;
    rec.pass = worst >= -rec.tol;
    return rec;
}

CheckRecord check_stability(const TrajectoryMap& tm, const InitialVelocity& v0, double tol) {
    CheckRecord rec;
    rec.name = "stability";
    rec.tol = tol >= 0 ? tol : default_tol(tm, kPairTolA, 0.0);
    const double c = tm.interaction().semiconvexity();
    const auto x0 = tm.initial_positions();
    const auto idx = tm.unique_time_indices();
    const auto& snaps = tm.snapshots();
    const size_t n = tm.atom_count();

    // TV between consecutive atoms accumulates into all ordered pairs.
    std::vector<double> tv_prefix(n, 0.0);
    for (size_t i = 1; i < n; ++i)
        tv_prefix[i] = tv_prefix[i - 1] + v0.total_variation(x0[i - 1], x0[i]);

    double worst = 0.0;
    for (size_t a = 0; a < idx.size(); ++a) {
        const Snapshot& s = snaps[idx[a]];
        const double ch = c == 0.0 ? 1.0 : std::cosh(std::sqrt(c) * s.time);
        const double sh = sinh_scale(s.time, c);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j) {
                // atoms i < j so x0[j] >= x0[i]; check both inequality sides
                const double dx =
                    s.pos[s.cluster_of_atom[j]] - s.pos[s.cluster_of_atom[i]];
                const double bound = ch * (x0[j] - x0[i]) + sh * (tv_prefix[j] - tv_prefix[i]);
                worst = std::min(worst, dx);          // 0 <= X(y,t) - X(z,t)
                worst = std::min(worst, bound - dx);  // upper bound
                ++rec.examined;
            }
    }
    rec.worst_slack = worst;
    rec.pass = worst >= -rec.tol;
    return rec;
}

CheckRecord check_oleinik(const TrajectoryMap& tm, double tol, double t_min) {
    CheckRecord rec;
    rec.name = "oleinik";
    rec.tol = tol >= 0 ? tol : default_tol(tm, kPairTolA, 0.0);
    const double c = tm.interaction().semiconvexity();
    const auto idx = tm.unique_time_indices();
    const auto& snaps = tm.snapshots();
    double worst = 0.0;
    for (size_t a = 0; a < idx.size(); ++a) {
        const Snapshot& s = snaps[idx[a]];
        if (!(s.time >= t_min)) continue;  // bound degenerates as t -> 0+
        const double kap = oleinik_kappa(s.time, c);
        for (size_t k = 0; k < s.pos.size(); ++k)
            for (size_t l = k + 1; l < s.pos.size(); ++l) {
                const double dx = s.pos[k] - s.pos[l];
                const double dv = s.vel[k] - s.vel[l];
                worst = std::min(worst, kap * dx * dx - dv * dx);
                ++rec.examined;
            }
    }
    rec.worst_slack = worst;
    rec.pass = worst >= -rec.tol;
    return rec;
}

namespace {

// Per-atom force integral at snapshot index si: integrator-accumulated when
// available, otherwise trapezoid of (W'*rho_tau)(X(tau)) over the snapshots.
std::vector<double> force_integral_at(const TrajectoryMap& tm, size_t si) {
    const auto& snaps = tm.snapshots();
    if (tm.has_force_integrals()) return snaps[si].force_integral;
    const size_t n = tm.atom_count();
    std::vector<double> acc(n, 0.0), fa(n), fb(n), ex(n);
    for (size_t i = 0; i < n; ++i) ex[i] = snaps[0].pos[snaps[0].cluster_of_atom[i]];
    convolve_at(tm, snaps[0], ex, fa);
    for (size_t s = 1; s <= si; ++s) {
        const double dt = snaps[s].time - snaps[s - 1].time;
        for (size_t i = 0; i < n; ++i) ex[i] = snaps[s].pos[snaps[s].cluster_of_atom[i]];
        convolve_at(tm, snaps[s], ex, fb);
        if (dt > 0)
            for (size_t i = 0; i < n; ++i) acc[i] += 0.5 * dt * (fa[i] + fb[i]);
        fa.swap(fb);
    }
    return acc;
}

size_t snapshot_index_for(const TrajectoryMap& tm, double t) {
    const auto& snaps = tm.snapshots();
    size_t best = snaps.size();
    for (size_t i = 0; i < snaps.size(); ++i)
        if (snaps[i].time == t) best = i;  // prefer the post-event entry
    if (best == snaps.size())
        throw std::invalid_argument("t is not a snapshot time");
    return best;
}

} // namespace

double flow_equation_residual(const TrajectoryMap& tm, double t,
                              const std::function<double(double)>& g) {
    const size_t si = snapshot_index_for(tm, t);
    const Snapshot& s = tm.snapshots()[si];
    const std::vector<double> I = force_integral_at(tm, si);
    const auto m0 = tm.initial_masses();
    const auto v0 = tm.initial_velocities();
    double lhs = 0.0, rhs = 0.0;
    for (size_t i = 0; i < tm.atom_count(); ++i) {
        const double gx = g(s.pos[s.cluster_of_atom[i]]);
        lhs += m0[i] * gx * s.vel[s.cluster_of_atom[i]];
        rhs += m0[i] * gx * (v0[i] - I[i]);
    }
    return std::abs(lhs - rhs);
}

double flow_equation_residual_basis(const TrajectoryMap& tm, double t) {
    const size_t si = snapshot_index_for(tm, t);
    const Snapshot& s = tm.snapshots()[si];
    const std::vector<double> I = force_integral_at(tm, si);
    const auto m0 = tm.initial_masses();
    const auto v0 = tm.initial_velocities();

    // g == 1 and g == id accumulate globally; indicators accumulate per cluster.
    double r_one = 0.0, r_id = 0.0;
    std::vector<double> r_ind(s.pos.size(), 0.0);
    for (size_t i = 0; i < tm.atom_count(); ++i) {
        const uint32_t k = s.cluster_of_atom[i];
        const double term = m0[i] * (s.vel[k] - (v0[i] - I[i]));
        r_one += term;
        r_id += s.pos[k] * term;
        r_ind[k] += term;
    }
    double worst = std::max(std::abs(r_one), std::abs(r_id));
    for (double r : r_ind) worst = std::max(worst, std::abs(r));
    return worst;
}

CheckRecord check_flow_equation(const TrajectoryMap& tm, double tol) {
    CheckRecord rec;
    rec.name = "flow";
    if (tol >= 0) {
        rec.tol = tol;
    } else if (tm.has_force_integrals()) {
        rec.tol = default_tol(tm, kFlowTolA, 0.0);
    } else {
        rec.tol = default_tol(tm, kFlowTolA, 1.0);  // trapezoid fallback
        rec.note = "trapezoid force integral (no integrator accumulations)";
    }
    const auto idx = tm.unique_time_indices();
    double worst = 0.0;
    for (size_t a : idx) {
        const double r = flow_equation_residual_basis(tm, tm.snapshots()[a].time);
        worst = std::min(worst, -r);
        ++rec.examined;
    }
    rec.worst_slack = worst;
    rec.pass = worst >= -rec.tol;
    return rec;
}

namespace {

double bump1(double u) {  // exp(1 - 1/(1-u^2)) on (-1,1), else 0
    const double u2 = u * u;
    if (u2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - u2));
}

double bump1_prime(double u) {
    const double u2 = u * u;
    if (u2 >= 1.0) return 0.0;
    const double den = 1.0 - u2;
    return bump1(u) * (-2.0 * u / (den * den));
}

} // namespace

double SpaceTimeBump::value(double x, double t) const {
    return bump1((x - x_center) / x_halfwidth) * bump1((t - t_center) / t_halfwidth);
}

double SpaceTimeBump::dx(double x, double t) const {
    return bump1_prime((x - x_center) / x_halfwidth) / x_halfwidth *
           bump1((t - t_center) / t_halfwidth);
}

double SpaceTimeBump::dt(double x, double t) const {
    return bump1((x - x_center) / x_halfwidth) *
           bump1_prime((t - t_center) / t_halfwidth) / t_halfwidth;
}

WeakFormResiduals weak_form_residual(const TrajectoryMap& tm, const SpaceTimeBump& phi) {
    if (phi.t_support_end() > tm.horizon())
        throw std::invalid_argument("test function time support exceeds simulated horizon");
    const auto& snaps = tm.snapshots();

    // Integrands of the two identities at one snapshot.
    auto mass_integrand = [&](const Snapshot& s) {
        double acc = 0.0;
        for (size_t k = 0; k < s.pos.size(); ++k)
            acc += s.mass[k] *
                   (phi.dt(s.pos[k], s.time) + s.vel[k] * phi.dx(s.pos[k], s.time));
        return acc;
    };
    auto momentum_integrand = [&](const Snapshot& s) {
        std::vector<double> conv(s.pos.size());
        convolve_at(tm, s, s.pos, conv);
        double acc = 0.0;
        for (size_t k = 0; k < s.pos.size(); ++k) {
            const double w = phi.dt(s.pos[k], s.time) + s.vel[k] * phi.dx(s.pos[k], s.time);
            acc += s.mass[k] * (s.vel[k] * w - phi.value(s.pos[k], s.time) * conv[k]);
        }
        return acc;
    };

    double mass_int = 0.0, mom_int = 0.0;
    double prev_mass = mass_integrand(snaps[0]);
    double prev_mom = momentum_integrand(snaps[0]);
    for (size_t i = 1; i < snaps.size(); ++i) {
        const double cur_mass = mass_integrand(snaps[i]);
        const double cur_mom = momentum_integrand(snaps[i]);
        const double dt = snaps[i].time - snaps[i - 1].time;
        if (dt > 0) {
            mass_int += 0.5 * dt * (prev_mass + cur_mass);
            mom_int += 0.5 * dt * (prev_mom + cur_mom);
        }
        prev_mass = cur_mass;
        prev_mom = cur_mom;
    }

    double init_mass = 0.0, init_mom = 0.0;
    const auto x0 = tm.initial_positions();
    const auto m0 = tm.initial_masses();
    const auto v0 = tm.initial_velocities();
    for (size_t i = 0; i < x0.size(); ++i) {
        init_mass += m0[i] * phi.value(x0[i], 0.0);
        init_mom += m0[i] * v0[i] * phi.value(x0[i], 0.0);
    }

    WeakFormResiduals r;
    r.mass = std::abs(mass_int + init_mass);
    r.momentum = std::abs(mom_int + init_mom);
    return r;
}

double wasserstein2(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    // Walk both sorted atom lists; the quantile functions are constant on each
    // shared mass slice, so the integral is an exact finite sum.
    size_t i = 0, j = 0;
    double ui = mu.mass(0), uj = nu.mass(0), u_prev = 0.0, acc = 0.0;
    while (i < mu.size() && j < nu.size()) {
        const double u_next = std::min(ui, uj);
        const double d = mu.position(i) - nu.position(j);
        acc += (u_next - u_prev) * d * d;
        u_prev = u_next;
        if (ui <= uj) {
            ++i;
            if (i < mu.size()) ui += mu.mass(i);
        } else {
            ++j;
            if (j < nu.size()) uj += nu.mass(j);
        }
        if (ui == u_prev && i < mu.size()) continue;
    }
    return std::sqrt(std::max(acc, 0.0));
}

DiagnosticsReport run_all_checks(const TrajectoryMap& tm, const InitialVelocity& v0,
                                 std::span<const std::string> which) {
    auto wanted = [&](const char* name) {
        if (which.empty()) return true;
        return std::find(which.begin(), which.end(), std::string(name)) != which.end();
    };
    DiagnosticsReport rep;
    rep.c_used = tm.interaction().semiconvexity();
    if (wanted("energy")) rep.checks.push_back(check_energy_monotone(tm));
    if (wanted("kinetic")) rep.checks.push_back(check_kinetic_bound(tm, -1.0));
    if (wanted("qspp")) rep.checks.push_back(check_qspp(tm));
    if (wanted("stability")) rep.checks.push_back(check_stability(tm, v0));
    if (wanted("oleinik")) rep.checks.push_back(check_oleinik(tm));
    if (wanted("flow")) rep.checks.push_back(check_flow_equation(tm));
    return rep;
}

} // namespace peflow::diag
