#include "peflow/trajectory_map.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "peflow/errors.hpp"

namespace peflow {

double sinh_scale(double t, double c) {
    if (c == 0.0) return t;
    const double r = std::sqrt(c);
    return std::sinh(r * t) / r;
}

double qspp_sigma(double t, double c) {
    if (c == 0.0) return t;
    return std::sinh(std::sqrt(c) * t);
}

double oleinik_kappa(double t, double c) {
    if (c == 0.0) return 1.0 / t;
    const double r = std::sqrt(c);
    return r / std::tanh(r * t);
}

MonotoneMap::MonotoneMap(std::vector<double> xs, std::vector<double> ys, double end_slope_cap)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
    if (xs_.empty() || xs_.size() != ys_.size())
        throw std::invalid_argument("monotone map needs matching nonempty nodes");
    if (xs_.size() >= 2) {
        const size_t n = xs_.size();
        left_slope_ = std::min((ys_[1] - ys_[0]) / (xs_[1] - xs_[0]), end_slope_cap);
        right_slope_ =
            std::min((ys_[n - 1] - ys_[n - 2]) / (xs_[n - 1] - xs_[n - 2]), end_slope_cap);
    }
}

double MonotoneMap::operator()(double x) const {
    if (x <= xs_.front()) return ys_.front() + left_slope_ * (x - xs_.front());
    if (x >= xs_.back()) return ys_.back() + right_slope_ * (x - xs_.back());
    const size_t i = static_cast<size_t>(
        std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin()) - 1;
    const double u = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
    return ys_[i] + u * (ys_[i + 1] - ys_[i]);
}

TrajectoryMap::TrajectoryMap(std::vector<double> x0, std::vector<double> m0,
                             std::vector<double> v0, Interaction interaction, double horizon,
                             std::vector<Snapshot> snapshots, std::vector<MergeEvent> events,
                             std::string options_json)
    : x0_(std::move(x0)),
      m0_(std::move(m0)),
      v0_(std::move(v0)),
      interaction_(std::move(interaction)),
      horizon_(horizon),
      snaps_(std::move(snapshots)),
      events_(std::move(events)),
      options_json_(std::move(options_json)) {
    if (snaps_.empty()) throw std::invalid_argument("trajectory map needs snapshots");
}

bool TrajectoryMap::has_force_integrals() const {
    return !snaps_.front().force_integral.empty();
}

size_t TrajectoryMap::locate(double t) const {
    if (!(t >= 0.0) || t > horizon_ * (1 + 1e-12) + 1e-300)
        throw std::out_of_range("time outside simulated horizon");
    // Latest snapshot with time <= t; at event times this is the post entry.
    size_t lo = 0, hi = snaps_.size();
    while (hi - lo > 1) {
        const size_t mid = (lo + hi) / 2;
        if (snaps_[mid].time <= t) lo = mid;
        else hi = mid;
    }
    return lo;
}

const Snapshot& TrajectoryMap::state_at(double t) const { return snaps_[locate(t)]; }

std::vector<size_t> TrajectoryMap::unique_time_indices() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < snaps_.size(); ++i) {
        if (!out.empty() && snaps_[out.back()].time == snaps_[i].time) out.back() = i;
        else out.push_back(i);
    }
    return out;
}

double TrajectoryMap::eval_x(size_t atom, double t) const {
    if (atom >= x0_.size()) throw std::out_of_range("atom index");
    const size_t i = locate(t);
    const Snapshot& a = snaps_[i];
    const double pa = a.pos[a.cluster_of_atom[atom]];
    if (a.time == t || i + 1 == snaps_.size()) return pa;
    const Snapshot& b = snaps_[i + 1];
    if (b.time == a.time) return pa;  // landed on a pre/post pair boundary
    // Cubic Hermite over an event-free interval (exact for EP parabolas).
    const double h = b.time - a.time;
    const double u = (t - a.time) / h;
    const double va = a.vel[a.cluster_of_atom[atom]];
    const double pb = b.pos[b.cluster_of_atom[atom]];
    // Use the left-limit end velocity when b is an event-time entry.
    const double vb = b.vel[b.cluster_of_atom[atom]];
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    return h00 * pa + h10 * h * va + h01 * pb + h11 * h * vb;
}

MonotoneMap TrajectoryMap::flow_between(double s, double t) const {
    if (!(s > 0.0) || !(s <= t)) throw std::invalid_argument("flow_between needs 0 < s <= t");
    const Snapshot& a = state_at(s);
    const Snapshot& b = state_at(t);
    std::vector<double> xs, ys;
    xs.reserve(x0_.size());
    ys.reserve(x0_.size());
    for (size_t i = 0; i < x0_.size(); ++i) {
        const double xi = (a.time == s) ? a.pos[a.cluster_of_atom[i]] : eval_x(i, s);
        const double yi = (b.time == t) ? b.pos[b.cluster_of_atom[i]] : eval_x(i, t);
        if (!xs.empty() && xi == xs.back()) continue;  // merged atoms share nodes
        xs.push_back(xi);
        ys.push_back(yi);
    }
    const double c = interaction_.semiconvexity();
    const double cap = qspp_sigma(t, c) / qspp_sigma(s, c);
    return MonotoneMap(std::move(xs), std::move(ys), cap);
}

DiscreteMeasure TrajectoryMap::push_forward(double t) const {
    const Snapshot& s = state_at(t);
    if (s.time == t) return DiscreteMeasure(s.pos, s.mass);
    std::vector<double> xs(x0_.size()), ms(x0_.size());
    for (size_t i = 0; i < x0_.size(); ++i) {
        xs[i] = eval_x(i, t);
        ms[i] = m0_[i];
    }
    return DiscreteMeasure(std::move(xs), std::move(ms));  // coincident atoms re-merge
}

std::vector<double> TrajectoryMap::conditional_expectation(double t,
                                                           std::span<const double> g) const {
    if (g.size() != x0_.size()) throw std::invalid_argument("g must be per-atom");
    const Snapshot& s = state_at(t);
    std::vector<double> num(s.pos.size(), 0.0);
    for (size_t i = 0; i < g.size(); ++i) num[s.cluster_of_atom[i]] += m0_[i] * g[i];
    std::vector<double> out(g.size());
    for (size_t i = 0; i < g.size(); ++i) {
        const uint32_t k = s.cluster_of_atom[i];
        out[i] = num[k] / s.mass[k];
    }
    return out;
}

VelocityField TrajectoryMap::velocity_field(double t) const {
    const Snapshot& s = state_at(t);
    VelocityField f;
    f.time = t;
    f.at_event = (s.time == t && s.post_event);
    if (s.time == t) {
        f.positions = s.pos;
        f.velocities = s.vel;
        f.masses = s.mass;
        return f;
    }
    // Between snapshots the cluster set is fixed; velocities follow the
    // Hermite derivative of the positions.
    const size_t i = locate(t);
    const Snapshot& b = snaps_[i + 1];
    const double h = b.time - s.time;
    const double u = (t - s.time) / h;
    f.positions.resize(s.pos.size());
    f.velocities.resize(s.pos.size());
    f.masses = s.mass;
    for (size_t k = 0; k < s.pos.size(); ++k) {
        // clusters persist between snapshots, so index k matches in b via ids
        const double pa = s.pos[k], va = s.vel[k];
        const double pb = b.pos[k], vb = b.vel[k];
        const double d00 = 6 * u * (u - 1) / h;
        const double d10 = (1 - u) * (1 - 3 * u);
        const double d01 = -d00;
        const double d11 = u * (3 * u - 2);
        f.positions[k] = (1 + 2 * u) * (1 - u) * (1 - u) * pa + u * (1 - u) * (1 - u) * h * va +
                         u * u * (3 - 2 * u) * pb + u * u * (u - 1) * h * vb;
        f.velocities[k] = d00 * pa + d10 * va + d01 * pb + d11 * vb;
    }
    return f;
}

} // namespace peflow
