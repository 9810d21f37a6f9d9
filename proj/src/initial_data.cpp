#include "peflow/initial_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "peflow/errors.hpp"

namespace peflow {

namespace {

// Sort (x, m[, v]) jointly by x and merge exactly coincident positions.
struct Loaded {
    std::vector<double> xs, ms, vs;
};

Loaded sort_and_merge(std::span<const double> xs, std::span<const double> ms,
                      const double* vs) {
    if (xs.empty()) throw ValidationError("measure needs at least one atom");
    if (xs.size() != ms.size()) throw ValidationError("positions/masses length mismatch");
    std::vector<size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t i, size_t j) { return xs[i] < xs[j]; });

    Loaded out;
    for (size_t k : order) {
        if (!std::isfinite(xs[k]) || !std::isfinite(ms[k]))
            throw ValidationError("non-finite atom data");
        if (!(ms[k] > 0.0)) throw ValidationError("atom masses must be positive");
        if (!out.xs.empty() && xs[k] == out.xs.back()) {
            const double m0 = out.ms.back(), m1 = ms[k];
            if (vs) out.vs.back() = (m0 * out.vs.back() + m1 * vs[k]) / (m0 + m1);
            out.ms.back() += m1;
        } else {
            out.xs.push_back(xs[k]);
            out.ms.push_back(ms[k]);
            if (vs) out.vs.push_back(vs[k]);
        }
    }
    return out;
}

} // namespace

DiscreteMeasure::DiscreteMeasure(std::vector<double> positions, std::vector<double> masses) {
    Loaded l = sort_and_merge(positions, masses, nullptr);
    xs_ = std::move(l.xs);
    ms_ = std::move(l.ms);
    double total = 0.0;
    for (double m : ms_) total += m;
    if (std::abs(total - 1.0) > 1e-12)
        throw ValidationError("atom masses must sum to 1 (got " + std::to_string(total) + ")");
    second_moment_ = 0.0;
    for (size_t i = 0; i < xs_.size(); ++i) second_moment_ += ms_[i] * xs_[i] * xs_[i];
}

DiscreteMeasure DiscreteMeasure::from_json(const nlohmann::json& j) {
    return DiscreteMeasure(j.at("x").get<std::vector<double>>(),
                           j.at("m").get<std::vector<double>>());
}

nlohmann::json DiscreteMeasure::to_json() const {
    return nlohmann::json{{"kind", "atoms"}, {"x", xs_}, {"m", ms_}};
}

InitialVelocity::InitialVelocity(std::vector<double> breakpoints, std::vector<double> values)
    : xs_(std::move(breakpoints)), vs_(std::move(values)) {
    if (xs_.empty() || xs_.size() != vs_.size())
        throw ValidationError("velocity table needs matching nonempty breakpoints/values");
    std::vector<size_t> order(xs_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t i, size_t j) { return xs_[i] < xs_[j]; });
    std::vector<double> x2, v2;
    for (size_t k : order) {
        if (!std::isfinite(xs_[k]) || !std::isfinite(vs_[k]))
            throw ValidationError("non-finite velocity table entry");
        if (!x2.empty() && xs_[k] == x2.back()) {
            // A repeated breakpoint with a different value would be a jump,
            // which contradicts absolute continuity.
            if (vs_[k] != v2.back())
                throw ValidationError("velocity table has a jump at x=" + std::to_string(xs_[k]));
            continue;
        }
        x2.push_back(xs_[k]);
        v2.push_back(vs_[k]);
    }
    xs_ = std::move(x2);
    vs_ = std::move(v2);
    prefix_tv_.resize(xs_.size(), 0.0);
    for (size_t i = 1; i < xs_.size(); ++i)
        prefix_tv_[i] = prefix_tv_[i - 1] + std::abs(vs_[i] - vs_[i - 1]);
}

InitialVelocity InitialVelocity::constant(double v) {
    return InitialVelocity({0.0}, {v});
}

double InitialVelocity::operator()(double x) const {
    if (x <= xs_.front()) return vs_.front();
    if (x >= xs_.back()) return vs_.back();
    const size_t i = static_cast<size_t>(
        std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin()) - 1;
    const double u = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
    return vs_[i] + u * (vs_[i + 1] - vs_[i]);
}

double InitialVelocity::total_variation(double a, double b) const {
    if (a > b) throw std::invalid_argument("total_variation needs a <= b");
    if (xs_.size() < 2) return 0.0;
    const double lo = std::max(a, xs_.front());
    const double hi = std::min(b, xs_.back());
    if (lo >= hi) return 0.0;

    // Whole segments covered by [lo, hi] come from the prefix table; the two
    // partial end segments contribute |slope| * overlap.
    const size_t i0 = static_cast<size_t>(
        std::upper_bound(xs_.begin(), xs_.end(), lo) - xs_.begin()) - 1;
    const size_t i1 = static_cast<size_t>(
        std::lower_bound(xs_.begin(), xs_.end(), hi) - xs_.begin());
    // segment i covers [x_i, x_{i+1}); [lo,hi] touches segments i0 .. i1-1
    auto seg_tv = [&](size_t i, double s, double e) {
        const double slope = (vs_[i + 1] - vs_[i]) / (xs_[i + 1] - xs_[i]);
        return std::abs(slope) * (e - s);
    };
    if (i1 - i0 == 1) return seg_tv(i0, lo, hi);
    double tv = seg_tv(i0, lo, xs_[i0 + 1]);
    tv += prefix_tv_[i1 - 1] - prefix_tv_[i0 + 1];
    tv += seg_tv(i1 - 1, xs_[i1 - 1], hi);
    return tv;
}

double InitialVelocity::modulus(double r) const {
    if (r < 0) throw std::invalid_argument("modulus needs r >= 0");
    if (xs_.size() < 2 || r == 0.0) return 0.0;
    // TV over a sliding window is piecewise linear in the left endpoint, so the
    // sup is attained when the window start or end sits on a breakpoint.
    double best = 0.0;
    for (double anchor : xs_) {
        best = std::max(best, total_variation(anchor, anchor + r));
        best = std::max(best, total_variation(anchor - r, anchor));
    }
    return best;
}

InitialVelocity InitialVelocity::from_json(const nlohmann::json& j) {
    if (j.contains("constant")) return constant(j.at("constant").get<double>());
    return InitialVelocity(j.at("breakpoints").get<std::vector<double>>(),
                           j.at("values").get<std::vector<double>>());
}

nlohmann::json InitialVelocity::to_json() const {
    return nlohmann::json{{"breakpoints", xs_}, {"values", vs_}};
}

double normal_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("normal_quantile needs u in (0,1)");
    // Acklam's rational approximation, then two Newton steps against erf.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double x;
    if (u < plow) {
        const double q = std::sqrt(-2 * std::log(u));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (u <= phigh) {
        const double q = u - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        const double q = std::sqrt(-2 * std::log(1 - u));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    for (int it = 0; it < 2; ++it) {
        const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - u;
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI);
        x -= e / pdf;
    }
    return x;
}

double MeasureSpec::quantile(double u) const {
    switch (kind) {
        case Kind::Uniform: return a + (b - a) * u;
        case Kind::Gaussian: return mu + sigma * normal_quantile(u);
        case Kind::TabulatedCdf: {
            // F is piecewise linear through (cdf_x, cdf_f); invert by scanning.
            const auto it = std::lower_bound(cdf_f.begin(), cdf_f.end(), u);
            if (it == cdf_f.begin()) return cdf_x.front();
            if (it == cdf_f.end()) return cdf_x.back();
            const size_t i = static_cast<size_t>(it - cdf_f.begin());
            const double f0 = cdf_f[i - 1], f1 = cdf_f[i];
            if (f1 == f0) return cdf_x[i];
            const double t = (u - f0) / (f1 - f0);
            return cdf_x[i - 1] + t * (cdf_x[i] - cdf_x[i - 1]);
        }
        case Kind::Atoms: break;
    }
    throw std::logic_error("quantile on explicit atom spec");
}

DiscreteMeasure quantize(const MeasureSpec& spec, int n) {
    if (spec.kind == MeasureSpec::Kind::Atoms)
        return DiscreteMeasure(spec.atom_positions, spec.atom_masses);
    if (n < 1) throw ValidationError("quantize needs n >= 1");
    std::vector<double> xs(static_cast<size_t>(n));
    std::vector<double> ms(static_cast<size_t>(n), 1.0 / n);
    for (int k = 0; k < n; ++k)
        xs[static_cast<size_t>(k)] = spec.quantile((k + 0.5) / n);
    return DiscreteMeasure(std::move(xs), std::move(ms));
}

std::pair<DiscreteMeasure, std::vector<double>>
merge_coincident(std::span<const double> xs, std::span<const double> ms,
                 std::span<const double> vs) {
    if (xs.size() != vs.size()) throw ValidationError("positions/velocities length mismatch");
    Loaded l = sort_and_merge(xs, ms, vs.data());
    return {DiscreteMeasure(l.xs, l.ms), std::move(l.vs)};
}

MeasureSpec MeasureSpec::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind"))
        throw ValidationError("rho0 spec must be an object with a 'kind'");
    MeasureSpec s;
    const std::string kind = j.at("kind").get<std::string>();
    auto reject_unknown = [&](std::initializer_list<const char*> known) {
        for (auto& [key, _] : j.items()) {
            if (std::find_if(known.begin(), known.end(),
                             [&](const char* k) { return key == k; }) == known.end())
                throw ValidationError("unknown key in rho0 spec: " + key);
        }
    };
    if (kind == "atoms") {
        reject_unknown({"kind", "x", "m"});
        s.kind = Kind::Atoms;
        s.atom_positions = j.at("x").get<std::vector<double>>();
        s.atom_masses = j.at("m").get<std::vector<double>>();
    } else if (kind == "uniform") {
        reject_unknown({"kind", "a", "b", "n"});
        s.kind = Kind::Uniform;
        s.a = j.at("a").get<double>();
        s.b = j.at("b").get<double>();
        if (!(s.a < s.b)) throw ValidationError("uniform spec needs a < b");
        s.n = j.value("n", 0);
    } else if (kind == "gaussian") {
        reject_unknown({"kind", "mu", "sigma", "n"});
        s.kind = Kind::Gaussian;
        s.mu = j.at("mu").get<double>();
        s.sigma = j.at("sigma").get<double>();
        if (!(s.sigma > 0)) throw ValidationError("gaussian spec needs sigma > 0");
        s.n = j.value("n", 0);
    } else if (kind == "cdf") {
        reject_unknown({"kind", "x", "f", "n"});
        s.kind = Kind::TabulatedCdf;
        s.cdf_x = j.at("x").get<std::vector<double>>();
        s.cdf_f = j.at("f").get<std::vector<double>>();
        s.n = j.value("n", 0);
        if (s.cdf_x.size() != s.cdf_f.size() || s.cdf_x.size() < 2)
            throw ValidationError("cdf spec needs matching x/f arrays, length >= 2");
        if (!std::is_sorted(s.cdf_x.begin(), s.cdf_x.end()) ||
            !std::is_sorted(s.cdf_f.begin(), s.cdf_f.end()))
            throw ValidationError("cdf must be nondecreasing");
        if (std::abs(s.cdf_f.front()) > 1e-12 || std::abs(s.cdf_f.back() - 1.0) > 1e-12)
            throw ValidationError("cdf must run from 0 to 1");
    } else {
        throw ValidationError("unknown rho0 kind: " + kind);
    }
    return s;
}

nlohmann::json MeasureSpec::to_json() const {
    nlohmann::json j;
    switch (kind) {
        case Kind::Atoms:
            j = {{"kind", "atoms"}, {"x", atom_positions}, {"m", atom_masses}};
            break;
        case Kind::Uniform:
            j = {{"kind", "uniform"}, {"a", a}, {"b", b}, {"n", n}};
            break;
        case Kind::Gaussian:
            j = {{"kind", "gaussian"}, {"mu", mu}, {"sigma", sigma}, {"n", n}};
            break;
        case Kind::TabulatedCdf:
            j = {{"kind", "cdf"}, {"x", cdf_x}, {"f", cdf_f}, {"n", n}};
            break;
    }
    return j;
}

} // namespace peflow
