#include "peflow/potential.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "peflow/errors.hpp"

namespace peflow {

namespace {

void require_finite(double x) {
    if (!std::isfinite(x)) throw std::domain_error("potential evaluated at non-finite x");
}

} // namespace

Potential Potential::zero() {
    Potential p;
    p.kind_ = PotentialKind::Zero;
    return p;
}

Potential Potential::quadratic(double curvature) {
    if (!(curvature >= 0.0)) throw ValidationError("quadratic potential needs curvature >= 0");
    Potential p;
    p.kind_ = PotentialKind::Quadratic;
    p.curvature_ = curvature;
    p.growth_ = curvature;  // |a x| <= a (1 + |x|)
    return p;
}

Potential Potential::smooth_abs(double epsilon) {
    if (!(epsilon > 0.0)) throw ValidationError("smooth_abs potential needs epsilon > 0");
    Potential p;
    p.kind_ = PotentialKind::SmoothAbs;
    p.epsilon_ = epsilon;
    p.growth_ = 1.0;  // |x| / sqrt(x^2 + eps^2) <= 1
    return p;
}

Potential Potential::custom(std::vector<double> grid, std::vector<double> values,
                            double semiconvexity, double tol) {
    if (grid.size() < 3 || grid.size() != values.size())
        throw ValidationError("custom potential needs >= 3 grid points and matching values");
    if (!std::is_sorted(grid.begin(), grid.end()) ||
        std::adjacent_find(grid.begin(), grid.end()) != grid.end())
        throw ValidationError("custom potential grid must be strictly increasing");
    if (!(semiconvexity >= 0.0))
        throw ValidationError("semiconvexity constant must be >= 0");

    const size_t n = grid.size();
    // Evenness on the sampled grid: W(x) must match W(-x) where both are tabulated.
    for (size_t i = 0; i < n; ++i) {
        auto it = std::lower_bound(grid.begin(), grid.end(), -grid[i]);
        if (it != grid.end() && *it == -grid[i]) {
            const size_t j = static_cast<size_t>(it - grid.begin());
            const double scale = std::max({1.0, std::abs(values[i]), std::abs(values[j])});
            if (std::abs(values[i] - values[j]) > 1e-9 * scale)
                throw ValidationError("custom potential table is not even");
        }
    }
    // Second differences of W + (c/2) x^2 must be >= -tol (discrete semiconvexity).
    for (size_t i = 1; i + 1 < n; ++i) {
        auto aug = [&](size_t k) { return values[k] + 0.5 * semiconvexity * grid[k] * grid[k]; };
        const double hl = grid[i] - grid[i - 1];
        const double hr = grid[i + 1] - grid[i];
        const double d2 = (aug(i + 1) - aug(i)) / hr - (aug(i) - aug(i - 1)) / hl;
        if (d2 < -tol)
            throw ValidationError("custom potential fails semiconvexity check at x=" +
                                  std::to_string(grid[i]));
    }

    Potential p;
    p.kind_ = PotentialKind::Custom;
    p.semiconvexity_ = semiconvexity;
    p.grid_ = std::move(grid);
    p.values_ = std::move(values);

    // Catmull-Rom style slopes for the cubic Hermite interpolant.
    p.slopes_.resize(n);
    p.slopes_[0] = (p.values_[1] - p.values_[0]) / (p.grid_[1] - p.grid_[0]);
    p.slopes_[n - 1] = (p.values_[n - 1] - p.values_[n - 2]) / (p.grid_[n - 1] - p.grid_[n - 2]);
    for (size_t i = 1; i + 1 < n; ++i)
        p.slopes_[i] = (p.values_[i + 1] - p.values_[i - 1]) / (p.grid_[i + 1] - p.grid_[i - 1]);

    double growth = 0.0;
    for (size_t i = 0; i < n; ++i)
        growth = std::max(growth, std::abs(p.slopes_[i]) / (1.0 + std::abs(p.grid_[i])));
    p.growth_ = growth;
    return p;
}

double Potential::w(double x) const {
    require_finite(x);
    switch (kind_) {
        case PotentialKind::Zero: return 0.0;
        case PotentialKind::Quadratic: return 0.5 * curvature_ * x * x;
        case PotentialKind::SmoothAbs: return std::sqrt(x * x + epsilon_ * epsilon_);
        case PotentialKind::Custom: return custom_w(x);
    }
    return 0.0;
}

double Potential::w_prime(double x) const {
    require_finite(x);
    switch (kind_) {
        case PotentialKind::Zero: return 0.0;
        case PotentialKind::Quadratic: return curvature_ * x;
        case PotentialKind::SmoothAbs: return x / std::sqrt(x * x + epsilon_ * epsilon_);
        case PotentialKind::Custom: return custom_w_prime(x);
    }
    return 0.0;
}

double Potential::custom_w(double x) const {
    const size_t n = grid_.size();
    if (x <= grid_.front())  // linear continuation with the end slope
        return values_.front() + slopes_.front() * (x - grid_.front());
    if (x >= grid_.back())
        return values_.back() + slopes_.back() * (x - grid_.back());
    const size_t i = static_cast<size_t>(
        std::upper_bound(grid_.begin(), grid_.end(), x) - grid_.begin()) - 1;
    const double h = grid_[i + 1] - grid_[i];
    const double u = (x - grid_[i]) / h;
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    (void)n;
    return h00 * values_[i] + h10 * h * slopes_[i] + h01 * values_[i + 1] + h11 * h * slopes_[i + 1];
}

double Potential::custom_w_prime(double x) const {
    if (x <= grid_.front()) return slopes_.front();
    if (x >= grid_.back()) return slopes_.back();
    const size_t i = static_cast<size_t>(
        std::upper_bound(grid_.begin(), grid_.end(), x) - grid_.begin()) - 1;
    const double h = grid_[i + 1] - grid_[i];
    const double u = (x - grid_[i]) / h;
    const double d00 = 6 * u * (u - 1) / h;
    const double d10 = (1 - u) * (1 - 3 * u);
    const double d01 = -d00;
    const double d11 = u * (3 * u - 2);
    return d00 * values_[i] + d10 * slopes_[i] + d01 * values_[i + 1] + d11 * slopes_[i + 1];
}

Potential Potential::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind"))
        throw ValidationError("potential spec must be an object with a 'kind'");
    const std::string kind = j.at("kind").get<std::string>();
    for (auto& [key, _] : j.items()) {
        static const char* known[] = {"kind", "epsilon", "curvature", "grid", "values",
                                      "semiconvexity"};
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return key == k; }) == std::end(known))
            throw ValidationError("unknown key in potential spec: " + key);
    }
    if (kind == "zero") return zero();
    if (kind == "quadratic") return quadratic(j.at("curvature").get<double>());
    if (kind == "smooth_abs") return smooth_abs(j.at("epsilon").get<double>());
    if (kind == "custom")
        return custom(j.at("grid").get<std::vector<double>>(),
                      j.at("values").get<std::vector<double>>(),
                      j.value("semiconvexity", 0.0));
    throw ValidationError("unknown potential kind: " + kind);
}

nlohmann::json Potential::to_json() const {
    nlohmann::json j;
    switch (kind_) {
        case PotentialKind::Zero: j["kind"] = "zero"; break;
        case PotentialKind::Quadratic:
            j["kind"] = "quadratic";
            j["curvature"] = curvature_;
            break;
        case PotentialKind::SmoothAbs:
            j["kind"] = "smooth_abs";
            j["epsilon"] = epsilon_;
            break;
        case PotentialKind::Custom:
            j["kind"] = "custom";
            j["grid"] = grid_;
            j["values"] = values_;
            j["semiconvexity"] = semiconvexity_;
            break;
    }
    return j;
}

std::string Potential::describe() const {
    switch (kind_) {
        case PotentialKind::Zero: return "zero";
        case PotentialKind::Quadratic: return "quadratic(a=" + std::to_string(curvature_) + ")";
        case PotentialKind::SmoothAbs: return "smooth_abs(eps=" + std::to_string(epsilon_) + ")";
        case PotentialKind::Custom: return "custom[" + std::to_string(grid_.size()) + " pts]";
    }
    return "?";
}

} // namespace peflow
