#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace peflow {

enum class PotentialKind { Zero, Quadratic, SmoothAbs, Custom };

/// Even, semiconvex interaction potential W with linearly growing derivative.
///
/// Built-in kinds:
///   Zero            W(x) = 0
///   Quadratic(a)    W(x) = (a/2) x^2,            a >= 0
///   SmoothAbs(eps)  W(x) = sqrt(x^2 + eps^2),    eps > 0
///   Custom          tabulated W on a symmetric grid, cubic interpolation
///
/// Immutable after construction; concurrent reads are safe.
class Potential {
public:
    static Potential zero();
    static Potential quadratic(double curvature);
    static Potential smooth_abs(double epsilon);
    // Tabulated values on a strictly increasing grid. The user supplies the
    // semiconvexity constant; it is validated against second differences of
    // W + (c/2) x^2 (tolerance `tol`).
    static Potential custom(std::vector<double> grid, std::vector<double> values,
                            double semiconvexity, double tol = 1e-9);

    double w(double x) const;        // W(x); throws std::domain_error on non-finite x
    double w_prime(double x) const;  // W'(x); odd
    double semiconvexity() const { return semiconvexity_; }
    double growth_constant() const { return growth_; }  // |W'(x)| <= K (1 + |x|)

    PotentialKind kind() const { return kind_; }
    double epsilon() const { return epsilon_; }
    double curvature() const { return curvature_; }

    static Potential from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    std::string describe() const;

private:
    Potential() = default;

    double custom_w(double x) const;
    double custom_w_prime(double x) const;

    PotentialKind kind_ = PotentialKind::Zero;
    double epsilon_ = 0.0;     // SmoothAbs
    double curvature_ = 0.0;   // Quadratic
    double semiconvexity_ = 0.0;
    double growth_ = 0.0;
    // Custom table with precomputed Hermite slopes.
    std::vector<double> grid_, values_, slopes_;
};

} // namespace peflow
