#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "cheeger/errors.hpp"

namespace cheeger::oracles {

/// Volume b_n of the unit ball in R^n, n <= 3.
inline double unit_ball_volume(int n) {
    switch (n) {
        case 1: return 2.0;
        case 2: return std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi / 3.0;
        default: throw ConfigError("unit_ball_volume: dimension must be 1, 2 or 3");
    }
}

/// Surface measure ω_{n-1} of the unit sphere in R^n (2π for n = 2, 4π for
/// n = 3), tied to the ball volume by ω_{n-1} = n b_n.
inline double unit_sphere_surface(int n) {
    return n * unit_ball_volume(n);
}

/// First 1-Laplacian eigenvalue of the n-ball of radius r: n / r.
inline double ball_lambda(int n, double r) {
    if (r <= 0.0) throw ConfigError("ball_lambda: radius must be positive");
    return n / r;
}

/// Eigenvalue of the annulus with outer radius r and inner radius eps:
/// n (r^{n-1} + eps^{n-1}) / (r^n - eps^n). Reduces to the ball at eps = 0.
inline double annulus_lambda(int n, double r, double eps) {
    if (r <= 0.0) throw ConfigError("annulus_lambda: outer radius must be positive");
    if (eps < 0.0 || eps >= r) throw ConfigError("annulus_lambda: need 0 <= eps < r");
    return n * (std::pow(r, n - 1) + std::pow(eps, n - 1)) /
           (std::pow(r, n) - std::pow(eps, n));
}

/// Cheeger constant of the square of side a. The Cheeger set of the unit
/// square rounds the corners at radius r with (4 - π) r^2 - 4 r + 1 = 0 and
/// λ = 1/r; scaling gives the factor 1/a.
inline double square_corner_radius() {
    const double pi = std::numbers::pi;
    // Smaller root of (4 - π) r^2 - 4 r + 1 = 0.
    return (2.0 - std::sqrt(pi)) / (4.0 - pi);
}

inline double square_lambda(double a) {
    if (a <= 0.0) throw ConfigError("square_lambda: side must be positive");
    return 1.0 / (a * square_corner_radius());
}

/// Symmetrization lower bound n (b_n / |Ω|)^{1/n}, with equality for balls.
inline double lower_bound(int n, double volume) {
    if (volume <= 0.0) throw ConfigError("lower_bound: volume must be positive");
    return n * std::pow(unit_ball_volume(n) / volume, 1.0 / n);
}

enum class HoleRegime { Interior, Exterior, Boundary };

inline std::string to_string(HoleRegime r) {
    switch (r) {
        case HoleRegime::Interior: return "interior";
        case HoleRegime::Exterior: return "exterior";
        case HoleRegime::Boundary: return "boundary";
    }
    return "?";
}

/// Predicted coefficient of eps^{n-1} in λ_{Ω\K_eps} - λ_Ω for a hole
/// centered in the eigenset interior, in int(Ω\A), or on the reduced
/// boundary of A (upper bound in the boundary case).
inline double hole_slope(HoleRegime regime, int n, double eigenset_volume) {
    if (eigenset_volume <= 0.0)
        throw ConfigError("hole_slope: eigenset volume must be positive");
    switch (regime) {
        case HoleRegime::Interior:
            return unit_sphere_surface(n) / eigenset_volume;
        case HoleRegime::Exterior:
            return 0.0;
        case HoleRegime::Boundary:
            return (unit_sphere_surface(n) - 2.0 * unit_ball_volume(n - 1)) /
                   (2.0 * eigenset_volume);
    }
    throw ConfigError("hole_slope: unknown regime");
}

/// 1-capacity of a single ball of radius eps: ω_{n-1} eps^{n-1}.
inline double ball_capacity(int n, double eps) {
    if (eps < 0.0) throw ConfigError("ball_capacity: radius must be nonnegative");
    return unit_sphere_surface(n) * std::pow(eps, n - 1);
}

/// Sharp constant C in |K|^{(n-1)/n} <= C cap_1(K), attained by balls.
inline double isoperimetric_capacity_constant(int n) {
    return 1.0 / (n * std::pow(unit_ball_volume(n), 1.0 / n));
}

} // namespace cheeger::oracles
