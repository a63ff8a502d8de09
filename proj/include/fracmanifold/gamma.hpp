#pragma once

#include <cmath>
#include <numbers>

namespace fracmanifold {

// log|Gamma(x)| without touching the global signgam.
inline double log_abs_gamma(double x) {
    int sign = 0;
    return ::lgamma_r(x, &sign);
}

// sin(pi x) with exact zeros at the integers.
inline double sin_pi(double x) {
    const double n = std::round(x);
    const double r = x - n;
    if (r == 0.0) return 0.0;
    const double s = std::sin(std::numbers::pi * r);
    return (static_cast<long long>(n) % 2 == 0) ? s : -s;
}

// 1/Gamma(x) as an entire function: zero at 0, -1, -2, ...
inline double recip_gamma(double x) {
    if (x <= 0.0 && x == std::floor(x)) return 0.0;
    if (x > 170.0) return std::exp(-log_abs_gamma(x));
    if (x < 0.5) {
        // Reflection: 1/Gamma(x) = sin(pi x) Gamma(1-x) / pi.
        const double y = 1.0 - x;
        const double g = y < 170.0 ? std::tgamma(y) : std::exp(log_abs_gamma(y));
        return sin_pi(x) * g / std::numbers::pi;
    }
    return 1.0 / std::tgamma(x);
}

}  // namespace fracmanifold
