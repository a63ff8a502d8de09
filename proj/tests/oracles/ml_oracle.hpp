#pragma once
// Reference Mittag-Leffler values computed independently of the library:
// 100-digit power series and the alpha = 1/2 erfc closed form.

#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

using mp = boost::multiprecision::cpp_bin_float_100;

struct MpComplex {
    mp re, im;
};

// sum_{k < terms} z^k / Gamma(alpha k + beta), accepted only when the last terms
// are negligible and cancellation leaves far more than double precision.
class SeriesOracle {
public:
    SeriesOracle(double alpha, double beta, int terms = 500) : inv_gamma_(terms) {
        for (int k = 0; k < terms; ++k) {
            const mp x = mp(alpha) * k + mp(beta);
            if (x <= 0 && x == floor(x))
                inv_gamma_[k] = 0;
            else
                inv_gamma_[k] = 1 / boost::math::tgamma(x);
        }
    }

    std::optional<std::complex<double>> operator()(std::complex<double> z) const {
        const mp zr(z.real()), zi(z.imag());
        mp pr = 1, pi = 0, sr = 0, si = 0, biggest = 0, tail = 0;
        const int n = static_cast<int>(inv_gamma_.size());
        for (int k = 0; k < n; ++k) {
            const mp tr = pr * inv_gamma_[k], ti = pi * inv_gamma_[k];
            sr += tr;
            si += ti;
            const mp mag = sqrt(tr * tr + ti * ti);
            if (mag > biggest) biggest = mag;
            if (k >= n - 5 && mag > tail) tail = mag;
            const mp nr = pr * zr - pi * zi;
            pi = pr * zi + pi * zr;
            pr = nr;
        }
        const mp sum = sqrt(sr * sr + si * si);
        if (sum == 0) return std::nullopt;
        if (tail > mp("1e-40") * sum) return std::nullopt;
        if (biggest > mp("1e60") * sum) return std::nullopt;
        const double re = static_cast<double>(sr), im = static_cast<double>(si);
        if (!std::isfinite(re) || !std::isfinite(im) || std::abs(re) > 1e300 || std::abs(im) > 1e300)
            return std::nullopt;
        return std::complex<double>(re, im);
    }

private:
    std::vector<mp> inv_gamma_;
};

// E_{1/2}(x) = exp(x^2) erfc(-x) for real x.
inline std::optional<double> ml_half_erfc(double x) {
    const mp v = exp(mp(x) * x) * boost::math::erfc(-mp(x));
    const double d = static_cast<double>(v);
    if (!std::isfinite(d) || std::abs(d) > 1e300) return std::nullopt;
    return d;
}

}  // namespace oracle
