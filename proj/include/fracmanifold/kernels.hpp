#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "mittag_leffler.hpp"

namespace fracmanifold {

// full: E_{alpha,beta}. remainder: E minus its exponential part (see ml_remainder).
enum class KernelPart { full, remainder };

// s -> M_{alpha,beta}(lambda s) on s >= 0. Between |z| = 1 and the radius where
// the optimally truncated expansion reaches double precision, values come from
// piecewise Chebyshev interpolation of accurate evaluations; outside that band
// the series/asymptotic branches are cheap enough to call directly.
// Tabulation is skipped when the function grows along the ray. The full function
// on |z| <= 1 is always tabulated (it is entire there) and exposed as full_small.
class RayFunction {
public:
    RayFunction() = default;
    RayFunction(double alpha, double beta, cplx lambda, KernelPart part, const MLOptions& opt = {})
        : p_(alpha, beta), lambda_(lambda), part_(part), opt_(opt) {
        p_.validate();
        if (lambda == cplx(0.0)) throw DomainError("RayFunction: lambda must be non-zero");
        lam_abs_ = std::abs(lambda);
        build_panel(small_, 0.0, z_lo_ / lam_abs_, 0, true);
        const bool stable = std::abs(std::arg(lambda)) > 0.5 * alpha * std::numbers::pi;
        tabulate_ = part == KernelPart::remainder || stable;
        if (!tabulate_) return;
        sector_ = std::abs(std::arg(lambda)) <= p_.mu;
        z_hi_ = 2.0;
        const cplx dir = lambda / lam_abs_;
        while (z_hi_ < 4096.0) {
            const cplx z = z_hi_ * dir;
            set_asymptotic_terms(detail::optimal_terms(p_, z, opt_.asymptotic_max_terms));
            const auto alg = detail::algebraic_sum(p_, z, asym_terms_);
            const double scale = std::max(std::abs(asymptotic(z_hi_ / lam_abs_)), 1e-300);
            if (opt_.asymptotic_error_constant * alg.next_term <= 1e-15 * scale) break;
            z_hi_ *= 2.0;
        }
        double a = z_lo_ / lam_abs_;
        while (a * lam_abs_ < z_hi_ * (1.0 - 1e-12)) {
            build_panel(panels_, a, 2.0 * a, 0, false);
            a *= 2.0;
        }
    }

    cplx operator()(double s) const {
        const double zabs = s * lam_abs_;
        if (zabs <= z_lo_) return part_ == KernelPart::full ? full_small(s) : direct(s);
        if (!tabulate_) return direct(s);
        if (zabs >= z_hi_) return asymptotic(s);
        return locate(panels_, s).eval(s);
    }

    // Full E_{alpha,beta}(lambda s) for s * |lambda| <= 1.
    cplx full_small(double s) const { return locate(small_, s).eval(s); }

    const MLParams& params() const { return p_; }
    cplx lambda() const { return lambda_; }
    double max_interpolation_error() const { return max_err_; }

private:
    struct Panel {
        double s0, s1;
        std::vector<cplx> values;

        cplx eval(double s) const {
            const auto& nodes = cheb_nodes();
            const double x = (2.0 * s - s0 - s1) / (s1 - s0);
            cplx num(0.0);
            double den = 0.0;
            for (int k = 0; k <= kDegree; ++k) {
                const double dx = x - nodes[k];
                if (dx == 0.0) return values[k];
                double w = (k % 2 == 0) ? 1.0 : -1.0;
                if (k == 0 || k == kDegree) w *= 0.5;
                num += values[k] * (w / dx);
                den += w / dx;
            }
            return num / den;
        }
    };

    static constexpr int kDegree = 24;

    static const std::array<double, kDegree + 1>& cheb_nodes() {
        static const std::array<double, kDegree + 1> nodes = [] {
            std::array<double, kDegree + 1> x{};
            for (int k = 0; k <= kDegree; ++k) x[k] = std::cos(std::numbers::pi * k / kDegree);
            return x;
        }();
        return nodes;
    }

    static const Panel& locate(const std::vector<Panel>& panels, double s) {
        std::size_t lo = 0, hi = panels.size();
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            if (panels[mid].s0 <= s)
                lo = mid;
            else
                hi = mid;
        }
        return panels[lo];
    }

    cplx direct(double s, bool force_full = false) const {
        const cplx z = lambda_ * s;
        return force_full || part_ == KernelPart::full ? ml_eval(p_, z, opt_).value : ml_remainder(p_, z, opt_).value;
    }

    void set_asymptotic_terms(int terms) {
        asym_terms_ = terms;
        asym_coef_.resize(terms);
        for (int k = 1; k <= terms; ++k) asym_coef_[k - 1] = -recip_gamma(p_.beta - p_.alpha * k);
    }

    cplx asymptotic(double s) const {
        const cplx z = lambda_ * s;
        const cplx w = 1.0 / z;
        cplx v = 0.0;
        for (int k = asym_terms_; k >= 1; --k) v = (v + asym_coef_[k - 1]) * w;
        if (part_ == KernelPart::full) {
            if (sector_) v += detail::exponential_part(p_, z);
        } else if (!sector_ && detail::has_pole(p_, z)) {
            v -= detail::exponential_part(p_, z);
        }
        return v;
    }

    void build_panel(std::vector<Panel>& out, double s0, double s1, int depth, bool full) {
        Panel panel{s0, s1, std::vector<cplx>(kDegree + 1)};
        double vmax = 0.0;
        for (int k = 0; k <= kDegree; ++k) {
            const double x = std::cos(std::numbers::pi * k / kDegree);
            panel.values[k] = direct(0.5 * (s0 + s1) + 0.5 * (s1 - s0) * x, full);
            vmax = std::max(vmax, std::abs(panel.values[k]));
        }
        double err = 0.0;
        for (int k = 0; k < kDegree; ++k) {
            const double x = std::cos(std::numbers::pi * (k + 0.5) / kDegree);
            const double s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * x;
            err = std::max(err, std::abs(panel.eval(s) - direct(s, full)));
        }
        if (err > 1e-13 * std::max(vmax, 1e-300) && depth < 4) {
            const double mid = s0 == 0.0 ? 0.5 * s1 : std::sqrt(s0 * s1);
            build_panel(out, s0, mid, depth + 1, full);
            build_panel(out, mid, s1, depth + 1, full);
            return;
        }
        max_err_ = std::max(max_err_, err / std::max(vmax, 1e-300));
        out.push_back(std::move(panel));
    }

    MLParams p_;
    cplx lambda_{};
    KernelPart part_ = KernelPart::full;
    MLOptions opt_;
    double lam_abs_ = 1.0;
    bool tabulate_ = false;
    bool sector_ = true;
    double z_lo_ = 1.0;
    double z_hi_ = 2.0;
    int asym_terms_ = 5;
    std::vector<double> asym_coef_;
    double max_err_ = 0.0;
    std::vector<Panel> panels_, small_;
};

// Antiderivatives of the convolution kernel K(u) = u^{alpha-1} M_{alpha,alpha}(lambda u^alpha):
//   F1(u) = u^alpha M_{alpha,alpha+1}(lambda u^alpha),  F1' = K,
//   F2(u) = u^{alpha+1} M_{alpha,alpha+2}(lambda u^alpha),  F2' = F1.
// The remainder versions stay finite at u = 0.
class KernelAntiderivatives {
public:
    KernelAntiderivatives() = default;
    KernelAntiderivatives(double alpha, cplx lambda, KernelPart part, const MLOptions& opt = {})
        : alpha_(alpha), lambda_(lambda), part_(part), opt_(opt),
          m1_(alpha, alpha + 1.0, lambda, part, opt), m2_(alpha, alpha + 2.0, lambda, part, opt) {
        const cplx ll = std::log(lambda);
        omega_ = std::exp(ll / alpha);
        x1_ = 1.0 / (alpha * lambda);
        x2_ = std::exp((-1.0 / alpha - 1.0) * ll) / alpha;
    }

    std::pair<cplx, cplx> operator()(double u) const {
        const double s = std::pow(u, alpha_);
        if (part_ == KernelPart::remainder && s * std::abs(lambda_) <= 1.0) {
            if (u == 0.0) return {-x1_, -x2_};
            const cplx e = std::exp(omega_ * u);
            return {s * m1_.full_small(s) - x1_ * e, u * s * m2_.full_small(s) - x2_ * e};
        }
        if (u == 0.0) return {cplx(0.0), cplx(0.0)};
        return {s * m1_(s), u * s * m2_(s)};
    }

    double alpha() const { return alpha_; }
    cplx lambda() const { return lambda_; }
    KernelPart part() const { return part_; }

private:
    double alpha_ = 0.5;
    cplx lambda_{};
    KernelPart part_ = KernelPart::full;
    MLOptions opt_;
    RayFunction m1_, m2_;
    cplx omega_{}, x1_{}, x2_{};
};

// Lower-triangular product-integration matrix: for g piecewise linear on t,
// int_0^{t_n} K(t_n - tau) g(tau) dtau = sum_j W(n, j) g_j exactly (up to the
// accuracy of F1, F2). Rows n >= rows are left zero.
inline Eigen::MatrixXcd product_weights(const std::vector<double>& t, const KernelAntiderivatives& F,
                                        int rows = -1) {
    const int n_nodes = static_cast<int>(t.size());
    if (rows < 0 || rows > n_nodes) rows = n_nodes;
    Eigen::MatrixXcd W = Eigen::MatrixXcd::Zero(n_nodes, n_nodes);
    bool uniform = n_nodes > 2;
    const double h0 = n_nodes > 1 ? t[1] - t[0] : 0.0;
    for (int j = 1; j + 1 < n_nodes && uniform; ++j)
        if (std::abs((t[j + 1] - t[j]) - h0) > 1e-12 * h0) uniform = false;
    std::vector<std::pair<cplx, cplx>> cache;
    if (uniform) {
        cache.resize(rows);
        for (int k = 0; k < rows; ++k) cache[k] = F(k * h0);
    }
    std::vector<cplx> f1, f2;
    for (int n = 1; n < rows; ++n) {
        f1.resize(n + 1);
        f2.resize(n + 1);
        for (int j = 0; j <= n; ++j) {
            const auto v = uniform ? cache[n - j] : F(t[n] - t[j]);
            f1[j] = v.first;
            f2[j] = v.second;
        }
        for (int j = 0; j < n; ++j) {
            const double h = t[j + 1] - t[j];
            const cplx d2 = (f2[j] - f2[j + 1]) / h;
            W(n, j) += f1[j] - d2;
            W(n, j + 1) += d2 - f1[j + 1];
        }
    }
    return W;
}

// int_0^1 e^{-x s}(1 - s) ds and int_0^1 e^{-x s} s ds.
inline std::pair<cplx, cplx> exp_linear_moments(cplx x) {
    if (std::abs(x) < 0.1) {
        cplx a(0.0), b(0.0), p(1.0);
        double fact = 1.0;
        for (int k = 0; k < 12; ++k) {
            if (k > 0) {
                p *= -x;
                fact *= k;
            }
            a += p / (fact * (k + 1) * (k + 2));
            b += p / (fact * (k + 2));
        }
        return {a, b};
    }
    const cplx e = std::exp(-x);
    const cplx x2 = x * x;
    return {(x - 1.0 + e) / x2, (1.0 - e - x * e) / x2};
}

// Backward sweep for B_n = int_{t_n}^inf e^{-omega (tau - t_n)} g(tau) dtau with g
// piecewise linear on the grid and g(tau) ~ g_N (t_N / tau)^kappa beyond t_N.
class ExpWindow {
public:
    ExpWindow() = default;
    ExpWindow(const std::vector<double>& t, cplx omega, double kappa) : omega_(omega) {
        const int n = static_cast<int>(t.size());
        decay_.resize(n);
        a_.resize(n);
        b_.resize(n);
        for (int j = 0; j + 1 < n; ++j) {
            const double h = t[j + 1] - t[j];
            const auto m = exp_linear_moments(omega * h);
            decay_[j] = std::exp(-omega * h);
            a_[j] = h * m.first;
            b_[j] = h * m.second;
        }
        const double T = t.back();
        tail_ = 1.0 / omega - kappa / (omega * omega * T) + kappa * (kappa + 1.0) / (omega * omega * omega * T * T);
    }

    // B at every node for one scalar column g.
    Eigen::VectorXcd apply(const Eigen::Ref<const Eigen::VectorXcd>& g) const {
        const int n = static_cast<int>(g.size());
        Eigen::VectorXcd B(n);
        B[n - 1] = g[n - 1] * tail_;
        for (int j = n - 2; j >= 0; --j) B[j] = decay_[j] * B[j + 1] + a_[j] * g[j] + b_[j] * g[j + 1];
        return B;
    }

    cplx omega() const { return omega_; }

private:
    cplx omega_{};
    cplx tail_{};
    std::vector<cplx> decay_, a_, b_;
};

}  // namespace fracmanifold
