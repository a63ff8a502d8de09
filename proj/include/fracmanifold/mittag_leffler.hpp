#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "gamma.hpp"
#include "quadrature.hpp"

namespace fracmanifold {

using cplx = std::complex<double>;

inline double default_mu(double alpha) {
    return alpha < 1.0 ? 0.75 * alpha * std::numbers::pi : std::numbers::pi;
}

// Two-parameter Mittag-Leffler order. alpha = 1 is accepted as the classical
// boundary case (exponential family); mu then defaults to pi.
struct MLParams {
    double alpha = 0.5;
    double beta = 1.0;
    double mu = default_mu(0.5);

    MLParams() = default;
    MLParams(double a, double b) : alpha(a), beta(b), mu(default_mu(a)) {}
    MLParams(double a, double b, double m) : alpha(a), beta(b), mu(m) {}

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw DomainError("alpha must lie in (0, 1], got " + std::to_string(alpha));
        if (!std::isfinite(beta)) throw DomainError("beta must be finite");
        const double lo = 0.5 * alpha * std::numbers::pi;
        const double hi = alpha * std::numbers::pi;
        const bool ok = alpha < 1.0 ? (mu > lo && mu < hi) : (mu > lo && mu <= hi);
        if (!ok) throw DomainError("mu must lie strictly between alpha*pi/2 and alpha*pi");
    }
};

enum class MLMethod { series, asymptotic_sector, asymptotic_exterior, integral, derivative_limit };

inline std::string to_string(MLMethod m) {
    switch (m) {
        case MLMethod::series: return "series";
        case MLMethod::asymptotic_sector: return "asymptotic_sector";
        case MLMethod::asymptotic_exterior: return "asymptotic_exterior";
        case MLMethod::integral: return "integral";
        case MLMethod::derivative_limit: return "derivative_limit";
    }
    return "unknown";
}

struct MLValue {
    cplx value{};
    MLMethod method = MLMethod::series;
    double abs_error_estimate = 0.0;
};

struct MLOptions {
    int series_max_terms = 4000;
    // ml_eval only trusts the series when it certifies within this many terms.
    int eval_series_max_terms = 250;
    double asymptotic_min_abs = 1.0;
    // Multiplier on the first omitted asymptotic term.
    double asymptotic_error_constant = 2.0;
    int asymptotic_max_terms = 60;
    // ml_eval accepts a branch once its estimate drops below this relative level.
    double accept_rel = 1e-14;
    double contour_rel_tol = 1e-14;
};

namespace detail {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

struct CompensatedSum {
    double re = 0.0, im = 0.0, cre = 0.0, cim = 0.0;

    static void add1(double& s, double& c, double x) {
        const double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    void add(cplx v) {
        add1(re, cre, v.real());
        add1(im, cim, v.imag());
    }
    cplx value() const { return {re + cre, im + cim}; }
};

// Sum_{j>=k} j!/(j-k)! z^{j-k} / Gamma(alpha j + beta): the k-th derivative of E.
// Tail is certified through log-convexity of Gamma once alpha j + beta > 0.
// tol is relative to max(1, |partial sum|).
inline MLValue series_core(const MLParams& p, cplx z, int k, double tol, int max_terms) {
    const double a = p.alpha, b = p.beta;
    if (z == cplx(0.0)) {
        double fact = 1.0;
        for (int i = 2; i <= k; ++i) fact *= i;
        return {cplx(fact * recip_gamma(a * k + b)), MLMethod::series, 0.0};
    }
    const double r = std::abs(z), lr = std::log(r), th = std::arg(z);
    CompensatedSum sum;
    double sumabs = 0.0, rounding = 0.0;
    cplx zp(1.0);       // z^{j-k}
    double ff = 1.0;    // j!/(j-k)!
    double log_ff = 0.0;
    for (int i = 2; i <= k; ++i) {
        ff *= i;
        log_ff += std::log(static_cast<double>(i));
    }
    bool direct = true;
    for (int j = k; j < k + max_terms; ++j) {
        const double x = a * j + b;
        const int n = j - k;
        if (direct && (x > 170.0 || std::abs(zp) > 1e250 || ff > 1e250)) direct = false;
        cplx term;
        double rel;
        if (direct) {
            term = zp * (ff * recip_gamma(x));
            rel = (n + 4) * kEps;
        } else {
            const double lm = n * lr + log_ff - log_abs_gamma(x);
            const double sgn = recip_gamma(x) < 0.0 ? std::numbers::pi : 0.0;
            if (lm > 700.0) throw NonConvergence("Mittag-Leffler series terms overflow double precision");
            term = std::polar(std::exp(lm), n * th + sgn);
            rel = kEps * (6.0 + std::abs(lm) + std::abs(n * th) + std::abs(log_abs_gamma(x)));
        }
        sum.add(term);
        const double at = std::abs(term);
        sumabs += at;
        rounding += rel * at;
        if (!std::isfinite(sumabs)) throw NonConvergence("Mittag-Leffler series magnitude overflows");

        zp *= z;
        ff *= static_cast<double>(j + 1) / static_cast<double>(j + 1 - k);
        log_ff += std::log(static_cast<double>(j + 1) / static_cast<double>(j + 1 - k));

        const int jn = j + 1;
        const double xn = a * jn + b;
        if (xn > 0.0) {
            const double lgx = log_abs_gamma(xn);
            const double rho = r * (static_cast<double>(jn + 1) / (jn + 1 - k)) *
                               std::exp(lgx - log_abs_gamma(xn + a));
            if (rho < 1.0) {
                const double mnext = std::exp((jn - k) * lr + log_ff - lgx);
                const double tail = mnext / (1.0 - rho);
                const cplx s = sum.value();
                if (tail <= tol * std::max(1.0, std::abs(s))) {
                    const double err = tail + rounding + 2.0 * kEps * std::abs(s);
                    if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
                        throw NonConvergence("Mittag-Leffler series sum is not finite");
                    return {s, MLMethod::series, err};
                }
            }
        }
    }
    throw NonConvergence("Mittag-Leffler series did not certify its tail within " +
                         std::to_string(max_terms) + " terms");
}

// Size of the omitted algebraic terms starting at index k: the largest term over
// one period of the Gamma oscillation, so an accidental near-zero of 1/Gamma
// cannot masquerade as a small remainder.
inline double omitted_envelope(const MLParams& p, double log_r, int k) {
    const int span = static_cast<int>(std::ceil(1.0 / p.alpha)) + 1;
    double m = 0.0;
    for (int j = k; j < k + span; ++j) {
        const double g = recip_gamma(p.beta - p.alpha * j);
        if (g != 0.0) m = std::max(m, std::exp(std::log(std::abs(g)) - j * log_r));
    }
    return m;
}

// -sum_{k=1}^p z^{-k}/Gamma(beta - alpha k) together with the omitted-term size.
struct AlgebraicSum {
    cplx value{};
    double abs_sum = 0.0;
    double next_term = 0.0;
};

inline AlgebraicSum algebraic_sum(const MLParams& p, cplx z, int terms) {
    AlgebraicSum out;
    const cplx zi = 1.0 / z;
    cplx w = 1.0;
    CompensatedSum sum;
    for (int k = 1; k <= terms; ++k) {
        w *= zi;
        const double g = recip_gamma(p.beta - p.alpha * k);
        if (g == 0.0) continue;
        const cplx t = -w * g;
        sum.add(t);
        out.abs_sum += std::abs(t);
    }
    out.value = sum.value();
    out.next_term = omitted_envelope(p, std::log(std::abs(z)), terms + 1);
    return out;
}

// Truncation that minimizes the omitted-term envelope.
inline int optimal_terms(const MLParams& p, cplx z, int max_terms) {
    const double lr = std::log(std::abs(z));
    double best = std::numeric_limits<double>::infinity();
    int best_p = 1;
    for (int q = 1; q <= max_terms; ++q) {
        const double m = omitted_envelope(p, lr, q + 1);
        if (m < best) {
            best = m;
            best_p = q;
        }
        if (m == 0.0) break;
    }
    return best_p;
}

// (1/alpha) z^{(1-beta)/alpha} exp(z^{1/alpha}) on the principal branch.
inline cplx exponential_part(const MLParams& p, cplx z) {
    const cplx lz = std::log(z);
    return std::exp((1.0 - p.beta) / p.alpha * lz + std::exp(lz / p.alpha)) / p.alpha;
}

// Whether the exponential part is a genuine residue of the integral representation
// (|arg z| < alpha pi); outside that wedge E carries no exponential part at all.
inline bool has_pole(const MLParams& p, cplx z) {
    return p.alpha >= 1.0 || std::abs(std::arg(z)) < p.alpha * std::numbers::pi;
}

inline double exponential_part_rounding(const MLParams& p, cplx z, cplx x) {
    const cplx lz = std::log(z);
    const double scale = std::abs(std::exp(lz / p.alpha)) + std::abs((1.0 - p.beta) / p.alpha * lz);
    return kEps * std::abs(x) * (4.0 + scale);
}

struct ContourParts {
    cplx contour{};
    double error = 0.0;
    bool residue_inside = false;
};

// Hankel-type representation: rays at angle +-delta from eps to infinity joined by
// the arc |zeta| = eps. The pole at zeta = z contributes the exponential part
// whenever z lies to the right of the contour.
inline ContourParts contour_parts(const MLParams& p, cplx z, const MLOptions& opt) {
    const double a = p.alpha;
    const double pw = (1.0 - p.beta) / a;
    const double pi = std::numbers::pi;
    const double r = std::abs(z);
    const double th = std::abs(std::arg(z));
    const double hi = std::min(pi, a * pi);
    const double lo = 0.5 * a * pi + 0.25 * (hi - 0.5 * a * pi);
    const double delta = std::abs(th - lo) >= std::abs(th - hi) ? lo : hi;
    const double eps = r < 0.5 ? 1.0 : std::min(1.0, 0.5 * r);
    const double c = std::cos(delta / a);

    double rho_max = std::pow(40.0 / std::abs(c), a);
    rho_max = std::pow((40.0 + std::max(0.0, pw) * std::log(std::max(1.0, rho_max))) / std::abs(c), a);
    rho_max = std::max(rho_max, 4.0 * eps);

    const cplx eup = std::polar(1.0, delta), edn = std::polar(1.0, -delta);
    auto ray = [&](double rho) -> cplx {
        const double rr = std::pow(rho, 1.0 / a);
        const double rp = std::pow(rho, pw);
        const cplx zu = rho * eup, zd = rho * edn;
        const cplx fu = std::exp(cplx(rr * c, rr * std::sin(delta / a)) + cplx(0.0, pw * delta)) * rp / (zu - z);
        const cplx fd = std::exp(cplx(rr * c, -rr * std::sin(delta / a)) + cplx(0.0, -pw * delta)) * rp / (zd - z);
        return fu * eup - fd * edn;
    };
    const double ea = std::pow(eps, 1.0 / a), ep = std::pow(eps, pw);
    auto arc = [&](double phi) -> cplx {
        const cplx zeta = std::polar(eps, phi);
        const cplx e = std::exp(std::polar(ea, phi / a) + cplx(0.0, pw * phi));
        return e * ep / (zeta - z) * cplx(0.0, 1.0) * zeta;
    };
    std::vector<double> bp{eps};
    if (r > eps * 1.0001 && r < rho_max) bp.push_back(r);
    bp.push_back(rho_max);
    const auto qr = integrate<cplx>(ray, bp, 1e-300, opt.contour_rel_tol, 400, true);
    std::vector<double> abp{-delta};
    if (std::abs(std::arg(z)) < delta && r <= eps) abp.push_back(std::arg(z));
    abp.push_back(delta);
    const auto qa = integrate<cplx>(arc, abp, 1e-300, opt.contour_rel_tol, 400, true);
    const double scale = 2.0 * pi * a;
    ContourParts out;
    out.contour = (qr.value + qa.value) / cplx(0.0, scale);
    out.error = (qr.abs_error + qa.abs_error) / scale + kEps * std::abs(out.contour) * 8.0;
    out.residue_inside = th < delta && r > eps;
    return out;
}

inline bool finite(cplx v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

inline bool better(const std::optional<MLValue>& best, const MLValue& cand) {
    return !best || cand.abs_error_estimate < best->abs_error_estimate;
}

inline bool accepted(const MLValue& v, double rel) {
    return v.abs_error_estimate <= rel * std::abs(v.value);
}

}  // namespace detail

// Power series; tol bounds the certified tail relative to max(1, |sum|).
inline MLValue ml_series(const MLParams& params, cplx z, double tol, const MLOptions& opt = {}) {
    params.validate();
    if (!(tol > 0.0)) throw DomainError("ml_series: tol must be positive");
    return detail::series_core(params, z, 0, tol, opt.series_max_terms);
}

// Large-|z| expansion with p algebraic terms; the exponential part is kept
// inside the sector |arg z| <= mu and dropped outside it.
inline MLValue ml_asymptotic(const MLParams& params, cplx z, int p = 5, const MLOptions& opt = {}) {
    params.validate();
    if (p < 1) throw DomainError("ml_asymptotic: p must be at least 1");
    const double r = std::abs(z);
    if (!(r >= opt.asymptotic_min_abs))
        throw DomainError("ml_asymptotic: |z| = " + std::to_string(r) + " is below the threshold " +
                          std::to_string(opt.asymptotic_min_abs));
    const auto alg = detail::algebraic_sum(params, z, p);
    const cplx x = detail::exponential_part(params, z);
    const bool sector = std::abs(std::arg(z)) <= params.mu;
    MLValue out;
    double err = opt.asymptotic_error_constant * alg.next_term + 4.0 * detail::kEps * alg.abs_sum;
    if (sector) {
        out.value = x + alg.value;
        out.method = MLMethod::asymptotic_sector;
        err += detail::exponential_part_rounding(params, z, x);
    } else {
        out.value = alg.value;
        out.method = MLMethod::asymptotic_exterior;
        if (detail::has_pole(params, z)) err += std::abs(x);
    }
    if (!detail::finite(out.value) || !std::isfinite(err))
        throw Overflow("ml_asymptotic: value not representable at |z| = " + std::to_string(r));
    out.abs_error_estimate = err;
    return out;
}

// Contour-integral evaluation, usable at any z.
inline MLValue ml_integral(const MLParams& params, cplx z, const MLOptions& opt = {}) {
    params.validate();
    if (z == cplx(0.0)) return {cplx(recip_gamma(params.beta)), MLMethod::series, 0.0};
    const auto parts = detail::contour_parts(params, z, opt);
    MLValue out{parts.contour, MLMethod::integral, parts.error};
    if (parts.residue_inside) {
        const cplx x = detail::exponential_part(params, z);
        out.value += x;
        out.abs_error_estimate += detail::exponential_part_rounding(params, z, x);
    }
    if (!detail::finite(out.value) || !std::isfinite(out.abs_error_estimate))
        throw Overflow("ml_integral: value not representable at |z| = " + std::to_string(std::abs(z)));
    return out;
}

// Automatic branch selection: series, then optimally truncated asymptotics, then
// the contour integral; the first branch meeting accept_rel wins, otherwise the
// smallest error estimate.
inline MLValue ml_eval(const MLParams& params, cplx z, const MLOptions& opt = {}) {
    params.validate();
    if (z == cplx(0.0)) return {cplx(recip_gamma(params.beta)), MLMethod::series, 0.0};
    std::optional<MLValue> best;
    try {
        auto s = detail::series_core(params, z, 0, 1e-17, opt.eval_series_max_terms);
        if (detail::accepted(s, opt.accept_rel)) return s;
        best = s;
    } catch (const NonConvergence&) {
    }
    bool overflow = false;
    if (std::abs(z) >= opt.asymptotic_min_abs) {
        try {
            const int p = detail::optimal_terms(params, z, opt.asymptotic_max_terms);
            auto a = ml_asymptotic(params, z, p, opt);
            if (detail::accepted(a, opt.accept_rel)) return a;
            if (detail::better(best, a)) best = a;
        } catch (const Overflow&) {
            overflow = true;
        }
    }
    try {
        auto i = ml_integral(params, z, opt);
        if (detail::better(best, i)) best = i;
    } catch (const Overflow&) {
        overflow = true;
    }
    if (!best) {
        (void)overflow;
        throw Overflow("ml_eval: E(z) is not representable in double precision at |z| = " +
                       std::to_string(std::abs(z)));
    }
    return *best;
}

// E minus its exponential part, (1/alpha) z^{(1-beta)/alpha} exp(z^{1/alpha}).
// Stays bounded where E itself grows exponentially.
inline MLValue ml_remainder(const MLParams& params, cplx z, const MLOptions& opt = {}) {
    params.validate();
    const double pw = (1.0 - params.beta) / params.alpha;
    if (z == cplx(0.0)) {
        if (pw > 0.0) return {cplx(recip_gamma(params.beta)), MLMethod::series, 0.0};
        if (pw == 0.0) return {cplx(recip_gamma(params.beta) - 1.0 / params.alpha), MLMethod::series, 0.0};
        throw DomainError("ml_remainder: singular at z = 0 for beta > 1");
    }
    std::optional<MLValue> best;
    const cplx x = detail::has_pole(params, z) ? detail::exponential_part(params, z) : cplx(0.0);
    if (detail::finite(x)) {
        try {
            auto s = detail::series_core(params, z, 0, 1e-17, opt.eval_series_max_terms);
            s.value -= x;
            s.abs_error_estimate += detail::exponential_part_rounding(params, z, x);
            if (detail::accepted(s, opt.accept_rel)) return s;
            best = s;
        } catch (const NonConvergence&) {
        }
    }
    if (std::abs(z) >= opt.asymptotic_min_abs) {
        const int p = detail::optimal_terms(params, z, opt.asymptotic_max_terms);
        const auto alg = detail::algebraic_sum(params, z, p);
        const bool sector = std::abs(std::arg(z)) <= params.mu;
        MLValue a{alg.value, sector ? MLMethod::asymptotic_sector : MLMethod::asymptotic_exterior,
                  opt.asymptotic_error_constant * alg.next_term + 4.0 * detail::kEps * alg.abs_sum};
        if (!sector) {
            a.value -= x;
            a.abs_error_estimate += detail::exponential_part_rounding(params, z, x);
        }
        if (detail::finite(a.value)) {
            if (detail::accepted(a, opt.accept_rel)) return a;
            if (detail::better(best, a)) best = a;
        }
    }
    const auto parts = detail::contour_parts(params, z, opt);
    MLValue c{parts.contour, MLMethod::integral, parts.error};
    if (!parts.residue_inside) {
        c.value -= x;
        c.abs_error_estimate += detail::exponential_part_rounding(params, z, x);
    }
    if (detail::finite(c.value) && detail::better(best, c)) best = c;
    if (!best) throw Overflow("ml_remainder: not representable");
    return *best;
}

// k-th derivative in z. Small |z| uses the differentiated series; elsewhere the
// identity alpha z E'_{a,b} = E_{a,b-1} - (b-1) E_{a,b} is applied k times.
inline MLValue ml_deriv(const MLParams& params, cplx z, int k, const MLOptions& opt = {}) {
    params.validate();
    if (k < 0) throw DomainError("ml_deriv: k must be non-negative");
    if (k == 0) return ml_eval(params, z, opt);
    std::optional<MLValue> best;
    try {
        auto s = detail::series_core(params, z, k, 1e-17, opt.eval_series_max_terms);
        if (detail::accepted(s, 1e-13)) return s;
        best = s;
    } catch (const NonConvergence&) {
    }
    if (z == cplx(0.0)) throw NonConvergence("ml_deriv: series failed at z = 0");
    const double a = params.alpha, b = params.beta;
    // level[m] holds D^{kk} E_{a, b-m}.
    std::vector<MLValue> level(k + 1);
    for (int m = 0; m <= k; ++m) {
        MLParams q = params;
        q.beta = b - m;
        level[m] = ml_eval(q, z, opt);
    }
    const cplx az = a * z;
    for (int kk = 1; kk <= k; ++kk) {
        for (int m = 0; m + kk <= k; ++m) {
            const double coef = b - m - 1.0 + a * (kk - 1);
            const cplx v = (level[m + 1].value - coef * level[m].value) / az;
            const double e = (level[m + 1].abs_error_estimate + std::abs(coef) * level[m].abs_error_estimate) /
                                 std::abs(az) +
                             4.0 * detail::kEps * (std::abs(level[m + 1].value) + std::abs(coef * level[m].value)) /
                                 std::abs(az);
            level[m] = {v, MLMethod::derivative_limit, e};
        }
    }
    if (detail::better(best, level[0])) best = level[0];
    return *best;
}

namespace detail {

struct MatrixBlock {
    int offset, size;
    cplx lambda, coupling;
};

inline std::vector<MatrixBlock> parse_blocks(const Eigen::MatrixXcd& M) {
    if (M.rows() != M.cols()) throw ShapeError("ml_matrix: matrix must be square");
    const int d = static_cast<int>(M.rows());
    const double tol = 1e-14 * std::max(1.0, M.cwiseAbs().maxCoeff());
    std::vector<MatrixBlock> blocks;
    int i = 0;
    while (i < d) {
        MatrixBlock blk{i, 1, M(i, i), cplx(0.0)};
        if (i + 1 < d && std::abs(M(i, i + 1)) > tol) {
            blk.coupling = M(i, i + 1);
            while (i + blk.size < d && std::abs(M(i + blk.size - 1, i + blk.size) - blk.coupling) <= tol &&
                   std::abs(M(i + blk.size, i + blk.size) - blk.lambda) <= tol)
                ++blk.size;
        }
        for (int r = 0; r < d; ++r)
            for (int c = i; c < i + blk.size; ++c) {
                if (r == c) continue;
                const bool super = (r + 1 == c) && r >= i;
                const cplx expect = super ? blk.coupling : cplx(0.0);
                if (std::abs(M(r, c) - expect) > tol)
                    throw ShapeError("ml_matrix: matrix is not in block form lambda*I + c*N");
            }
        blocks.push_back(blk);
        i += blk.size;
    }
    return blocks;
}

}  // namespace detail

// E_{alpha,beta}(t^alpha M) for M block diagonal with blocks lambda I + c N.
inline Eigen::MatrixXcd ml_matrix(const MLParams& params, double t, const Eigen::MatrixXcd& M,
                                  const MLOptions& opt = {}) {
    params.validate();
    if (!(t >= 0.0)) throw DomainError("ml_matrix: t must be non-negative");
    const auto blocks = detail::parse_blocks(M);
    const double ta = std::pow(t, params.alpha);
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(M.rows(), M.cols());
    for (const auto& b : blocks) {
        cplx scale(1.0);
        for (int j = 0; j < b.size; ++j) {
            if (j > 0) scale *= b.coupling * ta / static_cast<double>(j);
            const cplx v = (j == 0 || scale != cplx(0.0)) ? ml_deriv(params, b.lambda * ta, j, opt).value : cplx(0.0);
            for (int i = 0; i + j < b.size; ++i) out(b.offset + i, b.offset + i + j) = scale * v;
        }
    }
    return out;
}

struct SupOptions {
    int scan_nodes = 2000;
    double tail_level = 0.5;
    double refine_tol = 1e-9;
};

// sup_{t >= 0} |E_alpha(lambda t^alpha)| for a stable lambda (|arg lambda| > alpha pi/2).
inline double ml_sup_stable(const MLParams& params, cplx lambda, const SupOptions& sopt = {},
                            const MLOptions& opt = {}) {
    params.validate();
    if (params.beta != 1.0) throw DomainError("ml_sup_stable: requires beta = 1");
    const double th = std::abs(std::arg(lambda));
    if (lambda == cplx(0.0) || th <= 0.5 * params.alpha * std::numbers::pi)
        throw DomainError("ml_sup_stable: lambda is not in the stable sector");
    const cplx dir = lambda / std::abs(lambda);
    const bool sector = th <= params.mu;
    // Monotone tail bound in rho = |z| from the algebraic expansion.
    auto bound = [&](double rho) {
        const cplx z = rho * dir;
        const auto alg = detail::algebraic_sum(params, z, 5);
        double b = alg.abs_sum + opt.asymptotic_error_constant * alg.next_term;
        if (sector) b += std::abs(detail::exponential_part(params, z));
        return b;
    };
    double rho_tail = std::max(1.0, opt.asymptotic_min_abs);
    while (bound(rho_tail) > sopt.tail_level) {
        rho_tail *= 2.0;
        if (rho_tail > 1e12) throw NonConvergence("ml_sup_stable: tail certificate not reached");
    }
    auto mag = [&](double rho) { return std::abs(ml_eval(params, rho * dir, opt).value); };
    const int n = std::max(16, sopt.scan_nodes);
    const double lo = std::log(rho_tail * 1e-8), hi = std::log(rho_tail);
    std::vector<double> nodes(n);
    for (int i = 0; i < n; ++i) nodes[i] = std::exp(lo + (hi - lo) * i / (n - 1));
    double best = 1.0;
    int arg = -1;
    for (int i = 0; i < n; ++i) {
        const double v = mag(nodes[i]);
        if (v > best) {
            best = v;
            arg = i;
        }
    }
    if (arg < 0) return 1.0;
    // Golden-section refinement between neighbouring scan nodes.
    double a = nodes[std::max(0, arg - 1)], b = nodes[std::min(n - 1, arg + 1)];
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = mag(c), fd = mag(d);
    while (b - a > sopt.refine_tol * b) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = mag(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = mag(d);
        }
    }
    return std::max({best, fc, fd});
}

}  // namespace fracmanifold
