#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "fde_solver.hpp"
#include "grid.hpp"
#include "mittag_leffler.hpp"
#include "quadrature.hpp"
#include "system.hpp"

namespace fracmanifold {

// D^alpha x = diag(-2, 2) x + (x1^2, x1^2 + x2^2).
inline FractionalSystem build_example_system(double alpha) {
    FractionalSystem sys;
    sys.alpha = alpha;
    sys.A = Eigen::MatrixXcd::Zero(2, 2);
    sys.A(0, 0) = -2.0;
    sys.A(1, 1) = 2.0;
    sys.f = PolynomialMap(2);
    sys.f.add_term(0, 1.0, {2, 0});
    sys.f.add_term(1, 1.0, {2, 0});
    sys.f.add_term(1, 1.0, {0, 2});
    sys.validate();
    return sys;
}

// Scalar B for a 1x1 unstable block lambda: (1/alpha) exp(lambda^{1/alpha} s).
inline double deshpande_B_scalar(double alpha, double lambda, double s) {
    if (!(lambda > 0.0)) throw DomainError("deshpande_B_scalar: lambda must be positive");
    return std::exp(std::pow(lambda, 1.0 / alpha) * s) / alpha;
}

// The 2x2 matrix B(t) for J = [[lambda, 1], [0, lambda]], scaled by exp(-lambda^{1/alpha} t).
inline Eigen::Matrix2d deshpande_B_scaled(double alpha, double lambda, double t) {
    Eigen::Matrix2d B;
    B << 1.0 / alpha, std::pow(lambda, (1.0 - alpha) / alpha) * t / (alpha * alpha), 0.0, 1.0;
    return B;
}

using CandidateFn = std::function<Eigen::Vector2d(double)>;

// A bounded candidate trajectory; knots mark where it is only piecewise smooth.
struct Candidate {
    CandidateFn fn;
    std::vector<double> knots;
};

struct DeshpandeProjection {
    double t = 0.0;
    double value = 0.0;          // pi_u(T_sigma phi)(t)
    double bracket_ratio = 0.0;  // int_0^t K(t - s) g(s) ds / E_alpha(2 t^alpha)
    double weighted_mass = 0.0;  // int_0^inf exp(-2^{1/alpha} s) g(s) ds
    double growth = 0.0;         // E_alpha(2 t^alpha)
};

struct ProjectionOptions {
    double rel_tol = 1e-10;
    int max_intervals = 4000;
};

// pi_u(T_sigma phi)(t) = E_alpha(2 t^alpha) [ int_0^t K(t - s) g / E_alpha(2 t^alpha) ds - int_0^inf e^{-2^{1/alpha} s} g ds ]
// with K(u) = u^{alpha-1} E_{alpha,alpha}(2 u^alpha) and g = phi1^2 + phi2^2.
inline DeshpandeProjection deshpande_unstable_projection(const Candidate& phi, double alpha, double t,
                                                         const ProjectionOptions& po = {}) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("deshpande_unstable_projection: alpha must lie in (0, 1)");
    if (!(t > 0.0)) throw DomainError("deshpande_unstable_projection: t must be positive");
    const double omega = std::pow(2.0, 1.0 / alpha);
    auto g = [&](double s) { return phi.fn(s).squaredNorm(); };
    DeshpandeProjection out;
    out.t = t;
    out.growth = ml_eval(MLParams(alpha, 1.0), 2.0 * std::pow(t, alpha)).value.real();

    // Mass: the exponential weight confines it to a few multiples of 1/omega.
    std::vector<double> pts{0.0};
    for (double s = 1.0 / (64.0 * omega); s < 60.0 / omega; s *= 2.0) pts.push_back(s);
    pts.push_back(60.0 / omega);
    for (double k : phi.knots)
        if (k > 0.0 && k < 60.0 / omega) pts.push_back(k);
    std::sort(pts.begin(), pts.end());
    out.weighted_mass =
        integrate<double>([&](double s) { return std::exp(-omega * s) * g(s); }, pts, 1e-300, po.rel_tol,
                          po.max_intervals)
            .value;

    // Convolution with s = t - v^{1/alpha}: (1/alpha) int_0^{t^alpha} E_{alpha,alpha}(2v) g(t - v^{1/alpha}) dv.
    const MLParams pk(alpha, alpha);
    const double vmax = std::pow(t, alpha);
    auto integrand = [&](double v) {
        const double s = std::max(0.0, t - std::pow(v, 1.0 / alpha));
        return ml_eval(pk, 2.0 * v).value.real() / out.growth * g(s);
    };
    std::vector<double> vp;
    const int panels = std::max(8, static_cast<int>(std::ceil(4.0 * vmax)));
    for (int i = 0; i <= panels; ++i) vp.push_back(vmax * i / panels);
    for (double k : phi.knots)
        if (k > 0.0 && k < t) vp.push_back(std::pow(t - k, alpha));
    std::sort(vp.begin(), vp.end());
    out.bracket_ratio =
        integrate<double>(integrand, vp, 1e-300, po.rel_tol, po.max_intervals).value / alpha;
    out.value = out.growth * (out.bracket_ratio - out.weighted_mass);
    return out;
}

// Analytic candidate phi(t) = (sigma1 E_alpha(-2 t^alpha), 0).
inline Candidate analytic_candidate(double alpha, double sigma1) {
    const MLParams p(alpha, 1.0);
    return {[=](double t) { return Eigen::Vector2d(sigma1 * ml_eval(p, -2.0 * std::pow(t, alpha)).value.real(), 0.0); },
            {}};
}

// Solver-based candidate: the stable subsystem D^alpha x1 = -2 x1 + x1^2 from sigma1 with x2 = 0,
// linearly interpolated; beyond the horizon the last value decays like (T / t)^alpha.
inline Candidate solver_candidate(double alpha, double sigma1, double T = 40.0, int N = 2048) {
    Eigen::MatrixXcd A(1, 1);
    A(0, 0) = -2.0;
    Eigen::VectorXcd x0(1);
    x0[0] = sigma1;
    const auto tr = solve_caputo(
        alpha, A, [](const Eigen::VectorXcd& x) { return Eigen::VectorXcd(x.cwiseProduct(x)); }, x0, T, N);
    const std::vector<double> times = tr.times;
    std::vector<double> x(times.size());
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = tr.states(static_cast<Eigen::Index>(j), 0).real();
    CandidateFn fn = [=](double t) {
        if (t >= times.back()) return Eigen::Vector2d(x.back() * std::pow(times.back() / t, alpha), 0.0);
        const std::size_t j = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin()) - 1;
        const double w = (t - times[j]) / (times[j + 1] - times[j]);
        return Eigen::Vector2d((1.0 - w) * x[j] + w * x[j + 1], 0.0);
    };
    return {fn, times};
}

// Exponential-leading parts of E_{alpha,alpha}(t^alpha J) (lhs) and t^{1-alpha} B(t) (rhs)
// for J = [[lambda, 1], [0, lambda]], both scaled by exp(-lambda^{1/alpha} t).
struct DeshpandeGap {
    double t = 0.0;
    double alpha = 0.5;
    double lambda = 1.0;
    Eigen::Matrix2d lhs;
    Eigen::Matrix2d rhs;
    Eigen::Matrix2d entrywise_gap;  // |lhs - rhs| / |rhs|, 0 where both vanish
};

struct GapOptions {
    // Minimum |lambda t^alpha| for the leading terms to be meaningful.
    double min_argument = 5.0;
};

inline DeshpandeGap ml_identity_gap(double alpha, double lambda, double t, const GapOptions& go = {}) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("ml_identity_gap: alpha must lie in (0, 1]");
    if (!(lambda > 0.0)) throw DomainError("ml_identity_gap: lambda must be positive");
    if (!(lambda * std::pow(t, alpha) >= go.min_argument))
        throw DomainError("ml_identity_gap: lambda t^alpha = " + std::to_string(lambda * std::pow(t, alpha)) +
                          " is below the threshold " + std::to_string(go.min_argument));
    DeshpandeGap g;
    g.t = t;
    g.alpha = alpha;
    g.lambda = lambda;
    const double ta = std::pow(t, 1.0 - alpha);
    const double l1 = std::pow(lambda, 1.0 / alpha);
    const double diag = std::pow(lambda, (1.0 - alpha) / alpha) * ta / alpha;
    const double off = std::pow(lambda, (1.0 - 2.0 * alpha) / alpha) * ta * (1.0 - alpha + t * l1) / (alpha * alpha);
    g.lhs << diag, off, 0.0, diag;
    g.rhs = ta * deshpande_B_scaled(alpha, lambda, t);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            g.entrywise_gap(i, j) = g.rhs(i, j) == 0.0 ? std::abs(g.lhs(i, j))
                                                       : std::abs(g.lhs(i, j) - g.rhs(i, j)) / std::abs(g.rhs(i, j));
    return g;
}

// The (2,2) gap factor (1/alpha) lambda^{(1-alpha)/alpha}.
inline double identity_gap_factor(double alpha, double lambda) {
    return std::pow(lambda, (1.0 - alpha) / alpha) / alpha;
}

// True E_{alpha,alpha}(t^alpha J)(2,2) divided by [t^{1-alpha} B(t)](2,2), both unscaled.
inline double ml_identity_crosscheck(double alpha, double lambda, double t) {
    Eigen::MatrixXcd J(2, 2);
    J << lambda, 1.0, 0.0, lambda;
    const Eigen::MatrixXcd E = ml_matrix(MLParams(alpha, alpha), t, J);
    const double rhs = std::pow(t, 1.0 - alpha) * std::exp(std::pow(lambda, 1.0 / alpha) * t);
    if (!std::isfinite(rhs)) throw Overflow("ml_identity_crosscheck: exp(lambda^{1/alpha} t) overflows");
    return E(1, 1).real() / rhs;
}

struct DivergenceRow {
    double t;
    double value;
    double bracket_ratio;
};

struct CounterexampleOptions {
    double alpha = 0.5;
    double lambda = 2.0;
    double sigma1 = 0.05;
    std::vector<double> divergence_times{5.0, 10.0, 15.0, 20.0};
    double divergence_bound = 1e3;
    double bracket_tolerance = 0.05;
    std::vector<double> gap_times{20.0, 40.0};
    double gap_tolerance = 0.01;
};

struct CounterexampleReport {
    CounterexampleOptions options;
    double weighted_mass_analytic = 0.0;
    double weighted_mass_solver = 0.0;
    double bracket_limit_analytic = 0.0;  // 2^{1/alpha - 1} * weighted mass
    double bracket_limit_solver = 0.0;
    std::vector<DivergenceRow> analytic, solver;
    std::vector<DeshpandeGap> gaps;
    std::vector<std::pair<double, double>> crosscheck;  // (t, true (2,2) ratio)
    double expected_gap = 0.0;
    bool monotone_growth = false;
    bool exceeds_bound = false;
    bool bracket_converges = false;
    bool gap_matches = false;
    bool refutation_holds() const { return monotone_growth && exceeds_bound && bracket_converges && gap_matches; }
};

inline CounterexampleReport counterexample_report(const CounterexampleOptions& o = {}) {
    CounterexampleReport rep;
    rep.options = o;
    const double a = o.alpha;
    const double lim_factor = std::pow(2.0, 1.0 / a - 1.0);
    auto run = [&](const Candidate& phi, std::vector<DivergenceRow>& rows, double& mass, double& limit) {
        for (double t : o.divergence_times) {
            const auto p = deshpande_unstable_projection(phi, a, t);
            rows.push_back({t, p.value, p.bracket_ratio});
            mass = p.weighted_mass;
        }
        limit = lim_factor * mass;
        bool mono = true, big = false;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i > 0 && !(std::abs(rows[i].value) > std::abs(rows[i - 1].value))) mono = false;
            if (std::abs(rows[i].value) > o.divergence_bound) big = true;
        }
        const bool conv = limit != 0.0 && std::abs(rows.back().bracket_ratio - limit) <= o.bracket_tolerance * std::abs(limit);
        return std::array<bool, 3>{mono, big, conv};
    };
    const auto ra = run(analytic_candidate(a, o.sigma1), rep.analytic, rep.weighted_mass_analytic,
                        rep.bracket_limit_analytic);
    const auto rs = run(solver_candidate(a, o.sigma1), rep.solver, rep.weighted_mass_solver, rep.bracket_limit_solver);
    rep.monotone_growth = ra[0] && rs[0];
    rep.exceeds_bound = ra[1] && rs[1];
    rep.bracket_converges = ra[2] && rs[2];
    rep.expected_gap = std::abs(identity_gap_factor(a, o.lambda) - 1.0);
    rep.gap_matches = true;
    for (double t : o.gap_times) {
        rep.gaps.push_back(ml_identity_gap(a, o.lambda, t));
        if (std::abs(rep.gaps.back().entrywise_gap(1, 1) - rep.expected_gap) > o.gap_tolerance * rep.expected_gap)
            rep.gap_matches = false;
        try {
            rep.crosscheck.push_back({t, ml_identity_crosscheck(a, o.lambda, t)});
        } catch (const Overflow&) {
        }
    }
    return rep;
}

}  // namespace fracmanifold
