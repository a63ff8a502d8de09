// Acceptance run: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fracmanifold/fracmanifold.hpp>

#include "oracles/ml_oracle.hpp"

using namespace fracmanifold;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Smallest T (to 1e-6 relative) with |E_alpha(lambda T^alpha)| < level for every stable lambda.
double decay_time(double alpha, const std::vector<cplx>& lambdas, double level) {
    const MLParams p(alpha, 1.0);
    double T = 0.0;
    for (const cplx l : lambdas) {
        if (std::abs(std::arg(l)) <= 0.5 * alpha * std::numbers::pi) continue;
        auto above = [&](double t) { return std::abs(ml_eval(p, l * std::pow(t, alpha)).value) >= level; };
        double lo = 0.0, hi = 1.0;
        while (above(hi)) hi *= 2.0;
        while (hi - lo > 1e-6 * hi) {
            const double mid = 0.5 * (lo + hi);
            (above(mid) ? lo : hi) = mid;
        }
        T = std::max(T, hi);
    }
    return T;
}

Outcome ml_accuracy() {
    const auto t0 = std::chrono::steady_clock::now();
    int grid_points = 0, compared = 0, grid_bad = 0;
    double worst = 0.0;
    for (double a : {0.4, 0.6, 0.8})
        for (double b : {a, 1.0}) {
            const oracle::SeriesOracle ref(a, b);
            const MLParams p(a, b);
            for (int i = 0; i < 16; ++i)
                for (int j = 0; j < 16; ++j) {
                    ++grid_points;
                    const cplx z = std::polar(std::pow(10.0, -1.0 + 3.0 * i / 15.0),
                                              -std::numbers::pi + 2.0 * std::numbers::pi * (j + 0.5) / 16.0);
                    const auto r = ref(z);
                    if (!r) continue;
                    ++compared;
                    try {
                        const double e = std::abs(ml_eval(p, z).value - *r) / std::abs(*r);
                        worst = std::max(worst, e);
                        if (!(e <= 1e-8)) ++grid_bad;
                    } catch (const Error&) {
                        ++grid_bad;
                    }
                }
        }
    int erfc_points = 0, erfc_bad = 0;
    double erfc_worst = 0.0;
    for (int i = 0; i <= 200; ++i) {
        const double x = -100.0 + i;
        const auto r = oracle::ml_half_erfc(x);
        if (!r) continue;
        ++erfc_points;
        const double e = std::abs(ml_eval(MLParams(0.5, 1.0), x).value.real() - *r) / std::abs(*r);
        erfc_worst = std::max(erfc_worst, e);
        if (!(e <= 1e-8)) ++erfc_bad;
    }
    int ring = 0, ring_bad = 0, ring_series_failed = 0;
    for (double a : {0.4, 0.6, 0.8})
        for (double b : {a, 1.0})
            for (double rad : {20.0, 30.0, 40.0})
                for (int j = 0; j < 32; ++j) {
                    ++ring;
                    const MLParams p(a, b);
                    const cplx z = std::polar(rad, -std::numbers::pi + 2.0 * std::numbers::pi * (j + 0.5) / 32.0);
                    try {
                        const auto s = ml_series(p, z, 1e-14);
                        const auto as = ml_asymptotic(p, z, 5);
                        if (!(std::abs(s.value - as.value) <= s.abs_error_estimate + as.abs_error_estimate))
                            ++ring_bad;
                    } catch (const Error&) {
                        ++ring_series_failed;
                    }
                }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = grid_bad == 0 && erfc_bad == 0 && ring_bad == 0 && ring_series_failed == 0 && secs < 30.0;
    o.detail = fmt("grid %d/%d oracle points within 1e-8 (worst %.2e; %d points beyond the 500-term oracle), "
                   "erfc %d/%d (worst %.2e), ring %d/%d consistent, %d ring points where the double series "
                   "cannot be summed, %.1f s",
                   compared - grid_bad, compared, worst, grid_points - compared, erfc_points - erfc_bad, erfc_points,
                   erfc_worst, ring - ring_bad - ring_series_failed, ring, ring_series_failed, secs);
    return o;
}

Outcome linear_solution() {
    Outcome o{true, ""};
    for (double alpha : {0.5, 0.8}) {
        Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(2, 2);
        A(0, 0) = -2.0;
        A(1, 1) = 2.0;
        Eigen::VectorXcd x0(2);
        x0 << 1.0, 0.0;
        const auto tr = solve_caputo(alpha, A, [](const Eigen::VectorXcd& x) { return Eigen::VectorXcd::Zero(x.size()).eval(); },
                                     x0, 5.0, 2048);
        double worst = 0.0;
        for (int n = 1; n < tr.nodes(); ++n) {
            const double ref = ml_eval(MLParams(alpha, 1.0), -2.0 * std::pow(tr.times[n], alpha)).value.real();
            worst = std::max(worst, std::abs(tr.states(n, 0).real() - ref) / std::abs(ref));
        }
        o.pass = o.pass && worst <= 1e-4;
        o.detail += fmt("%salpha=%.1f max rel error %.2e", o.detail.empty() ? "" : ", ", alpha, worst);
    }
    return o;
}

Outcome contraction() {
    LPOptions lo;
    const auto s = prepare(build_example_system(0.8), lo);
    const auto ratios = measure_contraction(*s.op, 100, 7, true);
    const double mx = *std::max_element(ratios.begin(), ratios.end());
    return {ratios.size() == 100 && mx <= 2.0 / 3.0 + 0.05,
            fmt("alpha=0.8, 100 pairs, max ratio %.4f (C_est %.4f, r* %.4f)", mx, s.cfg.C_est, s.cfg.r_star)};
}

Outcome manifold_validity() {
    const double alpha = 0.8;
    const auto sys = build_example_system(alpha);
    LPOptions lo;
    lo.N = 2048;
    const auto s = prepare(sys, lo);
    const auto xs = stable_ball_samples(s.split, s.cfg.r, 21, 1, true);
    const auto g = manifold_graph(*s.op, xs, false);
    const auto pts = pullback_manifold(g, s.split);
    const double T = decay_time(alpha, {cplx(-2.0)}, 0.05);
    int decays = 0, escapes = 0;
    double worst_ratio = 0.0;
    const Eigen::VectorXcd unstable_dir = s.split.S.col(0);
    for (const auto& x : pts) {
        const auto v = verify_manifold_point(sys, x, T, 0.1);
        decays += v.verdict == Verdict::decays;
        if (max_norm(x) > 0.0) worst_ratio = std::max(worst_ratio, v.final_ratio);
        const auto vp = verify_manifold_point(sys, x + 0.01 * unstable_dir, T, 0.1);
        escapes += vp.verdict == Verdict::escapes;
    }
    double w0 = -1.0, worst_q = 0.0;
    bool lip = true;
    for (std::size_t i = 0; i < g.samples.size(); ++i) {
        if (max_norm(g.samples[i].x_s) == 0.0) w0 = max_norm(g.samples[i].w);
        for (std::size_t k = 0; k < i; ++k) {
            const double dx = max_norm(g.samples[i].x_s - g.samples[k].x_s);
            const double dw = max_norm(g.samples[i].w - g.samples[k].w);
            if (dw > g.lipschitz_bound * dx + 2.0 * g.iter_tol) lip = false;
            if (dx > 0.0) worst_q = std::max(worst_q, dw / dx);
        }
    }
    const int n = static_cast<int>(pts.size());
    return {decays == n && escapes == n && w0 >= 0.0 && w0 <= g.iter_tol && lip,
            fmt("alpha=0.8, LP N=2048, T=%.3f: %d/%d decay (max ratio %.4f), %d/%d perturbed escape, |w(0)|=%.1e, "
                "max Lipschitz quotient %.4f vs bound %.1f",
                T, decays, n, worst_ratio, escapes, n, w0, worst_q, g.lipschitz_bound)};
}

Outcome fixed_point_residual() {
    const auto sys = build_example_system(0.8);
    LPOptions lo;
    const auto s = prepare(sys, lo);
    const auto xs = stable_ball_samples(s.split, s.cfg.r, 21, 1, true);
    const auto g = manifold_graph(*s.op, xs, true);
    double worst = 0.0;
    for (const auto& smp : g.samples) worst = std::max(worst, smp.residual);
    const bool same_grid = worst <= 5.0 * g.iter_tol;

    Eigen::VectorXcd edge(1);
    edge[0] = s.cfg.r;
    const auto ref_grid = graded_grid(s.cfg.T_horizon, 2048, 1.0 / 0.8);
    std::vector<double> res;
    for (int N : {512, 1024}) {
        OperatorConfig cfg = s.cfg;
        cfg.N = N;
        const LyapunovPerronOperator op(s.tsys, cfg);
        res.push_back(lp_voc_residual_on(s.tsys, fixed_point(edge, op).xi, ref_grid));
    }
    const double ratio = res[0] / res[1];
    const bool halves = ratio >= 1.4 && ratio <= 2.6;
    return {same_grid && halves,
            fmt("max same-grid residual %.2e vs 5 iter_tol = %.2e; reference-grid residual %.3e (N=512) -> %.3e "
                "(N=1024), ratio %.2f",
                worst, 5.0 * g.iter_tol, res[0], res[1], ratio)};
}

Outcome divergence(const CounterexampleReport& rep) {
    bool ok = true;
    std::ostringstream os;
    for (const auto* rows : {&rep.analytic, &rep.solver}) {
        double prev = 0.0, last = 0.0;
        bool mono = true, big = false;
        for (const auto& r : *rows) {
            if (r.t > 15.0) continue;
            if (!(std::abs(r.value) > prev)) mono = false;
            prev = std::abs(r.value);
        }
        for (const auto& r : *rows) {
            big = big || std::abs(r.value) > 1e3;
            last = r.bracket_ratio;
        }
        const double limit = rows == &rep.analytic ? rep.bracket_limit_analytic : rep.bracket_limit_solver;
        const double rel = std::abs(last - limit) / std::abs(limit);
        ok = ok && mono && big && rel <= 0.05;
        os << (rows == &rep.analytic ? "analytic" : "; solver") << fmt(" candidate: |value| %.2e, %.2e, %.2e at t=5,10,15, "
                                                                      "bracket %.4e vs limit %.4e (rel %.1e)",
                                                                      std::abs((*rows)[0].value), std::abs((*rows)[1].value),
                                                                      std::abs((*rows)[2].value), last, limit, rel);
    }
    return {ok, os.str()};
}

Outcome identity_gap(const CounterexampleReport& rep) {
    bool ok = true;
    std::ostringstream os;
    for (double t : {20.0, 40.0}) {
        const auto g = ml_identity_gap(0.5, 2.0, t);
        ok = ok && std::abs(g.entrywise_gap(1, 1) - 3.0) <= 0.03;
        os << fmt("gap(2,2) %.4f at t=%g; ", g.entrywise_gap(1, 1), t);
    }
    for (double t : {10.0, 20.0, 40.0}) {
        const double c = ml_identity_crosscheck(0.5, 2.0, t);
        ok = ok && std::abs(c - 4.0) <= 0.04;
        os << fmt("ml_matrix ratio %.6f at t=%g; ", c, t);
    }
    const double f90 = identity_gap_factor(0.9, 2.0), f99 = identity_gap_factor(0.99, 2.0);
    ok = ok && std::abs(f99 - 1.0) < std::abs(f90 - 1.0) && std::abs(f99 - 1.0) < 0.02 && rep.gap_matches;
    os << fmt("factor %.4f (alpha=0.9), %.4f (alpha=0.99)", f90, f99);
    return {ok, os.str()};
}

FractionalSystem random_system(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0), uu(0.5, 1.5), us(-2.5, -0.8);
    Eigen::MatrixXd V(3, 3);
    do {
        for (int i = 0; i < 9; ++i) V(i / 3, i % 3) = u(rng);
    } while (V.jacobiSvd().singularValues()(2) < 0.2);
    Eigen::Vector3d ev(uu(rng), us(rng), us(rng));
    const Eigen::MatrixXd A = V * ev.asDiagonal() * V.inverse();
    FractionalSystem sys;
    sys.alpha = 0.7;
    sys.A = A.cast<cplx>();
    sys.f = PolynomialMap(3);
    for (int out = 0; out < 3; ++out)
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) {
                std::vector<int> pw(3, 0);
                ++pw[i];
                ++pw[j];
                sys.f.add_term(out, u(rng), pw);
            }
    sys.validate();
    return sys;
}

Outcome conjugacy() {
    const auto sys = random_system(20240611);
    LPOptions lo;
    lo.N = 2048;
    const auto s = prepare(sys, lo);
    const auto xs = stable_ball_samples(s.split, s.cfg.r, 9, 3, true);
    const auto g = manifold_graph(*s.op, xs, false);
    const auto pts = pullback_manifold(g, s.split);
    std::vector<cplx> lam;
    for (const auto& b : s.split.blocks) lam.push_back(b.lambda);
    const double T = decay_time(sys.alpha, lam, 0.05);
    int decays = 0;
    double worst = 0.0, imag = 0.0;
    for (const auto& x : pts) {
        imag = std::max(imag, x.imag().cwiseAbs().maxCoeff());
        const auto v = verify_manifold_point(sys, x.real().cast<cplx>(), T, 0.1);
        decays += v.verdict == Verdict::decays;
        worst = std::max(worst, v.final_ratio);
    }
    std::ostringstream ev;
    for (const auto& b : s.split.blocks) ev << (ev.tellp() ? ", " : "") << fmt("%.3f", b.lambda.real());
    const int n = static_cast<int>(pts.size());
    return {decays == n && imag <= 1e-8,
            fmt("eigenvalues {%s}, alpha=0.7, T=%.2f: %d/%d pulled-back points decay (max ratio %.4f, max |imag| %.1e)",
                ev.str().c_str(), T, decays, n, worst, imag)};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    CounterexampleReport rep;
    bool have_rep = false;
    auto report = [&]() -> const CounterexampleReport& {
        if (!have_rep) {
            rep = counterexample_report();
            have_rep = true;
        }
        return rep;
    };
    const std::vector<Criterion> criteria{
        {1, "Mittag-Leffler accuracy", ml_accuracy},
        {2, "linear solution identity", linear_solution},
        {3, "measured contraction", contraction},
        {4, "manifold validity", manifold_validity},
        {5, "fixed point solves the equation", fixed_point_residual},
        {6, "unstable projection divergence", [&] { return divergence(report()); }},
        {7, "matrix identity refutation", [&] { return identity_gap(report()); }},
        {8, "conjugacy", conjugacy},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail
                  << fmt(" (%.1f s)", seconds_since(t0)) << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
