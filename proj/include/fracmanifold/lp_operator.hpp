#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "fde_solver.hpp"
#include "gamma.hpp"
#include "grid.hpp"
#include "kernels.hpp"
#include "mittag_leffler.hpp"
#include "quadrature.hpp"
#include "spectral.hpp"
#include "system.hpp"

namespace fracmanifold {

// An element of the bounded-trajectory space sampled on [0, T]; beyond T the
// values are modelled as decaying like (T / t)^tail_exponent.
struct TrajectoryGrid {
    std::vector<double> times;
    Eigen::MatrixXcd values;  // nodes x dim
    double tail_exponent = 0.5;

    int nodes() const { return static_cast<int>(times.size()); }
    double sup_norm() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
    Eigen::VectorXcd at(int n) const { return values.row(n).transpose(); }
};

struct OperatorConfig {
    double alpha = 0.5;
    double C_est = 0.0;
    double delta = 0.0;
    double r_star = 0.0;
    double r = 0.0;
    double ml_sup = 1.0;
    double T_horizon = 0.0;
    double T_tail = 0.0;
    int N = 512;
    double iter_tol = 0.0;
    double guard = 0.0;
    int max_iterations = 400;
};

struct LPOptions {
    int N = 512;
    double T_horizon = 0.0;        // 0: chosen from the spectrum
    double horizon_level = 1e-2;   // stable decay |E_alpha(lambda T^alpha)| reached at T_horizon
    double tail_eps = 1e-12;       // exp(-Re omega T_tail) for the improper integral
    double r_min = 1e-12;
    double r_max = 1.0;
    double iter_tol_factor = 1e-9;
    double guard_factor = 1e6;
    int max_iterations = 400;
    double inflation = 1.0;        // multiplies the estimated contraction constant
    double radius_override = 0.0;  // > 0 replaces the sampling radius r
    int contraction_pairs = 20;    // random pairs for the post-setup contraction check (0 disables)
    int max_retries = 3;
    std::uint64_t seed = 1;
    MLOptions ml;
};

namespace detail {

inline cplx omega_of(double alpha, cplx lambda) { return std::exp(std::log(lambda) / alpha); }

inline bool is_unstable(double alpha, cplx lambda) {
    return std::abs(std::arg(lambda)) < 0.5 * alpha * std::numbers::pi;
}

// Integral of the algebraic tail sum_{k>=2} |c_k| |lambda v|^{-k} over [V, inf).
inline double algebraic_tail_integral(double alpha, double beta, double lam_abs, double V) {
    double s = 0.0;
    for (int k = 2; k <= 6; ++k)
        s += std::abs(recip_gamma(beta - alpha * k)) * std::pow(lam_abs, -k) * std::pow(V, 1.0 - k) / (k - 1);
    // The k = 1 term only occurs for beta != alpha; it is not integrable and must vanish here.
    return s;
}

// (1/alpha) int_0^inf |M_{alpha,alpha}(lambda v)| dv along the ray.
inline double ray_l1(double alpha, cplx lambda, KernelPart part, const MLOptions& opt) {
    RayFunction M(alpha, alpha, lambda, part, opt);
    const double la = std::abs(lambda);
    const double V = 1e4 / la;
    std::vector<double> pts{0.0};
    for (double s = 1.0 / (64.0 * la); s < V; s *= 2.0) pts.push_back(s);
    pts.push_back(V);
    const auto q = integrate<double>([&](double v) { return std::abs(M(v)); }, pts, 1e-13, 1e-10, 4000);
    return (q.value + algebraic_tail_integral(alpha, alpha, la, V)) / alpha;
}

// sup_{v >= 0} |R_{alpha,1}(lambda v)| for an unstable lambda.
inline double remainder_sup(double alpha, cplx lambda, const MLOptions& opt) {
    const MLParams p(alpha, 1.0);
    const double la = std::abs(lambda);
    double best = std::abs(1.0 - 1.0 / alpha);
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
        const double rho = std::exp(std::log(1e-8) + (std::log(1e4) - std::log(1e-8)) * i / (n - 1));
        best = std::max(best, std::abs(ml_remainder(p, lambda * (rho / la), opt).value));
    }
    return best;
}

}  // namespace detail

// Contribution of one eigenvalue to the contraction constant C(alpha, lambda):
// stable:   (1/alpha) int_0^inf |E_{alpha,alpha}(lambda v)| dv,
// unstable: the same for the remainder kernel plus the two window terms of the
//           rewritten unstable row (see LyapunovPerronOperator).
inline double contraction_term(double alpha, cplx lambda, const MLOptions& opt = {}) {
    if (lambda == cplx(0.0)) throw NotHyperbolic("contraction_term: zero eigenvalue");
    if (!detail::is_unstable(alpha, lambda)) return detail::ray_l1(alpha, lambda, KernelPart::full, opt);
    const cplx omega = detail::omega_of(alpha, lambda);
    const double c = std::abs(std::exp((1.0 / alpha - 1.0) * std::log(lambda)));
    return detail::ray_l1(alpha, lambda, KernelPart::remainder, opt) + c / (alpha * omega.real()) +
           c / omega.real() * detail::remainder_sup(alpha, lambda, opt);
}

inline double estimate_contraction_constant(double alpha, const std::vector<cplx>& lambdas,
                                            const MLOptions& opt = {}) {
    if (lambdas.empty()) throw ShapeError("estimate_contraction_constant: no eigenvalues");
    std::map<std::pair<double, double>, double> seen;
    double C = 0.0;
    for (const cplx l : lambdas) {
        const auto key = std::make_pair(l.real(), l.imag());
        if (!seen.count(key)) seen[key] = contraction_term(alpha, l, opt);
        C = std::max(C, seen[key]);
    }
    return C;
}

inline double max_ml_sup(double alpha, const std::vector<cplx>& lambdas, const MLOptions& opt = {}) {
    double s = 1.0;
    for (const cplx l : lambdas)
        if (!detail::is_unstable(alpha, l)) s = std::max(s, ml_sup_stable(MLParams(alpha, 1.0), l, {}, opt));
    return s;
}

// Time horizon: long enough for the improper integral window (exp(-Re omega T) < tail_eps)
// and for every stable mode to decay below horizon_level.
inline std::pair<double, double> choose_horizon(double alpha, const std::vector<cplx>& lambdas, const LPOptions& o) {
    double T_tail = 0.0, T_dec = 0.0;
    const MLParams p(alpha, 1.0);
    for (const cplx l : lambdas) {
        if (detail::is_unstable(alpha, l)) {
            T_tail = std::max(T_tail, -std::log(o.tail_eps) / detail::omega_of(alpha, l).real());
        } else {
            double T = 1e-3;
            auto ok = [&](double t) {
                return std::abs(ml_eval(p, l * std::pow(t, alpha), o.ml).value) <= o.horizon_level &&
                       std::abs(ml_eval(p, l * std::pow(2.0 * t, alpha), o.ml).value) <= o.horizon_level;
            };
            while (!ok(T)) {
                T *= 1.25;
                if (T > 1e9) throw NonConvergence("choose_horizon: stable mode does not decay to the requested level");
            }
            T_dec = std::max(T_dec, T);
        }
    }
    return {std::max(T_tail, T_dec), T_tail};
}

// Radii from C_est: the largest r* in [r_min, r_max] with C_est * l_h(r*) <= 2/3
// (bisection), then r = r* / (3 ml_sup) and delta = 1 / (3 C_est).
inline OperatorConfig choose_radii(const TransformedSystem& ts, double C_est, const LPOptions& o = {}) {
    if (!(C_est > 0.0)) throw DomainError("choose_radii: C_est must be positive");
    OperatorConfig cfg;
    cfg.alpha = ts.alpha;
    cfg.C_est = C_est;
    cfg.delta = 1.0 / (3.0 * C_est);
    auto good = [&](double r) { return C_est * ts.lipschitz(r) <= 2.0 / 3.0; };
    if (!good(o.r_min))
        throw NoValidRadius("choose_radii: C_est * l_h(r) exceeds 2/3 even at r = " + std::to_string(o.r_min));
    if (good(o.r_max)) {
        cfg.r_star = o.r_max;
    } else {
        double lo = o.r_min, hi = o.r_max;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = std::sqrt(lo * hi) < lo * 1.000001 ? 0.5 * (lo + hi) : std::sqrt(lo * hi);
            (good(mid) ? lo : hi) = mid;
        }
        cfg.r_star = lo;
    }
    cfg.ml_sup = max_ml_sup(ts.alpha, ts.lambdas, o.ml);
    cfg.r = cfg.r_star / (3.0 * cfg.ml_sup);
    const auto [T_h, T_tail] = choose_horizon(ts.alpha, ts.lambdas, o);
    cfg.T_horizon = o.T_horizon > 0.0 ? std::max(o.T_horizon, T_tail) : T_h;
    cfg.T_tail = T_tail;
    cfg.N = o.N;
    cfg.iter_tol = o.iter_tol_factor * cfg.r_star;
    cfg.guard = o.guard_factor * cfg.r_star;
    cfg.max_iterations = o.max_iterations;
    return cfg;
}

// Discrete Lyapunov-Perron operator on the graded grid t_j = T (j/N)^{1/alpha}.
// Stable rows:   E_alpha(lambda t^alpha) x_s + int_0^t K_full(t - s) h(xi(s)) ds.
// Unstable rows: the defining formula with E = X + R (X the exponential part) is
// evaluated in the algebraically equivalent bounded form
//   int_0^t K_R(t - s) h ds - (c/alpha) int_t^inf e^{-omega (s - t)} h ds - c R_{alpha,1}(lambda t^alpha) int_0^inf e^{-omega s} h ds,
// with c = lambda^{1/alpha - 1}, omega = lambda^{1/alpha}; the growing parts cancel exactly.
class LyapunovPerronOperator {
public:
    LyapunovPerronOperator(TransformedSystem ts, OperatorConfig cfg, const MLOptions& opt = {})
        : ts_(std::move(ts)), cfg_(cfg) {
        if (cfg_.N < 2) throw DomainError("LyapunovPerronOperator: N must be at least 2");
        if (!(cfg_.T_horizon > 0.0)) throw DomainError("LyapunovPerronOperator: T_horizon must be positive");
        const double a = ts_.alpha;
        t_ = graded_grid(cfg_.T_horizon, cfg_.N, 1.0 / a);
        const MLParams p1(a, 1.0);
        for (const cplx l : ts_.lambdas) {
            const auto key = std::make_pair(l.real(), l.imag());
            if (tables_.count(key)) continue;
            Table tb;
            tb.unstable = detail::is_unstable(a, l);
            KernelAntiderivatives F(a, l, tb.unstable ? KernelPart::remainder : KernelPart::full, opt);
            tb.W = product_weights(t_, F);
            tb.lin.resize(static_cast<Eigen::Index>(t_.size()));
            for (std::size_t n = 0; n < t_.size(); ++n) {
                const cplx z = l * std::pow(t_[n], a);
                tb.lin[n] = tb.unstable ? ml_remainder(p1, z, opt).value : ml_eval(p1, z, opt).value;
            }
            if (tb.unstable) {
                const cplx ll = std::log(l);
                tb.c = std::exp((1.0 / a - 1.0) * ll);
                tb.window = ExpWindow(t_, std::exp(ll / a), a);
            }
            tables_.emplace(key, std::move(tb));
        }
    }

    const std::vector<double>& times() const { return t_; }
    const OperatorConfig& config() const { return cfg_; }
    const TransformedSystem& system() const { return ts_; }
    int dim() const { return ts_.dim(); }
    int d_u() const { return ts_.d_u(); }
    int d_s() const { return ts_.d_s(); }

    TrajectoryGrid zero() const {
        return {t_, Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(t_.size()), dim()), ts_.alpha};
    }

    // h(xi(t_n)) row by row.
    Eigen::MatrixXcd nonlinearity(const Eigen::MatrixXcd& values) const {
        Eigen::MatrixXcd G(values.rows(), values.cols());
        for (Eigen::Index n = 0; n < values.rows(); ++n) G.row(n) = ts_.h(values.row(n).transpose()).transpose();
        return G;
    }

    TrajectoryGrid apply(const TrajectoryGrid& xi, const Eigen::VectorXcd& x_s) const {
        if (xi.nodes() != static_cast<int>(t_.size()) || xi.values.cols() != dim())
            throw ShapeError("apply_lp: trajectory does not live on the operator grid");
        if (x_s.size() != d_s()) throw ShapeError("apply_lp: x_s has the wrong dimension");
        const Eigen::MatrixXcd G = nonlinearity(xi.values);
        TrajectoryGrid out{t_, Eigen::MatrixXcd(G.rows(), G.cols()), ts_.alpha};
        const double a = ts_.alpha;
        for (int i = 0; i < dim(); ++i) {
            const auto& tb = tables_.at({ts_.lambdas[i].real(), ts_.lambdas[i].imag()});
            Eigen::VectorXcd col = tb.W * G.col(i);
            if (tb.unstable) {
                const Eigen::VectorXcd B = tb.window.apply(G.col(i));
                col -= (tb.c / a) * B + (tb.c * B[0]) * tb.lin;
            } else {
                col += x_s[i - d_u()] * tb.lin;
            }
            out.values.col(i) = col;
        }
        const double s = out.sup_norm();
        if (!(s <= cfg_.guard))
            throw Unbounded("apply_lp: operator output norm " + std::to_string(s) + " exceeds the guard " +
                            std::to_string(cfg_.guard));
        return out;
    }

private:
    struct Table {
        bool unstable = false;
        Eigen::MatrixXcd W;
        Eigen::VectorXcd lin;  // E_alpha (stable) or R_{alpha,1} (unstable) at the nodes
        cplx c{};
        ExpWindow window;
    };

    TransformedSystem ts_;
    OperatorConfig cfg_;
    std::vector<double> t_;
    std::map<std::pair<double, double>, Table> tables_;
};

inline TrajectoryGrid apply_lp(const TrajectoryGrid& xi, const Eigen::VectorXcd& x_s, const LyapunovPerronOperator& op) {
    return op.apply(xi, x_s);
}

struct FixedPointResult {
    TrajectoryGrid xi;
    int iterations = 0;
    double last_step = 0.0;
    double last_ratio = 0.0;
};

// Picard iteration from xi = 0 until the sup-norm step drops below iter_tol.
inline FixedPointResult fixed_point(const Eigen::VectorXcd& x_s, const LyapunovPerronOperator& op) {
    const auto& cfg = op.config();
    if (max_norm(x_s) > cfg.r * (1.0 + 1e-12))
        throw DomainError("fixed_point: |x_s| = " + std::to_string(max_norm(x_s)) + " exceeds r = " +
                          std::to_string(cfg.r));
    FixedPointResult res;
    res.xi = op.zero();
    double prev = std::numeric_limits<double>::infinity();
    int slow = 0;
    for (int m = 1; m <= cfg.max_iterations; ++m) {
        TrajectoryGrid next = op.apply(res.xi, x_s);
        const double step = (next.values - res.xi.values).cwiseAbs().maxCoeff();
        res.xi = std::move(next);
        res.iterations = m;
        res.last_step = step;
        if (std::isfinite(prev) && prev > 0.0) res.last_ratio = step / prev;
        if (step <= cfg.iter_tol) return res;
        slow = res.last_ratio > 0.95 ? slow + 1 : 0;
        if (slow >= 5)
            throw NoConvergence("fixed_point: contraction ratio " + std::to_string(res.last_ratio) +
                                " stayed above 0.95; C_est is likely underestimated");
        prev = step;
    }
    throw NoConvergence("fixed_point: no convergence after " + std::to_string(cfg.max_iterations) +
                        " iterations (last step " + std::to_string(res.last_step) + ")");
}

// Growth level of E_alpha(lambda_u t^alpha) up to which unstable rows enter the residual.
// A defect in the unstable initial value reappears multiplied by that factor.
inline constexpr double kUnstableResidualLevel = 10.0;

inline double unstable_window(double alpha, const std::vector<cplx>& lambdas, double level = kUnstableResidualLevel) {
    double w = std::numeric_limits<double>::infinity();
    for (const cplx l : lambdas)
        if (detail::is_unstable(alpha, l)) {
            // |E_alpha(lambda t^alpha)| ~ (1/alpha) exp(Re omega t)
            w = std::min(w, std::log(alpha * level) / detail::omega_of(alpha, l).real());
        }
    return std::max(w, 0.0);
}

// Variation-of-constants residual of a grid trajectory of the transformed system,
// sup over nodes and coordinates. Unstable rows are restricted to the window above,
// where cancellation between E_alpha(lambda t^alpha) y(0) and the convolution stays benign.
inline VocEvaluator lp_voc_evaluator(const TransformedSystem& ts, const std::vector<double>& times,
                                     const MLOptions& opt = {}) {
    return VocEvaluator(ts.alpha, ts.lambdas, times, unstable_window(ts.alpha, ts.lambdas), opt);
}

inline double lp_voc_residual(const VocEvaluator& ev, const TransformedSystem& ts, const TrajectoryGrid& xi) {
    if (xi.times != ev.times()) throw ShapeError("lp_voc_residual: grid mismatch");
    Eigen::MatrixXcd G(xi.values.rows(), xi.values.cols());
    for (Eigen::Index n = 0; n < G.rows(); ++n) G.row(n) = ts.h(xi.values.row(n).transpose()).transpose();
    return ev.residuals(xi.values, G).cwiseAbs().maxCoeff();
}

inline double lp_voc_residual(const TransformedSystem& ts, const TrajectoryGrid& xi, const MLOptions& opt = {}) {
    return lp_voc_residual(lp_voc_evaluator(ts, xi.times, opt), ts, xi);
}

// The same residual after piecewise-linear resampling onto another grid.
inline double lp_voc_residual_on(const TransformedSystem& ts, const TrajectoryGrid& xi, const std::vector<double>& grid,
                                 const MLOptions& opt = {}) {
    TrajectoryGrid r{grid, interpolate_rows(xi.times, xi.values, grid), xi.tail_exponent};
    return lp_voc_residual(ts, r, opt);
}

struct ManifoldSample {
    Eigen::VectorXcd x_s;
    Eigen::VectorXcd w;
    int iterations = 0;
    double residual = 0.0;
    double sup_norm = 0.0;
};

struct ManifoldGraph {
    std::vector<ManifoldSample> samples;
    double r = 0.0;
    double r_star = 0.0;
    double lipschitz_bound = 0.0;
    double iter_tol = 0.0;
};

inline int thread_count() {
    if (const char* env = std::getenv("FRACMANIFOLD_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fixed_point per sample; samples are independent, results keep the input order.
inline ManifoldGraph manifold_graph(const LyapunovPerronOperator& op, const std::vector<Eigen::VectorXcd>& samples,
                                    bool with_residual = true, int threads = 0) {
    ManifoldGraph g;
    const auto& cfg = op.config();
    g.r = cfg.r;
    g.r_star = cfg.r_star;
    g.lipschitz_bound = 3.0 * cfg.ml_sup;
    g.iter_tol = cfg.iter_tol;
    std::vector<Eigen::VectorXcd> xs = samples;
    bool has_zero = false;
    for (const auto& x : xs) has_zero = has_zero || max_norm(x) == 0.0;
    if (!has_zero) xs.insert(xs.begin(), Eigen::VectorXcd::Zero(op.d_s()));
    g.samples.resize(xs.size());
    std::vector<std::exception_ptr> errors(xs.size());
    std::optional<VocEvaluator> ev;
    if (with_residual) ev.emplace(lp_voc_evaluator(op.system(), op.times()));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < xs.size(); i = next++) {
            try {
                const auto fp = fixed_point(xs[i], op);
                auto& s = g.samples[i];
                s.x_s = xs[i];
                s.w = fp.xi.at(0).head(op.d_u());
                s.iterations = fp.iterations;
                s.sup_norm = fp.xi.sup_norm();
                if (ev) s.residual = lp_voc_residual(*ev, op.system(), fp.xi);
            } catch (const Error& e) {
                errors[i] = std::make_exception_ptr(
                    NoConvergence("manifold_graph: sample " + std::to_string(i) + ": " + e.what()));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int nt = std::max(1, std::min<int>(threads > 0 ? threads : thread_count(), static_cast<int>(xs.size())));
    std::vector<std::thread> pool;
    for (int k = 1; k < nt; ++k) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return g;
}

// Manifold points in the original coordinates: x = S (w, x_s).
inline std::vector<Eigen::VectorXcd> pullback_manifold(const ManifoldGraph& g, const HyperbolicSplitting& split) {
    std::vector<Eigen::VectorXcd> out;
    out.reserve(g.samples.size());
    for (const auto& s : g.samples) {
        Eigen::VectorXcd y(split.dim());
        y << s.w, s.x_s;
        out.push_back(split.S * y);
    }
    return out;
}

// Points of the stable ball B(0, r): a symmetric grid when there is one real stable
// coordinate, otherwise the origin plus seeded random points. For real systems the
// random points are stable components of random real vectors, so that their
// pullbacks stay real.
inline std::vector<Eigen::VectorXcd> stable_ball_samples(const HyperbolicSplitting& split, double r, int count,
                                                         std::uint64_t seed, bool real_system) {
    if (count < 1) throw DomainError("stable_ball_samples: count must be positive");
    const int ds = split.d_s;
    std::vector<Eigen::VectorXcd> out;
    if (ds == 1 && real_system && split.S.imag().cwiseAbs().maxCoeff() == 0.0) {
        for (int i = 0; i < count; ++i) {
            Eigen::VectorXcd v(1);
            v[0] = count == 1 ? 0.0 : r * (-1.0 + 2.0 * i / (count - 1));
            out.push_back(v);
        }
        return out;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0), rad(0.0, 1.0);
    out.push_back(Eigen::VectorXcd::Zero(ds));
    while (static_cast<int>(out.size()) < count) {
        Eigen::VectorXcd xs(ds);
        if (real_system) {
            Eigen::VectorXcd x(split.dim());
            for (int i = 0; i < x.size(); ++i) x[i] = u(rng);
            xs = (split.S_inv * x).tail(ds);
        } else {
            for (int i = 0; i < ds; ++i) xs[i] = cplx(u(rng), u(rng));
        }
        const double n = max_norm(xs);
        if (n == 0.0) continue;
        out.push_back(xs * (r * rad(rng) / n));
    }
    return out;
}

// sup-norm ratio ||T xi - T xi_hat|| / ||xi - xi_hat|| over random pairs in B(0, r*) and x_s in B(0, r).
// Pairs are scaled profiles a * p(t), b * p(t) with p in {1, exp(-t / tau), E-like 1/(1 + t)}.
inline std::vector<double> measure_contraction(const LyapunovPerronOperator& op, int pairs, std::uint64_t seed,
                                               bool real_samples = true) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 1.0);
    const auto& cfg = op.config();
    const auto& t = op.times();
    const int d = op.dim();
    auto rand_vec = [&](int n, double radius) {
        Eigen::VectorXcd v(n);
        for (int i = 0; i < n; ++i) v[i] = real_samples ? cplx(u(rng)) : cplx(u(rng), u(rng)) / std::sqrt(2.0);
        return v * radius;
    };
    std::vector<double> ratios;
    for (int k = 0; k < pairs; ++k) {
        const int kind = k % 3;
        const double tau = 0.1 + 5.0 * pos(rng);
        Eigen::VectorXd prof(t.size());
        for (std::size_t n = 0; n < t.size(); ++n)
            prof[n] = kind == 0 ? 1.0 : kind == 1 ? std::exp(-t[n] / tau) : 1.0 / (1.0 + t[n] / tau);
        const Eigen::VectorXcd a = rand_vec(d, cfg.r_star), b = rand_vec(d, cfg.r_star);
        TrajectoryGrid xi = op.zero(), xh = op.zero();
        for (int i = 0; i < d; ++i) {
            xi.values.col(i) = a[i] * prof.cast<cplx>();
            xh.values.col(i) = b[i] * prof.cast<cplx>();
        }
        const Eigen::VectorXcd xs = rand_vec(op.d_s(), cfg.r);
        const double den = (xi.values - xh.values).cwiseAbs().maxCoeff();
        if (den == 0.0) continue;
        const double num = (op.apply(xi, xs).values - op.apply(xh, xs).values).cwiseAbs().maxCoeff();
        ratios.push_back(num / den);
    }
    return ratios;
}

// Full setup: eigenvalues -> C_est -> delta -> h -> radii -> operator.
struct LPSetup {
    HyperbolicSplitting split;
    TransformedSystem tsys;
    OperatorConfig cfg;
    std::optional<LyapunovPerronOperator> op;
    double measured_ratio = 0.0;  // max over the setup check pairs (0 when disabled)
    int retries = 0;
};

inline LPSetup prepare(const FractionalSystem& sys, const LPOptions& o = {}) {
    sys.validate();
    if (!(sys.alpha < 1.0)) throw DomainError("prepare: alpha must lie in (0, 1)");
    const auto probe = jordanize(sys.A, sys.alpha, 1.0, sys.jordan_blocks);
    if (probe.d_s == 0) throw NotHyperbolic("prepare: the equilibrium has no stable directions");
    const double C0 = estimate_contraction_constant(sys.alpha, probe.coordinate_lambdas(), o.ml) * o.inflation;
    double inflate = 1.0;
    for (int attempt = 0;; ++attempt) {
        LPSetup s;
        s.retries = attempt;
        const double C = C0 * inflate;
        s.split = jordanize(sys.A, sys.alpha, 1.0 / (3.0 * C), sys.jordan_blocks);
        s.tsys = transform_system(sys, s.split);
        s.cfg = choose_radii(s.tsys, C, o);
        if (o.radius_override > 0.0) s.cfg.r = o.radius_override;
        s.op.emplace(s.tsys, s.cfg, o.ml);
        if (o.contraction_pairs <= 0) return s;
        const auto ratios = measure_contraction(*s.op, o.contraction_pairs, o.seed, sys.is_real());
        s.measured_ratio = ratios.empty() ? 0.0 : *std::max_element(ratios.begin(), ratios.end());
        if (s.measured_ratio <= 2.0 / 3.0 + 0.05 || attempt >= o.max_retries) return s;
        inflate *= 2.0;
    }
}

}  // namespace fracmanifold
