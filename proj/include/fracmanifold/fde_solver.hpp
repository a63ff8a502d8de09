#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "grid.hpp"
#include "kernels.hpp"
#include "mittag_leffler.hpp"
#include "spectral.hpp"
#include "system.hpp"

namespace fracmanifold {

struct Trajectory {
    std::vector<double> times;
    Eigen::MatrixXcd states;  // row n is the state at times[n]
    double alpha = 0.5;
    bool stopped_early = false;

    int nodes() const { return static_cast<int>(times.size()); }
    Eigen::VectorXcd state(int n) const { return states.row(n).transpose(); }
};

enum class MeshKind { graded, uniform };

struct SolverOptions {
    MeshKind mesh = MeshKind::graded;
    // Grading exponent for MeshKind::graded; 0 selects 1/alpha.
    double grading = 0.0;
    double guard_factor = 1e6;
    // Integration stops (stopped_early) once the max norm exceeds this radius.
    double stop_radius = std::numeric_limits<double>::infinity();
};

inline std::vector<double> solver_mesh(double alpha, double T, int N, const SolverOptions& opt) {
    if (opt.mesh == MeshKind::uniform) return uniform_grid(T, N);
    const double r = opt.grading > 0.0 ? opt.grading : 1.0 / alpha;
    return graded_grid(T, N, r);
}

// Fractional Adams-Bashforth-Moulton on the Volterra form
//   x(t) = x0 + I^alpha [A x + f(x)](t),
// generalized to non-uniform meshes: rectangle product rule as predictor,
// piecewise-linear product rule as the single corrector sweep.
template <class F>
Trajectory solve_caputo(double alpha, const Eigen::MatrixXcd& A, F&& f, const Eigen::VectorXcd& x0, double T, int N,
                        const SolverOptions& opt = {}) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("solve_caputo: alpha must lie in (0, 1)");
    if (N < 2) throw DomainError("solve_caputo: N must be at least 2");
    if (!(T > 0.0)) throw DomainError("solve_caputo: T must be positive");
    if (A.rows() != A.cols() || A.rows() != x0.size()) throw ShapeError("solve_caputo: dimension mismatch");
    const int d = static_cast<int>(x0.size());
    Trajectory tr;
    tr.alpha = alpha;
    tr.times = solver_mesh(alpha, T, N, opt);
    const auto& t = tr.times;
    tr.states = Eigen::MatrixXcd::Zero(N + 1, d);
    Eigen::MatrixXcd rhs(d, N + 1);
    tr.states.row(0) = x0.transpose();
    rhs.col(0) = A * x0 + f(x0);
    const double g1 = std::tgamma(alpha + 1.0), g2 = std::tgamma(alpha + 2.0);
    const double guard = opt.guard_factor * std::max(1.0, max_norm(x0));
    std::vector<double> f1(N + 1), f2(N + 1);
    Eigen::VectorXcd wp(N + 1), wc(N + 1);
    for (int n = 0; n < N; ++n) {
        const double tn1 = t[n + 1];
        for (int j = 0; j <= n + 1; ++j) {
            const double u = tn1 - t[j];
            const double ua = j == n + 1 ? 0.0 : std::pow(u, alpha);
            f1[j] = ua / g1;
            f2[j] = u * ua / g2;
        }
        wc.head(n + 2).setZero();
        for (int j = 0; j <= n; ++j) {
            wp[j] = f1[j] - f1[j + 1];
            const double d2 = (f2[j] - f2[j + 1]) / (t[j + 1] - t[j]);
            wc[j] += f1[j] - d2;
            wc[j + 1] += d2 - f1[j + 1];
        }
        const Eigen::VectorXcd hist_p = rhs.leftCols(n + 1) * wp.head(n + 1);
        const Eigen::VectorXcd pred = x0 + hist_p;
        const Eigen::VectorXcd hist_c = rhs.leftCols(n + 1) * wc.head(n + 1);
        const Eigen::VectorXcd fp = A * pred + f(pred);
        const Eigen::VectorXcd y = x0 + hist_c + wc[n + 1] * fp;
        const double ny = max_norm(y);
        if (!(ny <= guard))
            throw StepOverflow("solve_caputo: state norm exceeded the guard " + std::to_string(guard) + " at t = " +
                                   std::to_string(tn1),
                               n + 1, tn1);
        tr.states.row(n + 1) = y.transpose();
        rhs.col(n + 1) = A * y + f(y);
        if (ny > opt.stop_radius) {
            tr.stopped_early = true;
            tr.times.resize(n + 2);
            tr.states.conservativeResize(n + 2, Eigen::NoChange);
            return tr;
        }
    }
    return tr;
}

inline Trajectory solve_caputo(const FractionalSystem& sys, const Eigen::VectorXcd& x0, double T, int N,
                               const SolverOptions& opt = {}) {
    sys.validate();
    if (x0.size() != sys.dim()) throw ShapeError("solve_caputo: x0 has the wrong dimension");
    return solve_caputo(
        sys.alpha, sys.A, [&](const Eigen::VectorXcd& x) { return sys.f(x); }, x0, T, N, opt);
}

// Variation-of-constants residual for a diagonal linear part:
//   y_i(t) - E_alpha(lambda_i t^alpha) y_i(0) - int_0^t K_i(t - s) g_i(s) ds
// with g piecewise linear on the given nodes. Unstable coordinates split the
// kernel into its bounded remainder plus an exactly integrated exponential,
// and are only checked for t <= unstable_window.
class VocEvaluator {
public:
    VocEvaluator(double alpha, const std::vector<cplx>& lambdas, std::vector<double> times,
                 double unstable_window = std::numeric_limits<double>::infinity(), const MLOptions& opt = {})
        : alpha_(alpha), lambdas_(lambdas), t_(std::move(times)) {
        const int n = static_cast<int>(t_.size());
        for (const cplx lam : lambdas_) {
            if (tables_.count(key(lam))) continue;
            Table tb;
            tb.unstable = std::abs(std::arg(lam)) < 0.5 * alpha * std::numbers::pi;
            tb.rows = n;
            if (tb.unstable)
                while (tb.rows > 1 && t_[tb.rows - 1] > unstable_window) --tb.rows;
            KernelAntiderivatives F(alpha, lam, tb.unstable ? KernelPart::remainder : KernelPart::full, opt);
            tb.W = product_weights(t_, F, tb.rows);
            tb.E.resize(tb.rows);
            const MLParams p1(alpha, 1.0);
            for (int k = 0; k < tb.rows; ++k) tb.E[k] = ml_eval(p1, lam * std::pow(t_[k], alpha), opt).value;
            if (tb.unstable) {
                const cplx ll = std::log(lam);
                tb.omega = std::exp(ll / alpha);
                tb.c = std::exp((1.0 / alpha - 1.0) * ll) / alpha;
                tb.grow.resize(tb.rows);
                tb.pa.resize(tb.rows);
                tb.pb.resize(tb.rows);
                for (int k = 0; k + 1 < tb.rows; ++k) {
                    const double h = t_[k + 1] - t_[k];
                    const auto m = exp_linear_moments(-tb.omega * h);
                    tb.grow[k] = std::exp(tb.omega * h);
                    tb.pa[k] = h * m.first;
                    tb.pb[k] = h * m.second;
                }
            }
            tables_[key(lam)] = std::move(tb);
        }
    }

    // Residual matrix (nodes x coordinates); entries outside the unstable window are zero.
    Eigen::MatrixXcd residuals(const Eigen::MatrixXcd& y, const Eigen::MatrixXcd& g) const {
        const int n = static_cast<int>(t_.size());
        if (y.rows() != n || g.rows() != n || y.cols() != static_cast<Eigen::Index>(lambdas_.size()))
            throw ShapeError("VocEvaluator: state matrix does not match the grid");
        Eigen::MatrixXcd res = Eigen::MatrixXcd::Zero(n, y.cols());
        for (Eigen::Index i = 0; i < y.cols(); ++i) {
            const auto& tb = tables_.at(key(lambdas_[i]));
            const int rows = tb.rows;
            Eigen::VectorXcd conv = tb.W.topRows(rows) * g.col(i);
            if (tb.unstable) {
                cplx C(0.0);
                for (int k = 0; k < rows; ++k) {
                    if (k > 0) C = tb.grow[k - 1] * C + tb.pb[k - 1] * g(k - 1, i) + tb.pa[k - 1] * g(k, i);
                    conv[k] += tb.c * C;
                }
            }
            for (int k = 0; k < rows; ++k) res(k, i) = y(k, i) - tb.E[k] * y(0, i) - conv[k];
        }
        return res;
    }

    const std::vector<double>& times() const { return t_; }

private:
    struct Table {
        bool unstable = false;
        int rows = 0;
        Eigen::MatrixXcd W;
        std::vector<cplx> E;
        cplx omega{}, c{};
        std::vector<cplx> grow, pa, pb;
    };
    static std::pair<double, double> key(cplx z) { return {z.real(), z.imag()}; }

    double alpha_;
    std::vector<cplx> lambdas_;
    std::vector<double> t_;
    std::map<std::pair<double, double>, Table> tables_;
};

struct VocOptions {
    double unstable_window = std::numeric_limits<double>::infinity();
};

// max_n || x_n - [E_alpha(t_n^alpha A) x_0 + convolution] ||, evaluated in Jordan
// coordinates (delta = 1) and mapped back.
inline double voc_residual(const FractionalSystem& sys, const Trajectory& traj, const VocOptions& vopt = {}) {
    sys.validate();
    if (traj.states.cols() != sys.dim()) throw ShapeError("voc_residual: trajectory dimension mismatch");
    if (traj.nodes() < 2) return 0.0;
    const auto split = jordanize(sys.A, sys.alpha, 1.0, sys.jordan_blocks);
    const auto ts = transform_system(sys, split);
    const Eigen::MatrixXcd Y = traj.states * split.S_inv.transpose();
    Eigen::MatrixXcd G(Y.rows(), Y.cols());
    for (Eigen::Index k = 0; k < Y.rows(); ++k) G.row(k) = ts.h(Y.row(k).transpose()).transpose();
    VocEvaluator ev(sys.alpha, ts.lambdas, traj.times, vopt.unstable_window);
    const Eigen::MatrixXcd R = ev.residuals(Y, G) * split.S.transpose();
    return R.cwiseAbs().maxCoeff();
}

enum class Verdict { decays, escapes, inconclusive };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::decays: return "decays";
        case Verdict::escapes: return "escapes";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "unknown";
}

struct VerifyOptions {
    int N = 2048;
    // Ball radius; 0 selects ball_factor * ||x||.
    double ball_radius = 0.0;
    double ball_factor = 5.0;
    SolverOptions solver;
};

struct VerifyResult {
    Verdict verdict = Verdict::inconclusive;
    double final_ratio = 0.0;  // ||phi(T)|| / ||x||
    double max_ratio = 0.0;    // max_t ||phi(t)|| / ||x|| over the computed nodes
    double escape_time = std::numeric_limits<double>::quiet_NaN();
};

inline VerifyResult verify_manifold_point(const FractionalSystem& sys, const Eigen::VectorXcd& x, double T,
                                          double shrink, const VerifyOptions& vopt = {}) {
    if (!(shrink > 0.0 && shrink < 1.0)) throw DomainError("verify_manifold_point: shrink must lie in (0, 1)");
    VerifyResult out;
    const double nx = max_norm(x);
    if (nx == 0.0) {
        out.verdict = Verdict::decays;
        return out;
    }
    SolverOptions so = vopt.solver;
    so.stop_radius = vopt.ball_radius > 0.0 ? vopt.ball_radius : vopt.ball_factor * nx;
    Trajectory tr;
    try {
        tr = solve_caputo(sys, x, T, vopt.N, so);
    } catch (const StepOverflow& e) {
        out.verdict = Verdict::escapes;
        out.escape_time = e.time();
        return out;
    }
    double mx = 0.0;
    for (int k = 0; k < tr.nodes(); ++k) mx = std::max(mx, max_norm(tr.state(k)));
    out.max_ratio = mx / nx;
    out.final_ratio = max_norm(tr.state(tr.nodes() - 1)) / nx;
    if (tr.stopped_early) {
        out.verdict = Verdict::escapes;
        out.escape_time = tr.times.back();
    } else if (out.final_ratio <= shrink) {
        out.verdict = Verdict::decays;
    }
    return out;
}

}  // namespace fracmanifold
