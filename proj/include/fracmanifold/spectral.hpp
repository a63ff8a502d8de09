#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "polynomial.hpp"
#include "system.hpp"

namespace fracmanifold {

enum class Stability { unstable, stable };

inline std::string to_string(Stability s) { return s == Stability::unstable ? "unstable" : "stable"; }

struct EigenInfo {
    cplx value{};
    Stability kind = Stability::stable;
    double abs_arg = 0.0;
    double boundary_distance = 0.0;
};

struct HyperbolicityReport {
    std::vector<EigenInfo> eigenvalues;  // unstable first
    int unstable_count = 0;
};

struct SpectralOptions {
    double tol_hyp = 1e-6;
    double cluster_tol = 1e-8;
    double reconstruction_tol = 1e-8;
    double max_condition = 1e7;
};

namespace detail {

inline std::string fmt(cplx z) {
    return "(" + std::to_string(z.real()) + ", " + std::to_string(z.imag()) + ")";
}

inline double norm_max(const Eigen::MatrixXcd& M) { return M.size() ? M.cwiseAbs().maxCoeff() : 0.0; }

inline EigenInfo classify(cplx lambda, double alpha, double scale, double tol_hyp) {
    if (std::abs(lambda) <= 1e-12 * std::max(1.0, scale))
        throw NotHyperbolic("eigenvalue " + fmt(lambda) + " is zero, its argument is undefined");
    const double a = std::abs(std::arg(lambda));
    const double crit = 0.5 * alpha * std::numbers::pi;
    const double dist = std::abs(a - crit);
    if (dist <= tol_hyp)
        throw NotHyperbolic("eigenvalue " + fmt(lambda) + " lies within " + std::to_string(tol_hyp) +
                            " of the critical sector boundary |arg| = alpha*pi/2");
    return {lambda, a < crit ? Stability::unstable : Stability::stable, a, dist};
}

inline bool order_before(const EigenInfo& a, const EigenInfo& b) {
    if (a.kind != b.kind) return a.kind == Stability::unstable;
    if (a.abs_arg != b.abs_arg) return a.abs_arg < b.abs_arg;
    if (a.value.real() != b.value.real()) return a.value.real() < b.value.real();
    return a.value.imag() < b.value.imag();
}

}  // namespace detail

inline HyperbolicityReport check_hyperbolicity(const Eigen::MatrixXcd& A, double alpha,
                                               double tol_hyp = SpectralOptions{}.tol_hyp) {
    if (A.rows() == 0 || A.rows() != A.cols()) throw ShapeError("check_hyperbolicity: A must be square");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("check_hyperbolicity: alpha must lie in (0, 1)");
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A, false);
    if (es.info() != Eigen::Success) throw IllConditioned("check_hyperbolicity: eigenvalue iteration failed");
    const double scale = detail::norm_max(A);
    HyperbolicityReport rep;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        rep.eigenvalues.push_back(detail::classify(es.eigenvalues()[i], alpha, scale, tol_hyp));
    std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end(), detail::order_before);
    for (const auto& e : rep.eigenvalues)
        if (e.kind == Stability::unstable) ++rep.unstable_count;
    return rep;
}

struct JordanBlock {
    cplx lambda{};
    int size = 1;
    double delta_i = 0.0;  // 0 for 1x1 blocks, delta otherwise
    int offset = 0;
    Stability kind = Stability::stable;
};

// (T P)^{-1} A (T P) = blockdiag(lambda_i I + delta_i N), unstable blocks first.
struct HyperbolicSplitting {
    double alpha = 0.5;
    double delta = 1.0;
    std::vector<JordanBlock> blocks;
    int k = 0;  // number of unstable blocks
    int d_u = 0, d_s = 0;
    Eigen::MatrixXcd T, P, S, S_inv;  // S = T P

    int dim() const { return d_u + d_s; }

    std::vector<cplx> coordinate_lambdas() const {
        std::vector<cplx> out;
        for (const auto& b : blocks)
            for (int i = 0; i < b.size; ++i) out.push_back(b.lambda);
        return out;
    }

    Eigen::MatrixXcd block_matrix() const {
        Eigen::MatrixXcd J = Eigen::MatrixXcd::Zero(dim(), dim());
        for (const auto& b : blocks)
            for (int i = 0; i < b.size; ++i) {
                J(b.offset + i, b.offset + i) = b.lambda;
                if (i + 1 < b.size) J(b.offset + i, b.offset + i + 1) = b.delta_i;
            }
        return J;
    }

    bool has_nilpotent() const {
        for (const auto& b : blocks)
            if (b.size > 1) return true;
        return false;
    }
};

namespace detail {

struct RawBlock {
    cplx lambda;
    std::vector<Eigen::VectorXcd> chain;  // T columns for this block
};

// Scale so that the largest-magnitude entry of v becomes exactly 1.
inline cplx unit_pivot(const Eigen::VectorXcd& v) {
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    return v[idx];
}

inline double min_singular_normalized(const std::vector<Eigen::VectorXcd>& cols, int d) {
    if (cols.empty()) return 1.0;
    Eigen::MatrixXcd M(d, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) M.col(i) = cols[i] / cols[i].norm();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
    return svd.singularValues().minCoeff();
}

inline std::vector<RawBlock> diagonal_blocks(const Eigen::MatrixXcd& A, const SpectralOptions& opt) {
    const int d = static_cast<int>(A.rows());
    const double scale = std::max(1.0, norm_max(A));
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A, true);
    if (es.info() != Eigen::Success) throw IllConditioned("jordanize: eigenvalue iteration failed");
    const Eigen::VectorXcd ev = es.eigenvalues();
    std::vector<int> cluster(d, -1);
    int nc = 0;
    for (int i = 0; i < d; ++i) {
        if (cluster[i] >= 0) continue;
        cluster[i] = nc;
        for (int j = i + 1; j < d; ++j)
            if (cluster[j] < 0 && std::abs(ev[i] - ev[j]) <= opt.cluster_tol * scale) cluster[j] = nc;
        ++nc;
    }
    std::vector<RawBlock> out;
    for (int c = 0; c < nc; ++c) {
        std::vector<int> members;
        cplx mean(0.0);
        for (int i = 0; i < d; ++i)
            if (cluster[i] == c) {
                members.push_back(i);
                mean += ev[i];
            }
        mean /= static_cast<double>(members.size());
        if (members.size() == 1) {
            Eigen::VectorXcd v = es.eigenvectors().col(members[0]);
            v /= unit_pivot(v);
            out.push_back({ev[members[0]], {v}});
            continue;
        }
        // Repeated eigenvalue: semisimple only if the eigenspace has full dimension.
        const int m = static_cast<int>(members.size());
        Eigen::MatrixXcd B = A - mean * Eigen::MatrixXcd::Identity(d, d);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(B, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const double small = sv[d - m];
        const double gap = d - m - 1 >= 0 ? sv[d - m - 1] : scale;
        if (small > 1e-8 * scale) {
            throw IllConditioned("jordanize: eigenvalue " + fmt(mean) + " has algebraic multiplicity " +
                                 std::to_string(m) +
                                 " but a deficient eigenspace; declare its Jordan structure in jordan_blocks");
        }
        if (gap < 1e-6 * scale)
            throw IllConditioned("jordanize: ambiguous rank decision near eigenvalue " + fmt(mean));
        for (int j = 0; j < m; ++j) {
            Eigen::VectorXcd v = svd.matrixV().col(d - m + j);
            v /= unit_pivot(v);
            out.push_back({mean, {v}});
        }
    }
    return out;
}

inline std::vector<RawBlock> declared_blocks(const Eigen::MatrixXcd& A, const std::vector<JordanDecl>& decl,
                                             const SpectralOptions& opt) {
    const int d = static_cast<int>(A.rows());
    int total = 0;
    for (const auto& b : decl) {
        if (b.size < 1) throw ValidationError("jordan_blocks: sizes must be positive");
        total += b.size;
    }
    if (total != d) throw ValidationError("jordan_blocks: sizes must add up to the dimension");
    const double scale = std::max(1.0, norm_max(A));
    // Group declarations by eigenvalue.
    std::vector<std::pair<cplx, std::vector<int>>> groups;
    for (const auto& b : decl) {
        bool found = false;
        for (auto& g : groups)
            if (std::abs(g.first - b.lambda) <= 1e-12 * scale) {
                g.second.push_back(b.size);
                found = true;
            }
        if (!found) groups.push_back({b.lambda, {b.size}});
    }
    std::vector<RawBlock> out;
    std::vector<Eigen::VectorXcd> all_cols;
    for (auto& [lambda, sizes] : groups) {
        std::sort(sizes.rbegin(), sizes.rend());
        const int mmax = sizes.front();
        const Eigen::MatrixXcd B = A - lambda * Eigen::MatrixXcd::Identity(d, d);
        std::vector<Eigen::MatrixXcd> powers(mmax + 1, Eigen::MatrixXcd::Identity(d, d));
        for (int k = 1; k <= mmax; ++k) powers[k] = powers[k - 1] * B;
        // Null spaces of B^k with the declared dimensions.
        std::vector<Eigen::MatrixXcd> kernels(mmax + 1);
        kernels[0] = Eigen::MatrixXcd(d, 0);
        for (int k = 1; k <= mmax; ++k) {
            int nk = 0;
            for (int s : sizes) nk += std::min(k, s);
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(powers[k], Eigen::ComputeFullV);
            const auto& sv = svd.singularValues();
            const double sk = std::max(1.0, sv[0]);
            if (sv[d - nk] > 1e-8 * sk)
                throw IllConditioned("jordanize: declared Jordan structure for " + fmt(lambda) +
                                     " does not match A (kernel of (A - lambda I)^" + std::to_string(k) +
                                     " is too small)");
            if (d - nk - 1 >= 0 && sv[d - nk - 1] < 1e-6 * sk)
                throw IllConditioned("jordanize: declared Jordan structure for " + fmt(lambda) +
                                     " does not match A (kernel of (A - lambda I)^" + std::to_string(k) +
                                     " is too large)");
            kernels[k] = svd.matrixV().rightCols(nk);
        }
        for (int m : sizes) {
            // Candidates: ker B^m with the ker B^{m-1} component removed.
            Eigen::MatrixXcd cand = kernels[m];
            if (kernels[m - 1].cols() > 0) {
                const Eigen::MatrixXcd Q = kernels[m - 1];
                cand -= Q * (Q.adjoint() * cand);
            }
            Eigen::JacobiSVD<Eigen::MatrixXcd> csvd(cand, Eigen::ComputeThinU);
            int rank = 0;
            while (rank < csvd.singularValues().size() && csvd.singularValues()[rank] > 1e-8) ++rank;
            const Eigen::MatrixXcd basis = csvd.matrixU().leftCols(rank);
            bool placed = false;
            for (Eigen::Index c = 0; c < basis.cols() && !placed; ++c) {
                Eigen::VectorXcd v = basis.col(c);
                // Snap to exact zeros so canonical inputs give canonical chains.
                for (Eigen::Index i = 0; i < v.size(); ++i)
                    if (std::abs(v[i]) < 1e-14) v[i] = 0.0;
                std::vector<Eigen::VectorXcd> chain(m);
                for (int j = 0; j < m; ++j) chain[j] = powers[m - 1 - j] * v;
                const cplx piv = unit_pivot(chain[0]);
                if (std::abs(piv) < 1e-10) continue;
                for (auto& c2 : chain) c2 /= piv;
                auto trial = all_cols;
                trial.insert(trial.end(), chain.begin(), chain.end());
                if (min_singular_normalized(trial, d) < 1e-6) continue;
                all_cols = trial;
                out.push_back({lambda, chain});
                placed = true;
            }
            if (!placed)
                throw IllConditioned("jordanize: could not build an independent Jordan chain of length " +
                                     std::to_string(m) + " for " + fmt(lambda));
        }
    }
    return out;
}

}  // namespace detail

inline HyperbolicSplitting jordanize(const Eigen::MatrixXcd& A, double alpha, double delta,
                                     const std::optional<std::vector<JordanDecl>>& declared = std::nullopt,
                                     const SpectralOptions& opt = {}) {
    if (A.rows() == 0 || A.rows() != A.cols()) throw ShapeError("jordanize: A must be square");
    if (!(delta > 0.0)) throw DomainError("jordanize: delta must be positive");
    const int d = static_cast<int>(A.rows());
    const double scale = detail::norm_max(A);
    check_hyperbolicity(A, alpha, opt.tol_hyp);
    auto raw = declared ? detail::declared_blocks(A, *declared, opt) : detail::diagonal_blocks(A, opt);

    std::vector<std::pair<EigenInfo, std::size_t>> order;
    for (std::size_t i = 0; i < raw.size(); ++i)
        order.push_back({detail::classify(raw[i].lambda, alpha, scale, opt.tol_hyp), i});
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return detail::order_before(a.first, b.first); });

    HyperbolicSplitting sp;
    sp.alpha = alpha;
    sp.delta = delta;
    sp.T = Eigen::MatrixXcd::Zero(d, d);
    sp.P = Eigen::MatrixXcd::Zero(d, d);
    int off = 0;
    for (const auto& [info, idx] : order) {
        const auto& rb = raw[idx];
        const int m = static_cast<int>(rb.chain.size());
        JordanBlock b{rb.lambda, m, m > 1 ? delta : 0.0, off, info.kind};
        for (int j = 0; j < m; ++j) {
            sp.T.col(off + j) = rb.chain[j];
            sp.P(off + j, off + j) = std::pow(delta, j);
        }
        if (info.kind == Stability::unstable) {
            ++sp.k;
            sp.d_u += m;
        } else {
            sp.d_s += m;
        }
        sp.blocks.push_back(b);
        off += m;
    }
    sp.S = sp.T * sp.P;
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(sp.S);
    if (!lu.isInvertible()) throw IllConditioned("jordanize: transform is singular");
    sp.S_inv = lu.inverse();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sp.T);
    const auto& sv = svd.singularValues();
    const double cond = sv[0] / sv[sv.size() - 1];
    if (!(cond <= opt.max_condition))
        throw IllConditioned("jordanize: eigenvector matrix condition number " + std::to_string(cond) +
                             " exceeds " + std::to_string(opt.max_condition));
    const double recon = detail::norm_max(sp.S_inv * A * sp.S - sp.block_matrix());
    if (recon > opt.reconstruction_tol * std::max(scale, 1e-300))
        throw IllConditioned("jordanize: reconstruction error " + std::to_string(recon) + " exceeds tolerance");
    return sp;
}

// System in the new coordinates: D^alpha y = diag(lambda) y + h(y) with
// h(y) = diag(delta_i N) y + S^{-1} f(S y).
struct TransformedSystem {
    double alpha = 0.5;
    HyperbolicSplitting split;
    std::vector<cplx> lambdas;
    PolynomialMap h_poly;

    int dim() const { return split.dim(); }
    int d_u() const { return split.d_u; }
    int d_s() const { return split.d_s; }

    template <class Vec>
    Eigen::VectorXcd h(const Vec& y) const {
        Eigen::VectorXcd out = h_poly(y);
        for (const auto& b : split.blocks)
            for (int i = 0; i + 1 < b.size; ++i) out[b.offset + i] += b.delta_i * y[b.offset + i + 1];
        return out;
    }

    double lipschitz(double r) const {
        return (split.has_nilpotent() ? split.delta : 0.0) + h_poly.lipschitz_bound(r);
    }

    // The same dynamics as a FractionalSystem: A = blockdiag(lambda I + delta N), f = h_poly.
    FractionalSystem as_system() const {
        FractionalSystem s;
        s.alpha = alpha;
        s.A = split.block_matrix();
        s.f = h_poly;
        return s;
    }
};

inline TransformedSystem transform_system(const FractionalSystem& sys, const HyperbolicSplitting& split) {
    sys.validate();
    if (split.dim() != sys.dim()) throw ShapeError("transform_system: splitting does not match the system");
    TransformedSystem ts;
    ts.alpha = sys.alpha;
    ts.split = split;
    ts.lambdas = split.coordinate_lambdas();
    ts.h_poly = sys.f.conjugate(split.S, split.S_inv, 1e-14);
    return ts;
}

inline double lipschitz_on_ball(const TransformedSystem& ts, double r) {
    if (!(r > 0.0)) throw DomainError("lipschitz_on_ball: r must be positive");
    return ts.lipschitz(r);
}

}  // namespace fracmanifold
