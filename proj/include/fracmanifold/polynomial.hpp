#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace fracmanifold {

using cplx = std::complex<double>;

struct Monomial {
    cplx coeff{};
    std::vector<int> powers;

    int degree() const { return std::accumulate(powers.begin(), powers.end(), 0); }
};

// Polynomial map C^dim -> C^dim, stored as monomials per output coordinate.
class PolynomialMap {
public:
    PolynomialMap() = default;
    explicit PolynomialMap(int dim) : dim_(dim), rows_(dim) {}

    int dim() const { return dim_; }
    const std::vector<Monomial>& row(int i) const { return rows_.at(i); }
    bool is_zero() const {
        for (const auto& r : rows_)
            if (!r.empty()) return false;
        return true;
    }

    void add_term(int out, cplx coeff, std::vector<int> powers) {
        if (out < 0 || out >= dim_)
            throw ValidationError("polynomial term output index " + std::to_string(out) + " is out of range");
        if (static_cast<int>(powers.size()) != dim_)
            throw ValidationError("polynomial term needs " + std::to_string(dim_) + " exponents");
        for (int e : powers)
            if (e < 0) throw ValidationError("polynomial exponents must be non-negative");
        if (coeff == cplx(0.0)) return;
        for (auto& m : rows_[out])
            if (m.powers == powers) {
                m.coeff += coeff;
                return;
            }
        rows_[out].push_back({coeff, std::move(powers)});
    }

    int min_degree() const {
        int d = std::numeric_limits<int>::max();
        for (const auto& r : rows_)
            for (const auto& m : r) d = std::min(d, m.degree());
        return d;
    }

    int max_degree() const {
        int d = 0;
        for (const auto& r : rows_)
            for (const auto& m : r) d = std::max(d, m.degree());
        return d;
    }

    template <class Vec>
    Eigen::VectorXcd operator()(const Vec& x) const {
        Eigen::VectorXcd out = Eigen::VectorXcd::Zero(dim_);
        for (int i = 0; i < dim_; ++i)
            for (const auto& m : rows_[i]) {
                cplx v = m.coeff;
                for (int j = 0; j < dim_; ++j)
                    for (int e = 0; e < m.powers[j]; ++e) v *= x[j];
                out[i] += v;
            }
        return out;
    }

    // Mean-value bound on the max-norm Lipschitz constant over the ball of radius r.
    double lipschitz_bound(double r) const {
        double best = 0.0;
        for (const auto& row : rows_) {
            double s = 0.0;
            for (const auto& m : row) {
                const int deg = m.degree();
                if (deg == 0) continue;
                s += std::abs(m.coeff) * deg * std::pow(r, deg - 1);
            }
            best = std::max(best, s);
        }
        return best;
    }

    // x -> S^{-1} f(S x), expanded exactly.
    PolynomialMap conjugate(const Eigen::MatrixXcd& S, const Eigen::MatrixXcd& S_inv, double drop_tol = 0.0) const {
        using Poly = std::map<std::vector<int>, cplx>;
        auto linear = [&](int row) {
            Poly p;
            for (int l = 0; l < dim_; ++l) {
                if (S(row, l) == cplx(0.0)) continue;
                std::vector<int> e(dim_, 0);
                e[l] = 1;
                p[e] = S(row, l);
            }
            return p;
        };
        auto mul = [&](const Poly& a, const Poly& b) {
            Poly c;
            for (const auto& [ea, ca] : a)
                for (const auto& [eb, cb] : b) {
                    std::vector<int> e(dim_);
                    for (int k = 0; k < dim_; ++k) e[k] = ea[k] + eb[k];
                    c[e] += ca * cb;
                }
            return c;
        };
        std::vector<Poly> lin(dim_);
        for (int i = 0; i < dim_; ++i) lin[i] = linear(i);
        // Components of f(Sx) as polynomials in x.
        std::vector<Poly> fx(dim_);
        for (int i = 0; i < dim_; ++i)
            for (const auto& m : rows_[i]) {
                Poly term{{std::vector<int>(dim_, 0), m.coeff}};
                for (int j = 0; j < dim_; ++j)
                    for (int e = 0; e < m.powers[j]; ++e) term = mul(term, lin[j]);
                for (const auto& [e, c] : term) fx[i][e] += c;
            }
        PolynomialMap out(dim_);
        double cmax = 0.0;
        std::vector<Poly> res(dim_);
        for (int i = 0; i < dim_; ++i)
            for (int k = 0; k < dim_; ++k) {
                if (S_inv(i, k) == cplx(0.0)) continue;
                for (const auto& [e, c] : fx[k]) res[i][e] += S_inv(i, k) * c;
            }
        for (const auto& p : res)
            for (const auto& [e, c] : p) cmax = std::max(cmax, std::abs(c));
        for (int i = 0; i < dim_; ++i)
            for (const auto& [e, c] : res[i])
                if (std::abs(c) > drop_tol * cmax && c != cplx(0.0)) out.add_term(i, c, e);
        return out;
    }

private:
    int dim_ = 0;
    std::vector<std::vector<Monomial>> rows_;
};

inline double lipschitz_on_ball(const PolynomialMap& f, double r) {
    if (!(r > 0.0)) throw DomainError("lipschitz_on_ball: r must be positive");
    return f.lipschitz_bound(r);
}

}  // namespace fracmanifold
