#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "polynomial.hpp"

namespace fracmanifold {

struct JordanDecl {
    cplx lambda{};
    int size = 1;
};

// Caputo system D^alpha x = A x + f(x) with polynomial f of degree >= 2.
struct FractionalSystem {
    double alpha = 0.5;
    Eigen::MatrixXcd A;
    PolynomialMap f;
    std::optional<std::vector<JordanDecl>> jordan_blocks;

    int dim() const { return static_cast<int>(A.rows()); }

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha: must lie in (0, 1)");
        if (A.rows() == 0 || A.rows() != A.cols()) throw ValidationError("A: must be a non-empty square matrix");
        if (!A.allFinite()) throw ValidationError("A: entries must be finite");
        if (f.dim() != dim()) throw ValidationError("f: dimension does not match A");
        for (int i = 0; i < dim(); ++i)
            for (const auto& m : f.row(i)) {
                if (m.degree() < 2)
                    throw ValidationError("f: term in output " + std::to_string(i) +
                                          " has total degree < 2 (f(0) = 0 and Df(0) = 0 are required)");
                if (!std::isfinite(m.coeff.real()) || !std::isfinite(m.coeff.imag()))
                    throw ValidationError("f: coefficients must be finite");
            }
        if (jordan_blocks) {
            int total = 0;
            for (const auto& b : *jordan_blocks) {
                if (b.size < 1) throw ValidationError("jordan_blocks: sizes must be positive");
                total += b.size;
            }
            if (total != dim()) throw ValidationError("jordan_blocks: sizes must add up to the dimension");
        }
    }

    bool is_real() const {
        if (A.imag().cwiseAbs().maxCoeff() != 0.0) return false;
        for (int i = 0; i < dim(); ++i)
            for (const auto& m : f.row(i))
                if (m.coeff.imag() != 0.0) return false;
        return true;
    }
};

// Real view of a complex vector whose imaginary part must vanish to tol.
inline Eigen::VectorXd to_real_checked(const Eigen::VectorXcd& x, double tol = 1e-8) {
    const double im = x.size() ? x.imag().cwiseAbs().maxCoeff() : 0.0;
    if (im > tol)
        throw DomainError("expected a real vector, imaginary part " + std::to_string(im) + " exceeds tolerance");
    return x.real();
}

inline double max_norm(const Eigen::VectorXcd& x) { return x.size() ? x.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace fracmanifold
