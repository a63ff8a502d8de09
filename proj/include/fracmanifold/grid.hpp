#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace fracmanifold {

// t_j = T (j/N)^exponent, j = 0..N.
inline std::vector<double> graded_grid(double T, int N, double exponent) {
    if (!(T > 0.0) || N < 1 || !(exponent >= 1.0)) throw DomainError("graded_grid: need T > 0, N >= 1, exponent >= 1");
    std::vector<double> t(N + 1);
    for (int j = 0; j <= N; ++j) t[j] = T * std::pow(static_cast<double>(j) / N, exponent);
    t[N] = T;
    return t;
}

inline std::vector<double> uniform_grid(double T, int N) { return graded_grid(T, N, 1.0); }

// Piecewise-linear interpolation of row-wise samples onto new times (clamped at the ends).
inline Eigen::MatrixXcd interpolate_rows(const std::vector<double>& t, const Eigen::MatrixXcd& values,
                                         const std::vector<double>& at) {
    Eigen::MatrixXcd out(static_cast<Eigen::Index>(at.size()), values.cols());
    for (std::size_t i = 0; i < at.size(); ++i) {
        const double s = std::clamp(at[i], t.front(), t.back());
        auto it = std::upper_bound(t.begin(), t.end(), s);
        std::size_t j = it == t.begin() ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
        if (j + 1 >= t.size()) j = t.size() - 2;
        const double w = (s - t[j]) / (t[j + 1] - t[j]);
        out.row(i) = (1.0 - w) * values.row(j) + w * values.row(j + 1);
    }
    return out;
}

}  // namespace fracmanifold
