#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <queue>
#include <vector>

namespace fracmanifold {

template <class V>
struct QuadResult {
    V value{};
    double abs_error = 0.0;
    int intervals = 0;
};

namespace detail {

inline constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const std::complex<double>& v) { return std::abs(v); }

template <class V>
struct Panel {
    double a, b;
    V value;
    double error;
    double l1;
    bool operator<(const Panel& o) const { return error < o.error; }
};

// One 15-point Kronrod panel with the QUADPACK error heuristic.
template <class V, class F>
Panel<V> gk15(F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const V fc = f(c);
    V resk = fc * kWgk[7];
    V resg = fc * kWg[3];
    double resabs = kWgk[7] * magnitude(fc);
    V fv1[7], fv2[7];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * kXgk[j];
        fv1[j] = f(c - dx);
        fv2[j] = f(c + dx);
        resk += (fv1[j] + fv2[j]) * kWgk[j];
        resabs += kWgk[j] * (magnitude(fv1[j]) + magnitude(fv2[j]));
        if (j % 2 == 1) resg += (fv1[j] + fv2[j]) * kWg[j / 2];
    }
    const V mean = resk * 0.5;
    double resasc = kWgk[7] * magnitude(fc - mean);
    for (int j = 0; j < 7; ++j)
        resasc += kWgk[j] * (magnitude(fv1[j] - mean) + magnitude(fv2[j] - mean));
    const double ah = std::abs(h);
    resasc *= ah;
    resabs *= ah;
    double err = magnitude((resk - resg) * h);
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    const double eps = std::numeric_limits<double>::epsilon();
    if (resabs > std::numeric_limits<double>::min() / (5.0 * eps))
        err = std::max(err, 5.0 * eps * resabs);
    return {a, b, resk * h, err, resabs};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod over consecutive break points.
// V is double or std::complex<double>. With l1_relative the relative tolerance
// is measured against the integral of |f|, the natural floor under cancellation.
template <class V, class F>
QuadResult<V> integrate(F&& f, const std::vector<double>& points, double abs_tol, double rel_tol,
                        int max_intervals = 2000, bool l1_relative = false) {
    std::priority_queue<detail::Panel<V>> heap;
    V total{};
    double err = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        if (!(points[i + 1] > points[i])) continue;
        auto p = detail::gk15<V>(f, points[i], points[i + 1]);
        total += p.value;
        err += p.error;
        l1 += p.l1;
        heap.push(p);
    }
    int count = static_cast<int>(heap.size());
    auto target = [&] { return std::max(abs_tol, rel_tol * (l1_relative ? l1 : detail::magnitude(total))); };
    while (!heap.empty() && count < max_intervals && err > target()) {
        auto worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) break;
        auto left = detail::gk15<V>(f, worst.a, mid);
        auto right = detail::gk15<V>(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        l1 += left.l1 + right.l1 - worst.l1;
        heap.push(left);
        heap.push(right);
        ++count;
    }
    // Recompute from the panels to shed accumulated cancellation in the running sums.
    V sum{};
    double esum = 0.0;
    while (!heap.empty()) {
        sum += heap.top().value;
        esum += heap.top().error;
        heap.pop();
    }
    return {sum, esum, count};
}

template <class V, class F>
QuadResult<V> integrate(F&& f, double a, double b, double abs_tol, double rel_tol,
                        int max_intervals = 2000, bool l1_relative = false) {
    return integrate<V>(std::forward<F>(f), std::vector<double>{a, b}, abs_tol, rel_tol, max_intervals,
                        l1_relative);
}

}  // namespace fracmanifold
