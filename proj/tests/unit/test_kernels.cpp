#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <fracmanifold/grid.hpp>
#include <fracmanifold/kernels.hpp>

using namespace fracmanifold;

namespace {

// int_a^b f(tau, tn - tau) dtau; the second argument keeps full precision next
// to a singular endpoint b = tn.
template <class F>
cplx integrate_singular(F&& f, double a, double b, double tn) {
    boost::math::quadrature::tanh_sinh<double> ts;
    auto part = [&](bool imag) {
        return ts.integrate(
            [&](double x, double xc) {
                const double u = (xc > 0.0 && b == tn) ? xc : tn - x;
                const cplx v = f(x, u);
                return imag ? v.imag() : v.real();
            },
            a, b);
    };
    return {part(false), part(true)};
}

}  // namespace

TEST(Kernels, RayFunctionMatchesPointwiseEvaluation) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double a : {0.5, 0.8})
        for (const cplx lam : {cplx(-2.0), cplx(2.0), cplx(-0.5, 2.0)}) {
            const RayFunction ray(a, a, lam, KernelPart::full);
            for (int i = 0; i < 50; ++i) {
                // keep exp(|lambda s|^{1/alpha}) inside double range
                const double s_max = std::pow(600.0, a) / std::abs(lam);
                const double s = std::min(s_max, std::pow(10.0, -3.0 + 4.5 * u(rng)));
                const cplx ref = ml_eval(MLParams(a, a), lam * s).value;
                EXPECT_LE(std::abs(ray(s) - ref), 1e-11 * std::max(1.0, std::abs(ref))) << a << lam << s;
            }
        }
}

TEST(Kernels, ProductWeightsIntegratePiecewiseLinearData) {
    for (double a : {0.4, 0.7})
        for (const cplx lam : {cplx(-2.0), cplx(-1.0, 1.5)}) {
            const auto t = graded_grid(3.0, 24, 1.0 / a);
            const KernelAntiderivatives F(a, lam, KernelPart::full);
            const Eigen::MatrixXcd W = product_weights(t, F);
            Eigen::VectorXcd g(t.size());
            for (std::size_t j = 0; j < t.size(); ++j) g[j] = cplx(std::cos(t[j]), 0.3 * t[j]);
            auto gl = [&](double tau) {
                std::size_t j = 0;
                while (j + 2 < t.size() && t[j + 1] < tau) ++j;
                const double w = (tau - t[j]) / (t[j + 1] - t[j]);
                return (1.0 - w) * g[j] + w * g[j + 1];
            };
            for (int n : {1, 5, 12, 24}) {
                auto K = [&](double tau, double u) {
                    return std::pow(u, a - 1.0) * ml_eval(MLParams(a, a), lam * std::pow(u, a)).value * gl(tau);
                };
                cplx ref(0.0);
                for (int j = 0; j < n; ++j) ref += integrate_singular(K, t[j], t[j + 1], t[n]);
                const cplx got = W.row(n) * g;
                EXPECT_LE(std::abs(got - ref), 1e-8 * std::max(1.0, std::abs(ref))) << a << lam << n;
            }
        }
}

TEST(Kernels, ExpLinearMomentsMatchQuadrature) {
    boost::math::quadrature::gauss_kronrod<double, 31> gk;
    for (const cplx x : {cplx(1e-3), cplx(0.05, -0.02), cplx(1.0), cplx(3.0, 4.0), cplx(40.0)}) {
        const auto m = exp_linear_moments(x);
        auto part = [&](auto fn) {
            return cplx(gk.integrate([&](double s) { return fn(s).real(); }, 0.0, 1.0),
                        gk.integrate([&](double s) { return fn(s).imag(); }, 0.0, 1.0));
        };
        const cplx a = part([&](double s) { return std::exp(-x * s) * (1.0 - s); });
        const cplx b = part([&](double s) { return std::exp(-x * s) * s; });
        EXPECT_LE(std::abs(m.first - a), 1e-13) << x;
        EXPECT_LE(std::abs(m.second - b), 1e-13) << x;
    }
}

TEST(Kernels, ExpWindowMatchesQuadratureWithTail) {
    const auto t = uniform_grid(6.0, 60);
    const cplx omega(2.0, 0.5);
    const double kappa = 0.5;
    const ExpWindow win(t, omega, kappa);
    Eigen::VectorXcd g(t.size());
    for (std::size_t j = 0; j < t.size(); ++j) g[j] = 1.0 / (1.0 + t[j]);
    const Eigen::VectorXcd B = win.apply(g);
    const double T = t.back();
    auto model = [&](double tau) -> cplx {
        if (tau >= T) return g[t.size() - 1] * std::pow(T / tau, kappa);
        const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(tau / 0.1), t.size() - 2);
        const double w = (tau - t[j]) / (t[j + 1] - t[j]);
        return (1.0 - w) * g[j] + w * g[j + 1];
    };
    boost::math::quadrature::gauss_kronrod<double, 61> gk;
    for (int n : {0, 20, 59}) {
        auto f = [&](double tau) { return std::exp(-omega * (tau - t[n])) * model(tau); };
        cplx ref(0.0);
        for (std::size_t j = n; j + 1 < t.size(); ++j)
            ref += cplx(gk.integrate([&](double s) { return f(s).real(); }, t[j], t[j + 1]),
                        gk.integrate([&](double s) { return f(s).imag(); }, t[j], t[j + 1]));
        ref += cplx(gk.integrate([&](double s) { return f(s).real(); }, T, T + 40.0),
                    gk.integrate([&](double s) { return f(s).imag(); }, T, T + 40.0));
        // The closed-form tail keeps three terms of the expansion in 1/(omega T); allow twice the fourth.
        const double dropped = std::abs(g[t.size() - 1]) * kappa * (kappa + 1.0) * (kappa + 2.0) /
                               (std::pow(std::abs(omega), 4) * T * T * T) *
                               std::abs(std::exp(-omega * (T - t[n])));
        EXPECT_LE(std::abs(B[n] - ref), 2.0 * dropped + 1e-12) << n;
    }
}
