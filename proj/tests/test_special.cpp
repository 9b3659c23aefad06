#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "dipole/special.hpp"

using namespace dipole;

namespace {

// Five-point central differences.
template <class F>
double d1(F f, double x, double e) {
    return (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * e);
}

template <class F>
double d2(F f, double x, double e) {
    return (-f(x + 2 * e) + 16 * f(x + e) - 30 * f(x) + 16 * f(x - e) - f(x - 2 * e)) / (12 * e * e);
}

// Ascending power series in long double, summed until terms vanish.
double series_j(double nu, double x) {
    long double term = std::pow(0.5L * x, static_cast<long double>(nu)) / std::tgamma(static_cast<long double>(nu) + 1.0L);
    long double sum = term;
    const long double q = -0.25L * x * x;
    for (int m = 1; m < 400; ++m) {
        term *= q / (m * (m + static_cast<long double>(nu)));
        sum += term;
        if (std::abs(term) < 1e-22L * std::abs(sum)) break;
    }
    return static_cast<double>(sum);
}

double series_j_negative(double nu, double x) {
    long double sum = 0.0L;
    for (int m = 0; m < 400; ++m) {
        const long double g = std::tgamma(static_cast<long double>(m) - nu + 1.0L);
        const long double term = (m % 2 ? -1.0L : 1.0L) * std::pow(0.5L * x, 2.0L * m - nu) / (std::tgamma(m + 1.0L) * g);
        sum += term;
        if (m > 5 && std::abs(term) < 1e-22L * std::abs(sum)) break;
    }
    return static_cast<double>(sum);
}

}  // namespace

TEST(BesselJ, ZeroOrderAtOrigin) { EXPECT_DOUBLE_EQ(bessel_j(0.0, 0.0), 1.0); }

TEST(BesselJ, SmallArgumentLeadingBehavior) {
    const double nu = 2.0 / 3.0;
    for (double x : {1e-3, 1e-2, 0.05}) {
        const double lead = std::pow(x, nu) / (std::pow(2.0, nu) * std::tgamma(nu + 1.0));
        EXPECT_NEAR(bessel_j(nu, x) / lead, 1.0, x * x);
    }
}

TEST(BesselJ, HalfOrderClosedForm) {
    EXPECT_NEAR(bessel_j(0.5, 2.0), std::sqrt(2.0 / (std::numbers::pi * 2.0)) * std::sin(2.0), 1e-14);
    for (double x : {0.1, 1.0, 7.5, 45.0, 120.0, 999.0})
        EXPECT_NEAR(bessel_j(0.5, x), std::sqrt(2.0 / (std::numbers::pi * x)) * std::sin(x), 1e-12) << x;
}

TEST(BesselJ, MatchesSeriesOracle) {
    for (double nu : {0.0, 1.0 / 3.0, 2.0 / 3.0, 5.0 / 8.0, 1.7, 6.25, 20.0})
        for (double x : {0.01, 0.5, 2.0, 6.0, 12.0}) EXPECT_NEAR(bessel_j(nu, x), series_j(nu, x), 1e-10) << nu << " " << x;
}

TEST(BesselJ, LargeArgumentBranchAgreesWithLibrary) {
    for (double nu : {2.0 / 3.0, 5.0 / 8.0, 3.3, 11.5, 20.0})
        for (double x : {45.0, 80.0, 333.3, 1000.0})
            EXPECT_NEAR(bessel_j(nu, x), std::cyl_bessel_j(nu, x), 1e-10) << nu << " " << x;
}

TEST(BesselJ, ContinuousAcrossBranchThreshold) {
    for (double nu : {2.0 / 3.0, 7.2}) {
        const double x0 = std::max(40.0, 1.2 * nu * nu);
        EXPECT_NEAR(bessel_j(nu, x0 * (1 - 1e-14)), bessel_j(nu, x0 * (1 + 1e-14)), 1e-12);
        EXPECT_NEAR(bessel_y(nu, x0 * (1 - 1e-14)), bessel_y(nu, x0 * (1 + 1e-14)), 1e-12);
    }
}

TEST(BesselJ, RejectsNonFinite) {
    EXPECT_THROW(bessel_j(NAN, 1.0), std::domain_error);
    EXPECT_THROW(bessel_j(0.5, INFINITY), std::domain_error);
}

TEST(BesselJNegative, HalfOrderClosedForm) {
    // sqrt(2 / (pi x)) cos(x) at x = pi
    EXPECT_NEAR(bessel_j_negative(0.5, std::numbers::pi), -std::sqrt(2.0) / std::numbers::pi, 1e-13);
    for (double x : {0.2, 1.5, 3.0, 17.0})
        EXPECT_NEAR(bessel_j_negative(0.5, x), std::sqrt(2.0 / (std::numbers::pi * x)) * std::cos(x), 1e-12);
}

TEST(BesselJNegative, SeriesOracle) {
    EXPECT_NEAR(bessel_j_negative(1.0 / 3.0, 1.0), series_j_negative(1.0 / 3.0, 1.0), 1e-12);
    for (double nu : {2.0 / 3.0, 5.0 / 8.0, 1.2})
        for (double x : {0.3, 1.9, 2.1, 8.0})
            EXPECT_NEAR(bessel_j_negative(nu, x), series_j_negative(nu, x), 1e-10) << nu << " " << x;
}

TEST(BesselJNegative, DivergesAtOrigin) {
    const double nu = 2.0 / 3.0;
    const double a = bessel_j_negative(nu, 1e-4) * std::pow(1e-4, nu), b = bessel_j_negative(nu, 1e-6) * std::pow(1e-6, nu);
    EXPECT_NEAR(a, b, 1e-6);
    EXPECT_NEAR(b, std::pow(2.0, nu) / std::tgamma(1.0 - nu), 1e-6);
}

TEST(BesselJNegative, IntegerOrderRejected) { EXPECT_THROW(bessel_j_negative(2.0, 1.0), std::domain_error); }

TEST(BesselProperties, Wronskian) {
    for (double nu : {1.0 / 3.0, 2.0 / 3.0, 5.0 / 8.0}) {
        auto j = [nu](double x) { return bessel_j(nu, x); };
        auto jn = [nu](double x) { return bessel_j_negative(nu, x); };
        for (double x = 0.1; x <= 50.0; x *= 1.37) {
            const double e = 1e-3 * std::min(1.0, x);
            const double w = j(x) * d1(jn, x, e) - d1(j, x, e) * jn(x);
            EXPECT_NEAR(w, -2.0 * std::sin(nu * std::numbers::pi) / (std::numbers::pi * x), 1e-8) << nu << " " << x;
        }
    }
}

TEST(BesselProperties, OdeResidual) {
    for (double nu : {0.0, 2.0 / 3.0, 5.0 / 8.0, 4.5}) {
        auto j = [nu](double x) { return bessel_j(nu, x); };
        for (double x = 0.05; x < 50.0; x *= 1.3) {
            const double e = std::min(1e-2, 0.1 * x), f = j(x);
            EXPECT_LT(std::abs(x * x * d2(j, x, e) + x * d1(j, x, e) + (x * x - nu * nu) * f), 1e-6 * (1 + std::abs(f)))
                << nu << " " << x;
        }
    }
}

TEST(BesselDerivative, MatchesFiniteDifference) {
    for (double nu : {2.0 / 3.0, 5.0 / 8.0})
        for (double x : {0.4, 3.0, 60.0}) {
            const double fd = (bessel_j(nu, x + 1e-6) - bessel_j(nu, x - 1e-6)) / 2e-6;
            EXPECT_NEAR(bessel_j_derivative(nu, x), fd, 1e-7);
        }
}

TEST(Legendre, Examples) {
    EXPECT_DOUBLE_EQ(legendre_p(0, 0.3), 1.0);
    EXPECT_DOUBLE_EQ(legendre_p(1, -0.7), -0.7);
    // Bonnet: (l+1) P_{l+1} = (2l+1) x P_l - l P_{l-1}, unrolled by hand.
    const double x = 0.3;
    const double p2 = 0.5 * (3 * x * x - 1), p3 = (5 * x * p2 - 2 * x) / 3, p4 = (7 * x * p3 - 3 * p2) / 4;
    EXPECT_NEAR(legendre_p(5, x), (9 * x * p4 - 4 * p3) / 5, 1e-15);
    for (int l = 0; l < 30; ++l) EXPECT_NEAR(legendre_p(l, 1.0), 1.0, 1e-13);
    EXPECT_THROW(legendre_p(2, 1.5), std::domain_error);
}

TEST(Legendre, Orthogonality) {
    std::vector<double> x, w;
    gauss_legendre(40, x, w);
    for (int l = 0; l <= 10; ++l)
        for (int m = 0; m <= 10; ++m) {
            double s = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * legendre_p(l, x[i]) * legendre_p(m, x[i]);
            EXPECT_NEAR(s, l == m ? 2.0 / (2 * l + 1) : 0.0, 1e-8);
        }
}

TEST(Quadrature, GridInvariants) {
    const auto g = make_k_grid();
    EXPECT_EQ(g.size(), 2048u);
    EXPECT_DOUBLE_EQ(g.k_max, 60.0);
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        s += g.weights[i];
        EXPECT_GE(g.nodes[i], 0.0);
        EXPECT_LE(g.nodes[i], 60.0);
        if (i) {
            EXPECT_GT(g.nodes[i], g.nodes[i - 1]);
        }
    }
    EXPECT_NEAR(s, 60.0, 1e-10);
}

TEST(Quadrature, GradedGridInvariants) {
    const auto g = make_graded_k_grid(60.0, 2048, 16, 1.0, 60, 0.7);
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        s += g.weights[i];
        if (i) {
            EXPECT_GT(g.nodes[i], g.nodes[i - 1]);
        }
    }
    EXPECT_NEAR(s, 60.0, 1e-10);
    EXPECT_LT(g.nodes.front(), 1e-9);
}

TEST(IntegrateK, Examples) {
    const auto g = make_k_grid();
    EXPECT_NEAR(integrate_k([](double) { return 1.0; }, g), 60.0, 1e-8);
    EXPECT_NEAR(integrate_k([](double k) { return k * std::exp(-0.5 * k * k); }, g), 1.0, 1e-6);
}

TEST(IntegrateK, BesselSquareAgainstRichardsonTrapezoid) {
    auto f = [](double k) {
        const double j = bessel_j(2.0 / 3.0, k / 3.0);
        return j * j * k;
    };
    auto trap = [&](int n) {
        const double h = 60.0 / n;
        double s = 0.5 * (f(0.0) + f(60.0));
        for (int i = 1; i < n; ++i) s += f(i * h);
        return s * h;
    };
    const double t1 = trap(40000), t2 = trap(80000);
    const double oracle = t2 + (t2 - t1) / 3.0;
    EXPECT_NEAR(integrate_k(f, make_k_grid()), oracle, 1e-7 * std::abs(oracle));
}

TEST(Refine, DoublesPanels) {
    const auto g = make_k_grid(60.0, 256, 16);
    const auto r = refine(g);
    EXPECT_EQ(r.size(), 2 * g.size());
    EXPECT_NEAR(integrate_k([](double k) { return std::cos(k); }, r), std::sin(60.0), 1e-12);
}

TEST(Hankel, SpikeSifting) {
    const double x0 = 1.3, w = 0.002, nu = 2.0 / 3.0;
    const auto xg = composite_gauss(0.0, 3.0, 1500, 16);
    std::vector<double> f;
    for (double x : xg.nodes) f.push_back(std::exp(-0.5 * std::pow((x - x0) / w, 2)) / (w * std::sqrt(2 * std::numbers::pi)));
    const auto kg = make_k_grid(20.0, 256, 16);
    const auto h = hankel_transform(f, nu, xg, kg);
    for (std::size_t i = 0; i < kg.size(); i += 17)
        EXPECT_NEAR(h.values[i], x0 * bessel_j(nu, kg.nodes[i] * x0), 3e-3) << kg.nodes[i];
}

TEST(Hankel, GaussianClosedForm) {
    // int_0^inf x e^{-x^2} J_0(k x) dx = e^{-k^2/4} / 2
    const auto xg = composite_gauss(0.0, 8.0, 64, 16);
    std::vector<double> f;
    for (double x : xg.nodes) f.push_back(std::exp(-x * x));
    const auto kg = make_k_grid(12.0, 128, 16);
    const auto h = hankel_transform(f, 0.0, xg, kg);
    EXPECT_TRUE(h.decay_ok);
    for (std::size_t i = 0; i < kg.size(); ++i) EXPECT_NEAR(h.values[i], 0.5 * std::exp(-0.25 * kg.nodes[i] * kg.nodes[i]), 1e-12);
}

TEST(Hankel, RoundTrip) {
    for (double nu : {2.0 / 3.0, 5.0 / 8.0}) {
        const auto xg = composite_gauss(0.0, 10.0, 80, 16);
        std::vector<double> f;
        for (double x : xg.nodes) f.push_back(std::pow(x, nu) * std::exp(-std::pow(x - 2.0, 2)));
        const auto kg = make_k_grid(40.0, 512, 16);
        const auto fk = hankel_transform(f, nu, xg, kg);
        const auto back = hankel_transform(fk.values, nu, kg, xg);
        double err = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < xg.size(); ++i) {
            err += xg.weights[i] * std::pow(back.values[i] - f[i], 2);
            norm += xg.weights[i] * f[i] * f[i];
        }
        EXPECT_LT(std::sqrt(err / norm), 1e-3) << nu;
    }
}

TEST(Hankel, FlagsMissingDecay) {
    const auto xg = composite_gauss(0.0, 1.0, 4, 16);
    std::vector<double> f(xg.size(), 1.0);
    EXPECT_FALSE(hankel_transform(f, 0.5, xg, make_k_grid(5.0, 32, 16)).decay_ok);
}
