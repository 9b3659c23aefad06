#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "dipole/spectral.hpp"

namespace dipole {

struct ProbabilitySeries {
    std::vector<double> times;  // uniform, starting at 0
    std::vector<double> N;
    std::vector<double> Ndot;

    double step() const {
        if (times.size() < 2) throw std::logic_error("probability series needs at least two times");
        return times[1] - times[0];
    }
};

// int r^{D-1} dr int dw P(r, w, t) by the given radial and angular rules.
inline double total_probability(const BatchEvaluator& P, double t, int D, const QuadratureGrid& radial,
                                const AngularGrid& angular) {
    const double tt[1] = {t};
    double s = 0.0;
    for (std::size_t i = 0; i < radial.size(); ++i) {
        const double r = radial.nodes[i];
        const auto v = P(r, angular.nodes, tt);
        double a = 0.0;
        for (std::size_t j = 0; j < angular.nodes.size(); ++j) a += angular.weights[j] * v[j];
        s += radial.weights[i] * std::pow(r, D - 1.0) * a;
    }
    return s;
}

// As above, raising ConvergenceError when halving the radial panels moves the result by more than 1e-3.
inline double total_probability_checked(const BatchEvaluator& P, double t, int D, const QuadratureGrid& radial,
                                        const AngularGrid& angular) {
    const double a = total_probability(P, t, D, radial, angular);
    const double b = total_probability(P, t, D, refine(radial), angular);
    if (std::abs(a - b) > 1e-3) throw ConvergenceError("total probability: radial quadrature not converged");
    return a;
}

// Total probability of the unit-source Green's function without a k cutoff. The radial
// integral is done in closed form (Weber), leaving
//   N(t) = c^{1+al} 2^al / (Gamma(nu) (D-1)^2 (D+1)^2) int_0^inf k^{-al} e^{-h k^2 t/2} J_nu(k/c) dk,
// al = D / (2(D+1)), c = D^2 - 1, nu = (1 + D/2)/(D+1). Pass k_max to truncate the k-integral.
// The integrand behaves as k^{nu - al} at the origin, so panels are graded toward k = 0.
inline double survival_probability(int D, double h, double t, double k_max = 0.0, int nodes = 4096) {
    if (t < 0.0) throw std::domain_error("survival_probability needs t >= 0");
    if (t == 0.0 && k_max <= 0.0) return 1.0;
    const double c = bessel_scale(D), al = D / (2.0 * (D + 1.0)), nu = order_nu(D, 0.0);
    const double top = k_max > 0.0 ? k_max : std::sqrt(160.0 / (h * t));
    const auto g = make_graded_k_grid(top, nodes, 16, std::min(1.0, 0.5 * top), 40, 0.5);
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double k = g.nodes[i];
        s += g.weights[i] * std::pow(k, -al) * std::exp(-0.5 * h * k * k * t) * bessel_j(nu, k / c);
    }
    return std::pow(c, 1.0 + al) * std::pow(2.0, al) / (std::tgamma(nu) * std::pow((D - 1.0) * (D + 1.0), 2)) * s;
}

inline std::vector<double> uniform_times(double step, double t_end) {
    if (!(step > 0.0) || !(t_end >= 0.0)) throw std::invalid_argument("uniform_times needs step > 0");
    std::vector<double> t;
    const auto n = static_cast<std::size_t>(std::llround(t_end / step));
    for (std::size_t i = 0; i <= n; ++i) t.push_back(i * step);
    if (t.back() < t_end - 1e-12 * t_end) t.push_back((n + 1) * step);
    return t;
}

// N on a uniform grid with Ndot by central differences (one-sided at the ends).
inline ProbabilitySeries probability_series(std::span<const double> times, std::span<const double> N) {
    if (times.size() != N.size() || times.size() < 2) throw std::invalid_argument("probability_series: bad input");
    ProbabilitySeries s{{times.begin(), times.end()}, {N.begin(), N.end()}, std::vector<double>(N.size())};
    const double dt = times[1] - times[0];
    for (std::size_t i = 1; i < times.size(); ++i)
        if (std::abs(times[i] - times[i - 1] - dt) > 1e-9 * dt) throw std::invalid_argument("probability_series needs a uniform grid");
    const std::size_t n = N.size();
    s.Ndot[0] = (N[1] - N[0]) / dt;
    s.Ndot[n - 1] = (N[n - 1] - N[n - 2]) / dt;
    for (std::size_t i = 1; i + 1 < n; ++i) s.Ndot[i] = (N[i + 1] - N[i - 1]) / (2.0 * dt);
    return s;
}

template <class NFunc>
ProbabilitySeries probability_series_from(std::span<const double> times, NFunc&& total, unsigned threads = 1) {
    std::vector<double> N(times.size());
    parallel_for(times.size(), threads, [&](std::size_t i) { N[i] = total(times[i]); });
    return probability_series(times, N);
}

inline ProbabilitySeries survival_series(int D, double h, std::span<const double> times, unsigned threads = 1) {
    return probability_series_from(times, [&](double t) { return survival_probability(D, h, t); }, threads);
}

inline double trapezoid(std::span<const double> f, double dt) {
    if (f.size() < 2) return 0.0;
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
    return s * dt;
}

// (a * M)(t_i) = int_0^{t_i} a(t1) M(t_i - t1) dt1 by the trapezoid rule.
inline std::vector<double> convolve(std::span<const double> a, std::span<const double> M, double dt) {
    std::vector<double> out(M.size(), 0.0), buf;
    for (std::size_t i = 1; i < M.size(); ++i) {
        buf.resize(i + 1);
        for (std::size_t j = 0; j <= i; ++j) buf[j] = a[j] * M[i - j];
        out[i] = trapezoid(buf, dt);
    }
    return out;
}

enum class Modification { None, FirstOrder, SecondOrder, ThirdOrder, Volterra };

// Recovered density on the series grid given the plain density M(t_i) at one point (or any linear
// functional of it). Neumann orders follow P~ = P - Ndot * P~; Volterra solves it by trapezoid
// back-substitution.
inline std::vector<double> modify_series(std::span<const double> M, const ProbabilitySeries& s, Modification order) {
    if (M.size() > s.times.size()) throw std::range_error("modification needs the probability series to cover every time");
    const double dt = s.step();
    std::span<const double> nd(s.Ndot.data(), M.size());
    std::vector<double> out(M.begin(), M.end());
    switch (order) {
        case Modification::None: return out;
        case Modification::Volterra: {
            for (std::size_t i = 1; i < M.size(); ++i) {
                double acc = 0.5 * nd[i] * out[0];
                for (std::size_t j = 1; j < i; ++j) acc += nd[j] * out[i - j];
                out[i] = (M[i] - dt * acc) / (1.0 + 0.5 * dt * nd[0]);
            }
            return out;
        }
        default: {
            std::vector<double> term(M.begin(), M.end());
            const int top = order == Modification::FirstOrder ? 1 : order == Modification::SecondOrder ? 2 : 3;
            double sign = 1.0;
            for (int k = 1; k <= top; ++k) {
                term = convolve(nd, term, dt);
                sign = -sign;
                for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * term[i];
            }
            return out;
        }
    }
}

// P~(r, w, t) at one point, from plain densities evaluated on the series grid up to t.
inline double modified_density(const BatchEvaluator& P, const ProbabilitySeries& s, double t, double r, double angle,
                               Modification order = Modification::SecondOrder) {
    const double dt = s.step();
    const double idx = t / dt;
    const auto n = static_cast<std::size_t>(std::llround(idx));
    if (std::abs(idx - n) > 1e-9 || n >= s.times.size()) throw std::range_error("t must be a node of the probability series");
    std::span<const double> times(s.times.data(), n + 1);
    const double a[1] = {angle};
    const auto M = P(r, a, times);
    return modify_series(M, s, order).back();
}

// Recovered field on radial x angular x times (row-major), times a prefix of the series grid.
inline std::vector<double> modified_field(const BatchEvaluator& P, const ProbabilitySeries& s,
                                          std::span<const double> radii, std::span<const double> angles,
                                          std::size_t time_count, Modification order = Modification::SecondOrder,
                                          unsigned threads = 1) {
    if (time_count > s.times.size()) throw std::range_error("time_count exceeds the probability series");
    std::span<const double> times(s.times.data(), time_count);
    const std::size_t na = angles.size();
    std::vector<double> out(radii.size() * na * time_count);
    parallel_for(radii.size(), threads, [&](std::size_t i) {
        const auto v = P(radii[i], angles, times);
        for (std::size_t a = 0; a < na; ++a) {
            const auto m = modify_series(std::span<const double>(v.data() + a * time_count, time_count), s, order);
            std::copy(m.begin(), m.end(), out.begin() + (i * na + a) * time_count);
        }
    });
    return out;
}

}  // namespace dipole
