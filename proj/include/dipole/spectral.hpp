#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <utility>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dipole/parallel.hpp"
#include "dipole/sde.hpp"
#include "dipole/special.hpp"

namespace dipole {

class ConvergenceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class SingularModeError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

// Spherical: angular average over a normalized sphere measure, any D.
// Planar: D = 2 with polar angle theta in (-pi, pi].
// Axial: D = 3 with polar angle theta in [0, pi], no azimuthal dependence.
enum class Geometry { Spherical, Planar, Axial };

inline int geometry_dimension(Geometry g, int D) {
    if (g == Geometry::Planar) return 2;
    if (g == Geometry::Axial) return 3;
    return D;
}

inline const char* geometry_name(Geometry g) {
    switch (g) {
        case Geometry::Spherical: return "spherical";
        case Geometry::Planar: return "planar";
        default: return "axial";
    }
}

inline constexpr double default_t_min = 1.0 / 4096.0;

struct AngularMode {
    int D = 2;
    int label = 0;
    double b_sq = 0.0;
    double nu = 0.0;
};

inline double order_nu(int D, double b_sq) {
    if (D < 2) throw std::invalid_argument("order_nu needs D >= 2");
    if (b_sq < 0.0) throw std::invalid_argument("order_nu needs b_sq >= 0");
    const double a = (2.0 + D) * (D - 1.0);
    return std::sqrt(4.0 * b_sq + a * a) / (2.0 * (D * D - 1.0));
}

inline AngularMode make_mode(Geometry g, int D, int label) {
    switch (g) {
        case Geometry::Spherical: return {D, 0, 0.0, order_nu(D, 0.0)};
        case Geometry::Planar: return {2, label, double(label) * label, order_nu(2, double(label) * label)};
        default: return {3, label, double(label) * (label + 1), order_nu(3, double(label) * (label + 1))};
    }
}

// Bessel argument scale: zeta = k r^{D+1} / (D^2 - 1).
inline double bessel_scale(int D) { return D * D - 1.0; }

inline double radial_eigenfunction(int D, double nu, double k, double r) {
    if (r < 0.0 || k < 0.0) throw std::domain_error("radial_eigenfunction needs r, k >= 0");
    if (r == 0.0) return 0.0;
    return std::pow(r, 1.0 + 0.5 * D) * bessel_j(nu, k * std::pow(r, D + 1.0) / bessel_scale(D));
}

// Exponent of r^{-D-1} dR/dr as r -> 0 for a mode with eigenvalue b_sq.
inline double flux_exponent_at_origin(int D, double b_sq) {
    const double a = 1.0 + 0.5 * D, b = std::sqrt(b_sq) / (D - 1.0);
    return std::sqrt(b * b + a * a) - a;
}

inline double green_prefactor(int D) { return 1.0 / ((D - 1.0) * (D - 1.0) * (D + 1.0)); }

// Angular weight of a mode. Planar modes +-n are paired into cosines.
inline double angular_basis(Geometry g, int label, double angle) {
    switch (g) {
        case Geometry::Spherical: return 1.0;
        case Geometry::Planar:
            return label == 0 ? 0.5 / std::numbers::pi : std::cos(label * angle) / std::numbers::pi;
        default: return (2.0 * label + 1.0) / (4.0 * std::numbers::pi) * legendre_p(label, std::cos(angle));
    }
}

enum class EpsilonRule { Exact, LeadingOrder };

// A mode expansion of a Fokker-Planck solution:
//   P(r, w, t) = pref r^{1+D/2} sum_m Y_m(w) int k dk rho_m(k) e^{-h k^2 t/2} C_m(k, r)
// with C_m = J_nu(zeta), or cos(phi) J_nu + sin(phi) J_{-nu} under a cutoff boundary.
// Quadrature weights multiply rho.
struct SpectralField {
    DipoleParams params;
    Geometry geometry = Geometry::Spherical;
    QuadratureGrid grid;
    std::vector<AngularMode> modes;
    std::vector<std::vector<double>> rho;
    std::vector<std::vector<double>> mix_j, mix_jneg;  // cos(phi), sin(phi); empty unless a cutoff is present
    std::optional<double> epsilon;
    EpsilonRule epsilon_rule = EpsilonRule::Exact;
    std::vector<int> excluded_modes;
    double t_min = default_t_min;

    int D() const { return params.D; }

    double r_min() const { return epsilon.value_or(0.0); }

    bool mixed(std::size_t m) const { return !mix_j.empty() && !mix_j[m].empty(); }

    // C(k_i, r) at s = r^{D+1}/c.
    double branch(std::size_t m, std::size_t i, double s) const {
        const double x = grid.nodes[i] * s, nu = modes[m].nu;
        if (!mixed(m)) return bessel_j(nu, x);
        const double a = mix_j[m][i], b = mix_jneg[m][i];
        return a * bessel_j(nu, x) + (b != 0.0 ? b * bessel_j_negative(nu, x) : 0.0);
    }

    // w_i k_i rho_i C(k_i, r), one entry per node.
    std::vector<double> mode_row(std::size_t m, double r) const {
        const std::size_t n = grid.size();
        std::vector<double> row(n, 0.0);
        if (r <= 0.0) return row;
        const double s = std::pow(r, D() + 1.0) / bessel_scale(D());
        for (std::size_t i = 0; i < n; ++i) row[i] = grid.weights[i] * grid.nodes[i] * rho[m][i] * branch(m, i, s);
        return row;
    }

    std::vector<double> decay(double t) const {
        std::vector<double> e(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) e[i] = std::exp(-0.5 * params.h * grid.nodes[i] * grid.nodes[i] * t);
        return e;
    }

    double radial_factor(double r) const { return green_prefactor(D()) * std::pow(r, 1.0 + 0.5 * D()); }

    void check_time(double t) const {
        if (!(t >= t_min))
            throw std::domain_error("time " + std::to_string(t) + " below the resolvable floor " + std::to_string(t_min));
    }

    void check_radius(double r) const {
        if (!(r >= r_min())) throw std::domain_error("radius below the cutoff boundary");
    }

    // Radial mode profiles p_m(r, t) at every time (row-major modes x times), no time floor.
    std::vector<double> mode_profiles(double r, std::span<const double> times) const {
        std::vector<double> out(modes.size() * times.size(), 0.0);
        const double f = radial_factor(r);
        std::vector<std::vector<double>> dec;
        dec.reserve(times.size());
        for (double t : times) dec.push_back(decay(t));
        for (std::size_t m = 0; m < modes.size(); ++m) {
            const auto row = mode_row(m, r);
            for (std::size_t j = 0; j < times.size(); ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < row.size(); ++i) s += row[i] * dec[j][i];
                out[m * times.size() + j] = f * s;
            }
        }
        return out;
    }

    // Values on angles x times (row-major), sharing one set of Bessel rows.
    std::vector<double> values(double r, std::span<const double> angles, std::span<const double> times,
                               bool enforce_floor = true) const {
        if (enforce_floor)
            for (double t : times) check_time(t);
        check_radius(r);
        const auto prof = mode_profiles(r, times);
        std::vector<double> out(angles.size() * times.size(), 0.0);
        for (std::size_t a = 0; a < angles.size(); ++a)
            for (std::size_t m = 0; m < modes.size(); ++m) {
                const double y = angular_basis(geometry, modes[m].label, angles[a]);
                for (std::size_t j = 0; j < times.size(); ++j) out[a * times.size() + j] += y * prof[m * times.size() + j];
            }
        return out;
    }

    double value(double r, double angle, double t) const {
        const double a[1] = {angle}, tt[1] = {t};
        return values(r, a, tt)[0];
    }
};

namespace detail {

inline void fill_point_source(SpectralField& f, double r0) {
    const int D = f.D();
    const double s0 = std::pow(r0, D + 1.0) / bessel_scale(D), amp = std::pow(r0, 1.0 + 0.5 * D);
    f.rho.assign(f.modes.size(), std::vector<double>(f.grid.size()));
    for (std::size_t m = 0; m < f.modes.size(); ++m)
        for (std::size_t i = 0; i < f.grid.size(); ++i) f.rho[m][i] = amp * bessel_j(f.modes[m].nu, f.grid.nodes[i] * s0);
}

inline std::vector<AngularMode> mode_list(Geometry g, int D, int mode_max) {
    if (g != Geometry::Spherical && mode_max < 0) throw std::invalid_argument("mode_max must be >= 0");
    std::vector<AngularMode> modes;
    const int top = g == Geometry::Spherical ? 0 : mode_max;
    for (int m = 0; m <= top; ++m) modes.push_back(make_mode(g, D, m));
    return modes;
}

}  // namespace detail

// Green's function of a point source at radius r0 (angle 0 for angular geometries).
inline SpectralField make_green(const DipoleParams& p, Geometry g, const QuadratureGrid& grid, int mode_max = 50,
                                double r0 = 1.0) {
    p.validate();
    if (!(r0 > 0.0)) throw std::invalid_argument("source radius must be positive");
    SpectralField f;
    f.params = p;
    f.params.D = geometry_dimension(g, p.D);
    f.geometry = g;
    f.grid = grid;
    f.modes = detail::mode_list(g, f.params.D, mode_max);
    detail::fill_point_source(f, r0);
    return f;
}

inline SpectralField make_green_spherical(const DipoleParams& p, const QuadratureGrid& grid, double r0 = 1.0) {
    return make_green(p, Geometry::Spherical, grid, 0, r0);
}

inline SpectralField make_green_2d(const DipoleParams& p, const QuadratureGrid& grid, int n_max = 50) {
    if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
    return make_green(p, Geometry::Planar, grid, n_max);
}

inline SpectralField make_green_3d(const DipoleParams& p, const QuadratureGrid& grid, int l_max = 50) {
    if (l_max < 1) throw std::invalid_argument("l_max must be >= 1");
    return make_green(p, Geometry::Axial, grid, l_max);
}

// Point evaluation that also halves the panel width and flags a change above 1e-3 max(1, |value|).
inline double green_spherical(const DipoleParams& p, double r, double t, const QuadratureGrid& grid) {
    const double v = make_green_spherical(p, grid).value(r, 0.0, t);
    const double v2 = make_green_spherical(p, refine(grid)).value(r, 0.0, t);
    if (std::abs(v2 - v) > 1e-3 * std::max(1.0, std::abs(v)))
        throw ConvergenceError("green_spherical: quadrature not converged at r=" + std::to_string(r));
    return v;
}

namespace detail {

inline double angular_green_checked(Geometry g, double r, double angle, double t, const DipoleParams& p,
                                    const QuadratureGrid& grid, int mode_max) {
    if (mode_max < 1) throw std::invalid_argument("mode_max must be >= 1");
    const auto f = make_green(p, g, grid, mode_max + 10);
    const double tt[1] = {t};
    f.check_time(t);
    const auto prof = f.mode_profiles(r, tt);
    double v = 0.0, tail = 0.0;
    for (std::size_t m = 0; m < f.modes.size(); ++m) {
        const double c = angular_basis(g, f.modes[m].label, angle) * prof[m];
        (static_cast<int>(m) <= mode_max ? v : tail) += c;
    }
    if (std::abs(tail) > 1e-3 * std::max(1.0, std::abs(v)))
        throw ConvergenceError("angular mode sum not converged at r=" + std::to_string(r));
    return v;
}

}  // namespace detail

inline double green_2d(double r, double theta, double t, const DipoleParams& p, const QuadratureGrid& grid,
                       int n_max = 50) {
    if (!(theta > -std::numbers::pi - 1e-12 && theta <= std::numbers::pi + 1e-12))
        throw std::domain_error("green_2d needs theta in (-pi, pi]");
    return detail::angular_green_checked(Geometry::Planar, r, theta, t, p, grid, n_max);
}

inline double green_3d(double r, double theta, double t, const DipoleParams& p, const QuadratureGrid& grid,
                       int l_max = 50) {
    if (!(theta >= -1e-12 && theta <= std::numbers::pi + 1e-12)) throw std::domain_error("green_3d needs theta in [0, pi]");
    return detail::angular_green_checked(Geometry::Axial, r, theta, t, p, grid, l_max);
}

// Time at which the r0 = 1 Green's function matches a source at r0 after rescaling lengths by r0.
inline double rescale_time(int D, double r0, double t) {
    if (!(r0 > 0.0)) throw std::domain_error("rescale_time needs r0 > 0");
    return std::pow(r0, 2.0 * (D + 1)) * t;
}

// Closed-form spherically symmetric solution C t^{-D/(2D+2)} exp(-r^{2D+2} / (a t)),
// a = K (2D+2)^2 with K = (h/2)(D-1)^2, normalized against r^{D-1} dr.
inline double op_exact_solution(const DipoleParams& p, double r, double t) {
    if (!(t > 0.0)) throw std::domain_error("op_exact_solution needs t > 0");
    const double D = p.D, m = 2.0 * D + 2.0, q = D / m;
    const double a = 0.5 * p.h * (D - 1.0) * (D - 1.0) * m * m;
    const double c = m / (std::pow(a, q) * std::tgamma(q));
    return c * std::pow(t, -q) * std::exp(-std::pow(r, m) / (a * t));
}

// ---- reflecting boundary at r = epsilon ----

// Leading small-argument ratio c_-/c_+ for a reflecting boundary.
inline double epsilon_cutoff_ratio(int D, const AngularMode& mode, double k, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::domain_error("epsilon must lie in (0, 1)");
    if (D == 2) {
        const double d = std::sqrt(mode.b_sq + 4.0);
        if (std::abs(d - 2.0) < 1e-12) throw SingularModeError("cutoff ratio singular for the n = 0 mode");
        const double a = std::pow(6.0, -2.0 * d / 3.0) * (d + 2.0) * std::pow(k, 2.0 * d / 3.0) * std::tgamma(1.0 - d / 3.0) /
                         ((d - 2.0) * std::tgamma(d / 3.0 + 1.0));
        if (!std::isfinite(a)) throw SingularModeError("cutoff ratio hits a gamma pole");
        return a * std::pow(epsilon, 2.0 * d);
    }
    if (D == 3) {
        const double d = std::sqrt(mode.b_sq + 25.0);
        if (std::abs(d - 5.0) < 1e-12) throw SingularModeError("cutoff ratio singular for the l = 0 mode");
        if (is_integer_order(d / 8.0)) throw SingularModeError("cutoff ratio hits a gamma pole");
        const double a = -std::pow(2.0, -d) * (d + 5.0) * std::pow(k, d / 4.0) * std::tgamma(-d / 8.0) /
                         ((d - 5.0) * std::tgamma(d / 8.0));
        return a * std::pow(epsilon, d);
    }
    throw std::domain_error("epsilon_cutoff_ratio supports D = 2 and D = 3");
}

namespace detail {

// Boundary combinations a J_{+-nu}(z) + B z J'_{+-nu}(z), a = 1 + D/2, B = D + 1, as (plus, minus).
// Below z = 2 they are summed termwise; the leading minus coefficient a - B nu = -b^2 / ((D-1)^2 (a + B nu))
// is formed exactly so the b = 0 mode cancels cleanly.
inline std::pair<double, double> reflecting_terms(int D, const AngularMode& mode, double z) {
    const double a = 1.0 + 0.5 * D, B = D + 1.0, nu = mode.nu;
    if (z >= 2.0) {
        return {a * bessel_j(nu, z) + B * z * bessel_j_derivative(nu, z),
                a * bessel_j_negative(nu, z) + B * z * bessel_j_derivative(-nu, z)};
    }
    const double h = 0.5 * z, h2 = h * h;
    double tp = std::pow(h, nu) / std::tgamma(1.0 + nu), tm = std::pow(h, -nu) / std::tgamma(1.0 - nu);
    double plus = tp * (a + B * nu);
    double minus = tm * (-mode.b_sq / ((D - 1.0) * (D - 1.0) * (a + B * nu)));
    for (int m = 1; m < 200; ++m) {
        tp *= -h2 / (m * (m + nu));
        tm *= -h2 / (m * (m - nu));
        const double dp = tp * (a + B * (2.0 * m + nu)), dm = tm * (a + B * (2.0 * m - nu));
        plus += dp;
        minus += dm;
        if (std::abs(dp) < 1e-17 * std::abs(plus) && std::abs(dm) < 1e-17 * std::abs(minus)) break;
    }
    return {plus, minus};
}

}  // namespace detail

// Exact ratio beta = c_-/c_+ making r^{-D-1} d/dr [r^{1+D/2}(J_nu + beta J_{-nu})(k r^{D+1}/c)] vanish at r = epsilon.
inline double reflecting_ratio(int D, const AngularMode& mode, double k, double epsilon) {
    if (!(epsilon > 0.0)) throw std::domain_error("epsilon must be positive");
    if (!(k > 0.0)) throw std::domain_error("reflecting_ratio needs k > 0");
    const auto [plus, minus] = detail::reflecting_terms(D, mode, k * std::pow(epsilon, D + 1.0) / bessel_scale(D));
    return -plus / minus;
}

// Green's function with a reflecting boundary at r = epsilon. Radial functions
// cos(phi) J_nu + sin(phi) J_{-nu}, tan(phi) = c_-/c_+, are normalized by their
// large-argument amplitude 1 + sin(2 phi) cos(nu pi).
inline SpectralField make_green_epsilon(const DipoleParams& p, Geometry g, const QuadratureGrid& grid, int mode_max,
                                        double epsilon, EpsilonRule rule = EpsilonRule::Exact) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::domain_error("epsilon must lie in (0, 1)");
    SpectralField f = make_green(p, g, grid, mode_max);
    f.epsilon = epsilon;
    f.epsilon_rule = rule;
    const int D = f.D();
    const double c = bessel_scale(D), ze = std::pow(epsilon, D + 1.0) / c;
    f.mix_j.assign(f.modes.size(), {});
    f.mix_jneg.assign(f.modes.size(), {});
    for (std::size_t m = 0; m < f.modes.size(); ++m) {
        const auto& mode = f.modes[m];
        std::vector<double> ca(grid.size()), sb(grid.size());
        bool singular = false;
        for (std::size_t i = 0; i < grid.size() && !singular; ++i) {
            const double k = grid.nodes[i];
            double phi;
            if (rule == EpsilonRule::Exact) {
                const auto [plus, minus] = detail::reflecting_terms(D, mode, k * ze);
                phi = std::atan2(-plus, minus);
            } else {
                try {
                    phi = std::atan(epsilon_cutoff_ratio(D, mode, k, epsilon));
                } catch (const SingularModeError&) {
                    singular = true;
                    break;
                }
            }
            ca[i] = std::cos(phi);
            sb[i] = std::sin(phi);
        }
        if (singular) {
            f.excluded_modes.push_back(mode.label);
            continue;
        }
        const double cn = std::cos(mode.nu * std::numbers::pi);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double k = grid.nodes[i];
            const double src = ca[i] * bessel_j(mode.nu, k / c) + sb[i] * bessel_j_negative(mode.nu, k / c);
            f.rho[m][i] = src / (1.0 + 2.0 * ca[i] * sb[i] * cn);
        }
        f.mix_j[m] = std::move(ca);
        f.mix_jneg[m] = std::move(sb);
    }
    return f;
}

inline double green_epsilon(double r, double angle, double t, const DipoleParams& p, Geometry g,
                            const QuadratureGrid& grid, int mode_max, double epsilon,
                            EpsilonRule rule = EpsilonRule::Exact) {
    return make_green_epsilon(p, g, grid, mode_max, epsilon, rule).value(r, angle, t);
}

// ---- expansion of a sampled initial density ----

// Angular quadrature whose weights integrate against the geometry's angular measure
// (normalized for Spherical, d theta for Planar, dOmega for Axial).
struct AngularGrid {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline AngularGrid make_angular_grid(Geometry g, int n) {
    AngularGrid a;
    if (g == Geometry::Spherical) {
        a.nodes = {0.0};
        a.weights = {1.0};
    } else if (g == Geometry::Planar) {
        if (n < 2) throw std::invalid_argument("planar angular grid needs n >= 2");
        for (int j = 0; j < n; ++j) {
            a.nodes.push_back(-std::numbers::pi + 2.0 * std::numbers::pi * (j + 1) / n);
            a.weights.push_back(2.0 * std::numbers::pi / n);
        }
    } else {
        std::vector<double> x, w;
        gauss_legendre(n, x, w);
        for (int j = 0; j < n; ++j) {
            a.nodes.push_back(std::acos(x[j]));
            a.weights.push_back(2.0 * std::numbers::pi * w[j]);
        }
    }
    return a;
}

struct SampledDensity {
    Geometry geometry = Geometry::Spherical;
    QuadratureGrid radial;
    AngularGrid angular;
    std::vector<double> values;  // radial-major: values[i * angles + j]
};

// Coefficients rho_m(k) reproducing P0 at t = 0: angular projection, then a Hankel transform in s = r^{D+1}/c.
inline SpectralField solution_from_initial(const SampledDensity& P0, const DipoleParams& p, const QuadratureGrid& kgrid,
                                           int mode_max, bool* decay_ok = nullptr) {
    const Geometry g = P0.geometry;
    SpectralField f;
    f.params = p;
    f.params.D = geometry_dimension(g, p.D);
    f.geometry = g;
    f.grid = kgrid;
    f.modes = detail::mode_list(g, f.params.D, mode_max);
    const int D = f.D();
    const double c = bessel_scale(D), pref = green_prefactor(D);
    const std::size_t nr = P0.radial.size(), na = P0.angular.nodes.size();
    if (P0.values.size() != nr * na) throw std::invalid_argument("sampled density has wrong size");

    QuadratureGrid sgrid;
    sgrid.k_max = std::pow(P0.radial.k_max, D + 1.0) / c;
    for (std::size_t i = 0; i < nr; ++i) {
        const double r = P0.radial.nodes[i];
        sgrid.nodes.push_back(std::pow(r, D + 1.0) / c);
        sgrid.weights.push_back(P0.radial.weights[i] * (D + 1.0) * std::pow(r, D) / c);
    }
    bool ok = true;
    f.rho.assign(f.modes.size(), {});
    for (std::size_t m = 0; m < f.modes.size(); ++m) {
        std::vector<double> fs(nr, 0.0);
        for (std::size_t i = 0; i < nr; ++i) {
            double proj = 0.0;
            for (std::size_t j = 0; j < na; ++j) {
                double dual = 1.0;
                if (g == Geometry::Planar) dual = std::cos(f.modes[m].label * P0.angular.nodes[j]);
                if (g == Geometry::Axial) dual = legendre_p(f.modes[m].label, std::cos(P0.angular.nodes[j]));
                proj += P0.angular.weights[j] * dual * P0.values[i * na + j];
            }
            fs[i] = proj / (pref * std::pow(P0.radial.nodes[i], 1.0 + 0.5 * D));
        }
        auto h = hankel_transform(fs, f.modes[m].nu, sgrid, kgrid);
        ok = ok && h.decay_ok;
        f.rho[m] = std::move(h.values);
    }
    if (decay_ok) *decay_ok = ok;
    return f;
}

inline SampledDensity sample_field(const SpectralField& f, const QuadratureGrid& radial, const AngularGrid& angular,
                                   double t) {
    SampledDensity s{f.geometry, radial, angular, {}};
    s.values.resize(radial.size() * angular.nodes.size());
    const double tt[1] = {t};
    for (std::size_t i = 0; i < radial.size(); ++i) {
        const auto v = f.values(radial.nodes[i], angular.nodes, tt, false);
        for (std::size_t j = 0; j < angular.nodes.size(); ++j) s.values[i * angular.nodes.size() + j] = v[j];
    }
    return s;
}

// ---- Fokker-Planck residual ----

// values(r, angles, times) -> angles x times, row-major.
using BatchEvaluator =
    std::function<std::vector<double>(double r, std::span<const double> angles, std::span<const double> times)>;

inline BatchEvaluator batch_from_point(std::function<double(double, double, double)> f) {
    return [f = std::move(f)](double r, std::span<const double> angles, std::span<const double> times) {
        std::vector<double> out;
        out.reserve(angles.size() * times.size());
        for (double a : angles)
            for (double t : times) out.push_back(f(r, a, t));
        return out;
    };
}

inline BatchEvaluator batch_from_field(const SpectralField& f) {
    return [&f](double r, std::span<const double> angles, std::span<const double> times) {
        return f.values(r, angles, times, false);
    };
}

struct ResidualGrid {
    std::vector<double> r;
    std::vector<double> angles{0.0};
    std::vector<double> times;
};

struct ResidualReport {
    double max_residual = 0.0;
    double max_time_derivative = 0.0;
    double relative() const { return max_time_derivative > 0.0 ? max_residual / max_time_derivative : max_residual; }
};

// max |dP/dt - (h / (2 r^{2D+2})) ((D-1)^2 (r^2 P'' - (D+1) r P') + Omega P)| by central differences.
inline ResidualReport fp_residual(const BatchEvaluator& P, const DipoleParams& p, Geometry g, const ResidualGrid& grid,
                                  unsigned threads = 1) {
    const int D = geometry_dimension(g, p.D);
    const std::size_t na = grid.angles.size(), nt = grid.times.size();
    std::vector<double> ang, tim;
    const double da = 1e-3;
    for (double a : grid.angles) {
        ang.push_back(a - da);
        ang.push_back(a);
        ang.push_back(a + da);
    }
    for (double t : grid.times) {
        const double dt = 1e-3 * t;
        tim.push_back(t - dt);
        tim.push_back(t);
        tim.push_back(t + dt);
    }
    std::vector<ResidualReport> per_r(grid.r.size());
    parallel_for(grid.r.size(), threads, [&](std::size_t ir) {
        const double r = grid.r[ir], dr = 1e-3 * r;
        const auto c = P(r, ang, tim);
        const auto lo = P(r - dr, ang, tim);
        const auto hi = P(r + dr, ang, tim);
        const std::size_t w = tim.size();
        ResidualReport rep;
        for (std::size_t a = 0; a < na; ++a)
            for (std::size_t j = 0; j < nt; ++j) {
                auto at = [&](const std::vector<double>& v, int da_, int dt_) {
                    return v[(3 * a + 1 + da_) * w + 3 * j + 1 + dt_];
                };
                const double t = grid.times[j], dt = 1e-3 * t, th = grid.angles[a];
                const double f = at(c, 0, 0);
                const double ft = (at(c, 0, 1) - at(c, 0, -1)) / (2.0 * dt);
                const double fr = (at(hi, 0, 0) - at(lo, 0, 0)) / (2.0 * dr);
                const double frr = (at(hi, 0, 0) - 2.0 * f + at(lo, 0, 0)) / (dr * dr);
                double omega = 0.0;
                if (g != Geometry::Spherical) {
                    const double faa = (at(c, 1, 0) - 2.0 * f + at(c, -1, 0)) / (da * da);
                    omega = faa;
                    if (g == Geometry::Axial) {
                        const double fa = (at(c, 1, 0) - at(c, -1, 0)) / (2.0 * da);
                        omega += std::cos(th) / std::sin(th) * fa;
                    }
                }
                const double rhs = p.h / (2.0 * std::pow(r, 2.0 * D + 2.0)) *
                                   ((D - 1.0) * (D - 1.0) * (r * r * frr - (D + 1.0) * r * fr) + omega);
                rep.max_residual = std::max(rep.max_residual, std::abs(ft - rhs));
                rep.max_time_derivative = std::max(rep.max_time_derivative, std::abs(ft));
            }
        per_r[ir] = rep;
    });
    ResidualReport out;
    for (const auto& r : per_r) {
        out.max_residual = std::max(out.max_residual, r.max_residual);
        out.max_time_derivative = std::max(out.max_time_derivative, r.max_time_derivative);
    }
    return out;
}

}  // namespace dipole
