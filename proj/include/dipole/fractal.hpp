#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dipole/parallel.hpp"
#include "dipole/sde.hpp"
#include "dipole/spectral.hpp"
#include "dipole/unitarity.hpp"

namespace dipole {

class DegenerateFitError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct MomentSet {
    double t = 0.0;
    double mean_r = 0.0;
    double mean_r_sq = 0.0;
    double mean_r_cos_theta = 0.0;
    double norm = 1.0;  // measured total probability the moments were divided by
};

struct Variations {
    double delta_r_sq;
    double delta_theta_sq;
    double delta_total_sq;
};

inline Variations variations(const MomentSet& m) {
    const double dr = m.mean_r_sq - m.mean_r * m.mean_r;
    const double dth = 2.0 * m.mean_r * (m.mean_r - m.mean_r_cos_theta);
    return {dr, dth, dr + dth};
}

// Log-log central slope: H_i = (ln d_{i+1} - ln d_{i-1}) / (2 (ln t_{i+1} - ln t_{i-1})).
// Endpoints get one-sided slopes.
inline std::vector<double> hurst(std::span<const double> t, std::span<const double> delta_sq) {
    if (t.size() != delta_sq.size() || t.size() < 3) throw std::invalid_argument("hurst needs >= 3 matching points");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(delta_sq[i] > 0.0)) throw std::domain_error("hurst needs positive variations");
        if (!(t[i] > 0.0) || (i && !(t[i] > t[i - 1]))) throw std::domain_error("hurst needs increasing positive times");
    }
    const std::size_t n = t.size();
    auto slope = [&](std::size_t a, std::size_t b) {
        return 0.5 * (std::log(delta_sq[b]) - std::log(delta_sq[a])) / (std::log(t[b]) - std::log(t[a]));
    };
    std::vector<double> H(n);
    H[0] = slope(0, 1);
    H[n - 1] = slope(n - 2, n - 1);
    for (std::size_t i = 1; i + 1 < n; ++i) H[i] = slope(i - 1, i + 1);
    return H;
}

inline std::vector<double> latent_fractal_dimension(std::span<const double> H) {
    std::vector<double> out(H.size());
    for (std::size_t i = 0; i < H.size(); ++i) {
        if (!(H[i] > 0.0)) throw std::domain_error("latent fractal dimension needs H > 0");
        out[i] = 1.0 / H[i];
    }
    return out;
}

struct HurstSeries {
    std::vector<double> times, H_r, H_theta, H, D_f;
    std::vector<double> norm;  // total probability divided out at each time
};

// Moments of a density at time t by direct quadrature over (r, angle).
inline MomentSet moments(const BatchEvaluator& P, double t, int D, const QuadratureGrid& radial,
                         const AngularGrid& angular) {
    const double tt[1] = {t};
    double m0 = 0.0, m1 = 0.0, m2 = 0.0, mc = 0.0;
    for (std::size_t i = 0; i < radial.size(); ++i) {
        const double r = radial.nodes[i], w = radial.weights[i] * std::pow(r, D - 1.0);
        const auto v = P(r, angular.nodes, tt);
        double a = 0.0, ac = 0.0;
        for (std::size_t j = 0; j < angular.nodes.size(); ++j) {
            a += angular.weights[j] * v[j];
            ac += angular.weights[j] * std::cos(angular.nodes[j]) * v[j];
        }
        m0 += w * a;
        m1 += w * r * a;
        m2 += w * r * r * a;
        mc += w * r * ac;
    }
    return {t, m1 / m0, m2 / m0, mc / m0, m0};
}

// Plain (unmodified) moment integrals on a time grid, by exact angular projection onto the
// lowest two modes: M0 = int r^{D-1} p_0, Mr = int r^D p_0, Mr2 = int r^{D+1} p_0, Mc = int r^D p_1.
struct MomentIntegrals {
    std::vector<double> times, M0, Mr, Mr2, Mc;
};

inline MomentIntegrals projected_moments(const SpectralField& f, const QuadratureGrid& radial,
                                         std::span<const double> times, unsigned threads = 1) {
    if (f.geometry == Geometry::Spherical) throw std::invalid_argument("projected moments need an angular geometry");
    if (f.modes.size() < 2) throw std::invalid_argument("projected moments need modes 0 and 1");
    const int D = f.D();
    const std::size_t nk = f.grid.size();
    const double c = bessel_scale(D);
    // g[q][k]: radial integrals of C(k, r) against the four moment weights
    std::vector<std::vector<double>> g(4, std::vector<double>(nk, 0.0));
    std::vector<double> sr(radial.size()), base(radial.size());
    for (std::size_t i = 0; i < radial.size(); ++i) {
        const double r = radial.nodes[i];
        sr[i] = std::pow(r, D + 1.0) / c;
        base[i] = radial.weights[i] * std::pow(r, D - 1.0) * f.radial_factor(r);
        if (r < f.r_min()) throw std::domain_error("radial grid reaches below the cutoff boundary");
    }
    parallel_for(nk, threads, [&](std::size_t k) {
        const double kk = f.grid.nodes[k];
        for (std::size_t m = 0; m < 2; ++m) {
            double a0 = 0.0, a1 = 0.0, a2 = 0.0;
            for (std::size_t i = 0; i < radial.size(); ++i) {
                const double r = radial.nodes[i], w = base[i] * f.branch(m, k, sr[i]);
                if (m == 0) {
                    a0 += w;
                    a1 += w * r;
                    a2 += w * r * r;
                } else {
                    a1 += w * r;
                }
            }
            const double pref = f.grid.weights[k] * kk * f.rho[m][k];
            if (m == 0) {
                g[0][k] = pref * a0;
                g[1][k] = pref * a1;
                g[2][k] = pref * a2;
            } else {
                g[3][k] = pref * a1;
            }
        }
    });
    MomentIntegrals out;
    out.times.assign(times.begin(), times.end());
    for (auto* v : {&out.M0, &out.Mr, &out.Mr2, &out.Mc}) v->assign(times.size(), 0.0);
    for (std::size_t j = 0; j < times.size(); ++j) {
        const auto e = f.decay(times[j]);
        double s[4] = {0, 0, 0, 0};
        for (std::size_t k = 0; k < nk; ++k)
            for (int q = 0; q < 4; ++q) s[q] += g[q][k] * e[k];
        out.M0[j] = s[0];
        out.Mr[j] = s[1];
        out.Mr2[j] = s[2];
        out.Mc[j] = s[3];
    }
    return out;
}

inline MomentIntegrals modify_moments(const MomentIntegrals& m, const ProbabilitySeries& s, Modification order) {
    MomentIntegrals out;
    out.times = m.times;
    out.M0 = modify_series(m.M0, s, order);
    out.Mr = modify_series(m.Mr, s, order);
    out.Mr2 = modify_series(m.Mr2, s, order);
    out.Mc = modify_series(m.Mc, s, order);
    return out;
}

inline MomentSet moment_set(const MomentIntegrals& m, std::size_t j) {
    const double n = m.M0[j];
    return {m.times[j], m.Mr[j] / n, m.Mr2[j] / n, m.Mc[j] / n, n};
}

// Monte Carlo counterpart of projected_moments: ensemble averages after every Euler step, on the
// Fokker-Planck time grid t_j = j fp_time_per_step(p, dt). theta is measured from the first axis;
// M0 is the surviving fraction under rule None.
inline MomentIntegrals ensemble_moments(const Vec& r0, double dt, std::size_t steps, const RecoveryRule& rule,
                                        const DipoleParams& p, std::uint64_t seed, std::size_t count,
                                        unsigned threads = 1) {
    p.validate();
    rule.validate();
    const std::size_t n = steps + 1;
    std::vector<double> acc(count * n * 4, 0.0);
    parallel_for(count, threads, [&](std::size_t k) {
        Rng rng(stream_seed(seed, k));
        Vec x = r0;
        double* a = acc.data() + k * n * 4;
        for (std::size_t s = 0; s < n; ++s) {
            if (s > 0) {
                x = euler_step(x, dt, p, rng);
                const bool singular = norm(x) < origin_floor;
                if (singular && rule.kind == RecoveryRule::Kind::None) return;
                apply_recovery(x, r0, rule, singular);
            }
            const double r = norm(x);
            a[4 * s] = 1.0;
            a[4 * s + 1] = r;
            a[4 * s + 2] = r * r;
            a[4 * s + 3] = x[0];
        }
    });
    MomentIntegrals out;
    for (auto* v : {&out.M0, &out.Mr, &out.Mr2, &out.Mc}) v->assign(n, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        out.times.push_back(s * fp_time_per_step(p, dt));
        for (std::size_t k = 0; k < count; ++k) {
            const double* a = acc.data() + (k * n + s) * 4;
            out.M0[s] += a[0];
            out.Mr[s] += a[1];
            out.Mr2[s] += a[2];
            out.Mc[s] += a[3];
        }
        for (auto* v : {&out.M0, &out.Mr, &out.Mr2, &out.Mc}) (*v)[s] /= static_cast<double>(count);
    }
    return out;
}

struct AnalysisWindow {
    double t_start = 1.0 / 512.0;
    double t_end = 0.03;
    std::size_t skip = 0;  // leading window points discarded as transient
};

// Hurst exponents on the window from a moment time series (central slopes use grid neighbors).
inline HurstSeries hurst_series(const MomentIntegrals& m, const AnalysisWindow& w) {
    const std::size_t n = m.times.size();
    std::vector<double> dr(n), dth(n), dt(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto v = variations(moment_set(m, j));
        dr[j] = v.delta_r_sq;
        dth[j] = v.delta_theta_sq;
        dt[j] = v.delta_total_sq;
    }
    HurstSeries out;
    std::size_t kept = 0;
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double t = m.times[j];
        if (t < w.t_start * (1 - 1e-12) || t > w.t_end * (1 + 1e-12)) continue;
        if (kept++ < w.skip) continue;
        const double tt[3] = {m.times[j - 1], t, m.times[j + 1]};
        auto H = [&](const std::vector<double>& d) {
            const double dd[3] = {d[j - 1], d[j], d[j + 1]};
            return hurst(tt, dd)[1];
        };
        out.times.push_back(t);
        out.H_r.push_back(H(dr));
        out.H_theta.push_back(H(dth));
        out.H.push_back(H(dt));
        out.D_f.push_back(1.0 / out.H.back());
        out.norm.push_back(m.M0[j]);
    }
    return out;
}

struct PipelineConfig {
    DipoleParams params{2, 1.0, 1.0};
    Geometry geometry = Geometry::Planar;
    double k_max = 60.0;
    int k_nodes = 2048;
    double r_max = 0.0;  // 0: 3.5 for D = 2, 2.5 for D = 3
    int r_nodes = 2048;
    double dt = 1.0 / 4096.0;
    AnalysisWindow window;
    Modification order = Modification::SecondOrder;
    std::optional<double> epsilon;
    unsigned threads = 1;
};

struct PipelineResult {
    MomentIntegrals plain, modified;
    ProbabilitySeries survival;
    HurstSeries hurst;
};

// Green's function -> recovered density -> variations -> Hurst exponents -> 1/H.
// With a reflecting cutoff no probability leaves, so the recovery step is skipped.
inline PipelineResult run_hurst_pipeline(const PipelineConfig& cfg) {
    const int D = geometry_dimension(cfg.geometry, cfg.params.D);
    DipoleParams p = cfg.params;
    p.D = D;
    const double r_max = cfg.r_max > 0.0 ? cfg.r_max : (D == 2 ? 3.5 : 2.5);
    const double r_min = cfg.epsilon.value_or(0.0);
    const auto radial = composite_gauss(r_min, r_max, cfg.r_nodes / 32, 32);
    SpectralField f;
    if (cfg.epsilon) {
        const auto kg = make_graded_k_grid(cfg.k_max, cfg.k_nodes, 16, 1.0, 60, 0.7);
        f = make_green_epsilon(p, cfg.geometry, kg, 1, *cfg.epsilon);
    } else {
        f = make_green(p, cfg.geometry, make_k_grid(cfg.k_max, cfg.k_nodes), 1);
    }
    const auto times = uniform_times(cfg.dt, cfg.window.t_end + cfg.dt);
    PipelineResult out;
    out.plain = projected_moments(f, radial, times, cfg.threads);
    if (cfg.epsilon) {
        out.survival = probability_series(times, out.plain.M0);
        out.modified = out.plain;
    } else {
        out.survival = survival_series(D, p.h, times, cfg.threads);
        out.modified = modify_moments(out.plain, out.survival, cfg.order);
    }
    out.hurst = hurst_series(out.modified, cfg.window);
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---- box counting and multifractal spectrum ----

struct LinearFit {
    double slope = 0.0, intercept = 0.0, r_squared = 0.0;
};

inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("least_squares needs >= 2 matching points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) sse += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
    f.r_squared = syy > 0 ? 1.0 - sse / syy : 1.0;
    return f;
}

// Sorted occupancy counts of the cells hit by the points at one mesh size.
// Cells are anchored at the componentwise minimum of the points.
inline std::vector<std::size_t> cell_occupancy(std::span<const Vec> points, double mesh) {
    if (points.empty()) return {};
    const std::size_t D = points[0].size();
    if (D > 3) throw std::invalid_argument("cell_occupancy supports up to 3 dimensions");
    Vec lo(points[0]);
    for (const auto& p : points)
        for (std::size_t d = 0; d < D; ++d) lo[d] = std::min(lo[d], p[d]);
    std::vector<std::uint64_t> keys;
    keys.reserve(points.size());
    for (const auto& p : points) {
        std::uint64_t key = 0;
        for (std::size_t d = 0; d < D; ++d) {
            const auto c = static_cast<std::uint64_t>(std::floor((p[d] - lo[d]) / mesh));
            if (c >= (1ULL << 21)) throw std::invalid_argument("mesh too fine for the trajectory extent");
            key = (key << 21) | c;
        }
        keys.push_back(key);
    }
    std::sort(keys.begin(), keys.end());
    std::vector<std::size_t> counts;
    for (std::size_t i = 0; i < keys.size();) {
        std::size_t j = i;
        while (j < keys.size() && keys[j] == keys[i]) ++j;
        counts.push_back(j - i);
        i = j;
    }
    return counts;
}

struct BoxCountResult {
    double F0 = 0.0;
    double r_squared = 0.0;
    std::vector<double> mesh;
    std::vector<std::size_t> count;
};

// Slope of log Z_l against log(1/l).
inline BoxCountResult box_counting(std::span<const Vec> points, std::span<const double> mesh_sizes) {
    if (mesh_sizes.size() < 4) throw std::invalid_argument("box_counting needs at least 4 mesh sizes");
    BoxCountResult out;
    std::vector<double> x, y;
    for (double l : mesh_sizes) {
        if (!(l > 0.0)) throw std::invalid_argument("mesh sizes must be positive");
        const auto n = cell_occupancy(points, l).size();
        out.mesh.push_back(l);
        out.count.push_back(n);
        x.push_back(std::log(1.0 / l));
        y.push_back(std::log(static_cast<double>(n)));
    }
    const auto fit = least_squares(x, y);
    out.F0 = fit.slope;
    out.r_squared = fit.r_squared;
    if (fit.r_squared < 0.9) throw DegenerateFitError("box counting fit has R^2 < 0.9");
    return out;
}

inline BoxCountResult box_counting(const Trajectory& tr, std::span<const double> mesh_sizes) {
    return box_counting(std::span<const Vec>(tr.positions), mesh_sizes);
}

// Geometric ladder extent * 2^{-j}, j = j_lo..j_hi.
inline std::vector<double> mesh_ladder(double extent, int j_lo = 2, int j_hi = 8) {
    std::vector<double> m;
    for (int j = j_lo; j <= j_hi; ++j) m.push_back(extent * std::pow(2.0, -j));
    return m;
}

inline double trajectory_extent(std::span<const Vec> points) {
    if (points.empty()) return 0.0;
    double e = 0.0;
    for (std::size_t d = 0; d < points[0].size(); ++d) {
        double lo = points[0][d], hi = lo;
        for (const auto& p : points) {
            lo = std::min(lo, p[d]);
            hi = std::max(hi, p[d]);
        }
        e = std::max(e, hi - lo);
    }
    return e;
}

inline double median_step(std::span<const Vec> points) {
    std::vector<double> s;
    for (std::size_t i = 1; i < points.size(); ++i) {
        double d = 0.0;
        for (std::size_t k = 0; k < points[i].size(); ++k) d += std::pow(points[i][k] - points[i - 1][k], 2);
        s.push_back(std::sqrt(d));
    }
    return median(s);
}

struct MultifractalPoint {
    double T, F, Dq, r_squared;
};

// Z_l(T) = sum_i p_l(i)^T over occupied cells; F(T) is the slope of log Z_l(T) against log(1/l),
// so F(0) is the box dimension. D_q = F/(1 - T); at T = 1 the slope of sum p ln p against ln l.
inline std::vector<MultifractalPoint> multifractal_free_energy(const std::vector<std::vector<double>>& probabilities,
                                                               std::span<const double> mesh_sizes,
                                                               std::span<const double> T_list) {
    if (probabilities.size() != mesh_sizes.size() || mesh_sizes.size() < 4)
        throw std::invalid_argument("multifractal_free_energy needs >= 4 mesh sizes with probabilities");
    for (const auto& p : probabilities) {
        double s = 0.0;
        for (double v : p) s += v;
        if (std::abs(s - 1.0) > 1e-6) throw std::invalid_argument("cell probabilities must sum to 1");
    }
    std::vector<double> x;
    for (double l : mesh_sizes) x.push_back(std::log(1.0 / l));
    std::vector<MultifractalPoint> out;
    for (double T : T_list) {
        std::vector<double> y;
        for (const auto& p : probabilities) {
            double z = 0.0;
            for (double v : p)
                if (v > 0.0) z += T == 0.0 ? 1.0 : std::pow(v, T);
            y.push_back(std::log(z));
        }
        const auto fit = least_squares(x, y);
        if (fit.r_squared < 0.9 && std::abs(fit.slope) > 1e-9) throw DegenerateFitError("multifractal fit has R^2 < 0.9");
        double Dq;
        if (std::abs(T - 1.0) < 1e-12) {
            std::vector<double> ent;
            for (const auto& p : probabilities) {
                double e = 0.0;
                for (double v : p)
                    if (v > 0.0) e += v * std::log(v);
                ent.push_back(e);
            }
            std::vector<double> lnl;
            for (double l : mesh_sizes) lnl.push_back(std::log(l));
            Dq = least_squares(lnl, ent).slope;
        } else {
            Dq = fit.slope / (1.0 - T);
        }
        out.push_back({T, fit.slope, Dq, fit.r_squared});
    }
    return out;
}

inline std::vector<std::vector<double>> cell_probabilities(std::span<const Vec> points, std::span<const double> mesh_sizes) {
    std::vector<std::vector<double>> out;
    for (double l : mesh_sizes) {
        const auto c = cell_occupancy(points, l);
        std::vector<double> p;
        for (auto n : c) p.push_back(static_cast<double>(n) / points.size());
        out.push_back(std::move(p));
    }
    return out;
}

// Brownian control path with unit-variance Gaussian increments per coordinate.
inline std::vector<Vec> brownian_path(int D, std::size_t steps, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g;
    std::vector<Vec> out;
    out.reserve(steps + 1);
    Vec x(D, 0.0);
    out.push_back(x);
    for (std::size_t s = 0; s < steps; ++s) {
        for (auto& c : x) c += g(rng);
        out.push_back(x);
    }
    return out;
}

}  // namespace dipole
