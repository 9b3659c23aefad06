#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dipole/parallel.hpp"

namespace dipole {

struct DipoleParams {
    int D = 2;
    double d_H = 1.0;
    double h = 1.0;

    void validate() const {
        if (D < 2) throw std::invalid_argument("D must be >= 2");
        if (!(std::isfinite(d_H) && d_H >= 0.0)) throw std::invalid_argument("d_H must be finite and non-negative");
        if (!(std::isfinite(h) && h > 0.0)) throw std::invalid_argument("h must be finite and positive");
    }
};

class SingularityError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

using Vec = std::vector<double>;
using Rng = std::mt19937_64;

inline constexpr double origin_floor = 1e-12;

inline double norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// splitmix64 finalizer; maps (master seed, stream index) to a well-mixed seed.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline Vec sample_unit_vector(Rng& rng, int D) {
    if (D < 2) throw std::invalid_argument("sample_unit_vector needs D >= 2");
    std::normal_distribution<double> g;
    Vec a(D);
    double n = 0.0;
    do {
        for (auto& x : a) x = g(rng);
        n = norm(a);
    } while (n < 1e-300);
    for (auto& x : a) x /= n;
    return a;
}

// d_H r^{-D} (a - D (a.rhat) rhat)
inline Vec dipole_velocity(const Vec& r, const Vec& a, const DipoleParams& p) {
    if (static_cast<int>(r.size()) != p.D || static_cast<int>(a.size()) != p.D)
        throw std::invalid_argument("dipole_velocity: dimension mismatch");
    const double rn = norm(r);
    if (rn < origin_floor) throw SingularityError("dipole_velocity: position at the origin");
    if (std::abs(norm(a) - 1.0) > 1e-12) throw std::invalid_argument("dipole_velocity: a must be a unit vector");
    double ar = 0.0;
    for (int i = 0; i < p.D; ++i) ar += a[i] * r[i] / rn;
    const double scale = p.d_H / std::pow(rn, p.D);
    Vec v(p.D);
    for (int i = 0; i < p.D; ++i) v[i] = scale * (a[i] - p.D * ar * r[i] / rn);
    return v;
}

inline Vec euler_step_with(const Vec& r, double dt, const DipoleParams& p, const Vec& a) {
    Vec v = dipole_velocity(r, a, p);
    Vec out(r);
    for (int i = 0; i < p.D; ++i) out[i] += dt * v[i];
    return out;
}

inline Vec euler_step(const Vec& r, double dt, const DipoleParams& p, Rng& rng) {
    return euler_step_with(r, dt, p, sample_unit_vector(rng, p.D));
}

// Fokker-Planck time advanced by one Euler step of size dt.
inline double fp_time_per_step(const DipoleParams& p, double dt) { return p.d_H * p.d_H * dt * dt / (p.D * p.h); }

// Dipole strength for which one Euler step of size dt advances Fokker-Planck time by dt.
inline double matched_strength(int D, double h, double dt) { return std::sqrt(h * D / dt); }

struct RecoveryRule {
    enum class Kind { Periodic, ResetToInitial, None };
    Kind kind = Kind::None;
    double L = 5.0;

    static RecoveryRule periodic(double L) { return {Kind::Periodic, L}; }
    static RecoveryRule reset(double L) { return {Kind::ResetToInitial, L}; }
    static RecoveryRule none() { return {Kind::None, 5.0}; }

    void validate() const {
        if (kind != Kind::None && !(L > 0.0)) throw std::invalid_argument("recovery box half-width L must be positive");
    }
};

enum class EventKind { JumpRecovered, Reset };

struct Event {
    std::size_t step;
    EventKind kind;
};

struct Trajectory {
    DipoleParams params;
    double dt = 0.0;
    std::vector<Vec> positions;
    std::vector<Event> events;
    std::uint64_t seed = 0;
    std::size_t singular_hits = 0;
};

inline double wrap_coordinate(double x, double L) {
    const double w = 2.0 * L;
    double y = std::fmod(x + L, w);
    if (y < 0.0) y += w;
    return y - L;
}

inline bool outside_box(const Vec& x, double L) {
    for (double c : x)
        if (c < -L || c > L) return true;
    return false;
}

// Applies the recovery rule after a step; returns the event it produced, if any.
// A landing at the origin counts as an escape.
inline std::optional<EventKind> apply_recovery(Vec& x, const Vec& r0, const RecoveryRule& rule, bool singular) {
    if (rule.kind == RecoveryRule::Kind::None) return std::nullopt;
    if (!singular && !outside_box(x, rule.L)) return std::nullopt;
    if (rule.kind == RecoveryRule::Kind::Periodic) {
        if (singular) {
            x = r0;
        } else {
            for (auto& c : x) c = wrap_coordinate(c, rule.L);
        }
        return EventKind::JumpRecovered;
    }
    x = r0;
    return EventKind::Reset;
}

inline Trajectory simulate_trajectory(const Vec& r0, double dt, std::size_t steps, const RecoveryRule& rule,
                                      const DipoleParams& p, std::uint64_t seed) {
    p.validate();
    rule.validate();
    if (static_cast<int>(r0.size()) != p.D) throw std::invalid_argument("r0 has wrong dimension");
    if (norm(r0) < origin_floor) throw SingularityError("r0 at the origin");
    if (rule.kind != RecoveryRule::Kind::None && outside_box(r0, rule.L))
        throw std::invalid_argument("r0 outside the recovery box");
    if (!(dt >= 0.0)) throw std::invalid_argument("dt must be non-negative");

    Trajectory tr{p, dt, {}, {}, seed, 0};
    tr.positions.reserve(steps + 1);
    tr.positions.push_back(r0);
    Rng rng(seed);
    Vec x = r0;
    for (std::size_t s = 1; s <= steps; ++s) {
        x = euler_step(x, dt, p, rng);
        const bool singular = norm(x) < origin_floor;
        if (singular) {
            ++tr.singular_hits;
            if (rule.kind == RecoveryRule::Kind::None)
                throw SingularityError("particle reached the origin at step " + std::to_string(s));
        }
        if (auto ev = apply_recovery(x, r0, rule, singular)) tr.events.push_back({s, *ev});
        tr.positions.push_back(x);
    }
    return tr;
}

// Radial reduction: r - sqrt(kappa)(D-1) dB + ((D-1)/2) kappa dt / r, kappa = (d_H / r^D)^2.
inline double radial_step_with(double r, double dt, const DipoleParams& p, double dB) {
    if (!(r > 0.0)) throw std::domain_error("radial_step needs r > 0");
    const double kappa = std::pow(p.d_H / std::pow(r, p.D), 2);
    const double out = r - std::sqrt(kappa) * (p.D - 1) * dB + 0.5 * (p.D - 1) * kappa * dt / r;
    if (!(out > 0.0)) throw SingularityError("radial_step absorbed at the origin");
    return out;
}

inline double radial_step(double r, double dt, const DipoleParams& p, Rng& rng) {
    std::normal_distribution<double> g(0.0, std::sqrt(dt));
    return radial_step_with(r, dt, p, g(rng));
}

struct EnsembleSummary {
    std::size_t trajectories = 0;
    std::size_t jump_events = 0;
    std::size_t reset_events = 0;
    std::size_t singular_hits = 0;
    std::vector<std::size_t> escapes;  // per trajectory: jump + reset count
};

// Final positions of `count` independent trajectories, stream k seeded by stream_seed(seed, k).
// Trajectories hitting the origin under rule None are reported with an empty position.
inline std::vector<Vec> ensemble_endpoints(const Vec& r0, double dt, std::size_t steps, const RecoveryRule& rule,
                                           const DipoleParams& p, std::uint64_t seed, std::size_t count,
                                           unsigned threads = 1, EnsembleSummary* summary = nullptr) {
    std::vector<Vec> out(count);
    std::vector<std::size_t> jumps(count, 0), resets(count, 0), sing(count, 0);
    parallel_for(count, threads, [&](std::size_t k) {
        const std::uint64_t s = stream_seed(seed, k);
        Rng rng(s);
        Vec x = r0;
        for (std::size_t step = 1; step <= steps; ++step) {
            x = euler_step(x, dt, p, rng);
            const bool singular = norm(x) < origin_floor;
            if (singular) {
                ++sing[k];
                if (rule.kind == RecoveryRule::Kind::None) {
                    x.clear();
                    break;
                }
            }
            if (auto ev = apply_recovery(x, r0, rule, singular))
                ++(*ev == EventKind::Reset ? resets[k] : jumps[k]);
        }
        out[k] = std::move(x);
    });
    if (summary) {
        summary->trajectories = count;
        summary->escapes.assign(count, 0);
        for (std::size_t k = 0; k < count; ++k) {
            summary->jump_events += jumps[k];
            summary->reset_events += resets[k];
            summary->singular_hits += sing[k];
            summary->escapes[k] = jumps[k] + resets[k];
        }
    }
    return out;
}

}  // namespace dipole
