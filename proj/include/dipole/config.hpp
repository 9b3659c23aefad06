#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dipole/fractal.hpp"
#include "dipole/io.hpp"
#include "dipole/sde.hpp"

namespace dipole {

class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Every parameter a CLI command may read. Defaults: h = 1, k_max = 60, mode_max = 50.
struct RunConfig {
    int D = 2;
    double d_H = 1.0;
    double h = 1.0;
    double k_max = 60.0;
    int k_nodes = 2048;
    int mode_max = 50;
    double dt = 1e-4;  // Euler step of the simulator
    std::size_t steps = 1000;
    std::size_t trajectories = 1;
    std::size_t stride = 1;  // trajectory rows kept: every stride-th step
    std::uint64_t seed = 0;
    double L = 5.0;
    std::string recovery = "periodic";
    std::optional<double> epsilon;
    bool modified = false;

    // Field time grid: t_points values from t_start to t_end, geometric or uniform.
    double t_start = 1.0 / 512.0;
    double t_end = 1.0;
    int t_points = 10;
    std::string t_spacing = "log";

    // Field spatial grid.
    double r_start = 0.02;
    double r_end = 3.0;
    int r_points = 150;
    std::optional<double> theta_start, theta_end;
    int theta_points = 61;

    // Probability series and Hurst analysis.
    double fp_dt = 1.0 / 4096.0;
    double window_start = 1.0 / 512.0;
    double window_end = 0.03;
    int window_skip = -1;  // -1: 0 for D = 2, 2 for D = 3
    std::string order = "second";

    std::string out = "out";
    unsigned threads = 0;  // 0: hardware parallelism

    DipoleParams params() const { return {D, d_H, h}; }

    unsigned worker_count() const { return threads ? threads : default_threads(); }

    RecoveryRule recovery_rule() const {
        if (recovery == "periodic") return RecoveryRule::periodic(L);
        if (recovery == "reset") return RecoveryRule::reset(L);
        return RecoveryRule::none();
    }

    Modification modification() const {
        if (order == "none") return Modification::None;
        if (order == "first") return Modification::FirstOrder;
        if (order == "third") return Modification::ThirdOrder;
        if (order == "volterra") return Modification::Volterra;
        return Modification::SecondOrder;
    }

    AnalysisWindow window() const {
        return {window_start, window_end, static_cast<std::size_t>(window_skip >= 0 ? window_skip : (D == 3 ? 2 : 0))};
    }

    std::vector<double> times() const {
        std::vector<double> t;
        for (int i = 0; i < t_points; ++i) {
            const double u = t_points > 1 ? static_cast<double>(i) / (t_points - 1) : 0.0;
            t.push_back(t_spacing == "log" ? t_start * std::pow(t_end / t_start, u) : t_start + (t_end - t_start) * u);
        }
        return t;
    }

    std::vector<double> radii() const {
        std::vector<double> r;
        for (int i = 0; i < r_points; ++i)
            r.push_back(r_points > 1 ? r_start + (r_end - r_start) * i / (r_points - 1) : r_start);
        return r;
    }

    void validate() const {
        auto need = [](bool ok, const char* field, const char* what) {
            if (!ok) throw ConfigError(std::string("config field '") + field + "': " + what);
        };
        auto positive = [&](double v, const char* field) { need(std::isfinite(v) && v > 0.0, field, "must be positive"); };
        need(D == 2 || D == 3, "D", "must be 2 or 3");
        positive(d_H, "d_H");
        positive(h, "h");
        positive(k_max, "k_max");
        need(k_nodes >= 16, "k_nodes", "must be at least 16");
        need(mode_max >= 0, "mode_max", "must be non-negative");
        positive(dt, "dt");
        need(trajectories >= 1, "trajectories", "must be at least 1");
        need(stride >= 1, "stride", "must be at least 1");
        positive(L, "L");
        need(recovery == "periodic" || recovery == "reset" || recovery == "none", "recovery",
             "must be periodic, reset or none");
        if (epsilon) need(*epsilon > 0.0 && *epsilon < 1.0, "epsilon", "must lie in (0, 1)");
        positive(t_start, "t_start");
        positive(t_end, "t_end");
        need(t_end >= t_start, "t_end", "must not precede t_start");
        need(t_points >= 1, "t_points", "must be at least 1");
        need(t_spacing == "log" || t_spacing == "uniform", "t_spacing", "must be log or uniform");
        positive(r_start, "r_start");
        positive(r_end, "r_end");
        need(r_end >= r_start, "r_end", "must not precede r_start");
        need(r_points >= 1, "r_points", "must be at least 1");
        need(theta_points >= 1, "theta_points", "must be at least 1");
        positive(fp_dt, "fp_dt");
        positive(window_start, "window_start");
        need(window_end > window_start, "window_end", "must exceed window_start");
        need(order == "none" || order == "first" || order == "second" || order == "third" || order == "volterra", "order",
             "must be none, first, second, third or volterra");
    }

    // Full echo, sufficient to rerun the command.
    Metadata echo() const {
        Metadata m;
        m["D"] = std::to_string(D);
        m["d_H"] = format_number(d_H);
        m["h"] = format_number(h);
        m["k_max"] = format_number(k_max);
        m["k_nodes"] = std::to_string(k_nodes);
        m["mode_max"] = std::to_string(mode_max);
        m["dt"] = format_number(dt);
        m["steps"] = std::to_string(steps);
        m["trajectories"] = std::to_string(trajectories);
        m["stride"] = std::to_string(stride);
        m["seed"] = std::to_string(seed);
        m["L"] = format_number(L);
        m["recovery"] = recovery;
        if (epsilon) m["epsilon"] = format_number(*epsilon);
        m["modified"] = modified ? "true" : "false";
        m["t_start"] = format_number(t_start);
        m["t_end"] = format_number(t_end);
        m["t_points"] = std::to_string(t_points);
        m["t_spacing"] = t_spacing;
        m["r_start"] = format_number(r_start);
        m["r_end"] = format_number(r_end);
        m["r_points"] = std::to_string(r_points);
        if (theta_start) m["theta_start"] = format_number(*theta_start);
        if (theta_end) m["theta_end"] = format_number(*theta_end);
        m["theta_points"] = std::to_string(theta_points);
        m["fp_dt"] = format_number(fp_dt);
        m["window_start"] = format_number(window_start);
        m["window_end"] = format_number(window_end);
        m["window_skip"] = std::to_string(window_skip);
        m["order"] = order;
        return m;
    }
};

}  // namespace dipole
