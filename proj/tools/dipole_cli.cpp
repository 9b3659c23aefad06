#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "dipole/config.hpp"
#include "dipole/fractal.hpp"
#include "dipole/io.hpp"
#include "dipole/plot.hpp"
#include "dipole/sde.hpp"
#include "dipole/spectral.hpp"
#include "dipole/unitarity.hpp"

namespace fs = std::filesystem;
using namespace dipole;

namespace {

Vec unit_start(int D) {
    Vec r0(D, 0.0);
    r0[0] = 1.0;
    return r0;
}

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    return s.empty() ? "none" : s;
}

const char* event_name(EventKind k) { return k == EventKind::Reset ? "reset" : "jump"; }

// ---- simulate ----

void cmd_simulate(const RunConfig& c) {
    c.validate();
    const auto p = c.params();
    const auto rule = c.recovery_rule();
    const Vec r0 = unit_start(c.D);
    const fs::path dir = c.out;
    struct Counts {
        std::size_t jumps = 0, resets = 0, singular = 0, absorbed = 0;
    };
    std::vector<Counts> counts(c.trajectories);
    parallel_for(c.trajectories, c.worker_count(), [&](std::size_t k) {
        std::vector<std::string> header{"t"};
        for (int i = 1; i <= c.D; ++i) header.push_back("x" + std::to_string(i));
        header.push_back("event");
        const fs::path path = dir / ("traj_" + std::to_string(k) + ".csv");
        CsvWriter w(path, header);
        Trajectory tr;
        try {
            tr = simulate_trajectory(r0, c.dt, c.steps, rule, p, stream_seed(c.seed, k));
        } catch (const SingularityError&) {
            counts[k].absorbed = 1;
            counts[k].singular = 1;
            w.close();
            return;
        }
        std::vector<const char*> ev(tr.positions.size(), "-");
        for (const auto& e : tr.events) ev[e.step] = event_name(e.kind);
        for (std::size_t s = 0; s < tr.positions.size(); s += c.stride) {
            std::vector<std::string> row{format_number(s * c.dt)};
            for (double x : tr.positions[s]) row.push_back(format_number(x));
            row.emplace_back(ev[s]);
            w.row(row);
        }
        w.close();
        for (const auto& e : tr.events) ++(e.kind == EventKind::Reset ? counts[k].resets : counts[k].jumps);
        counts[k].singular = tr.singular_hits;
    });
    for (std::size_t k = 0; k < c.trajectories; ++k) {
        auto meta = c.echo();
        meta["command"] = "simulate";
        meta["trajectory"] = std::to_string(k);
        meta["stream_seed"] = std::to_string(stream_seed(c.seed, k));
        write_metadata(dir / ("traj_" + std::to_string(k) + ".csv"), meta);
    }
    const fs::path summary = dir / "ensemble_summary.csv";
    CsvWriter w(summary, {"trajectory", "escapes", "jump_events", "reset_events", "singular_hits", "absorbed"});
    Counts total;
    for (std::size_t k = 0; k < c.trajectories; ++k) {
        const auto& n = counts[k];
        w.row(std::vector<std::string>{std::to_string(k), std::to_string(n.jumps + n.resets), std::to_string(n.jumps),
                                       std::to_string(n.resets), std::to_string(n.singular), std::to_string(n.absorbed)});
        total.jumps += n.jumps;
        total.resets += n.resets;
        total.singular += n.singular;
        total.absorbed += n.absorbed;
    }
    w.row(std::vector<std::string>{"total", std::to_string(total.jumps + total.resets), std::to_string(total.jumps),
                                   std::to_string(total.resets), std::to_string(total.singular),
                                   std::to_string(total.absorbed)});
    w.close();
    auto meta = c.echo();
    meta["command"] = "simulate";
    write_metadata(summary, meta);
    std::cout << "simulate: " << c.trajectories << " trajectories, " << total.jumps + total.resets << " escapes -> "
              << dir.string() << "\n";
}

// ---- green ----

Geometry mode_geometry(const std::string& mode) {
    if (mode == "d2") return Geometry::Planar;
    if (mode == "d3") return Geometry::Axial;
    return Geometry::Spherical;
}

SpectralField build_field(const RunConfig& c, Geometry g, const QuadratureGrid& grid, int mode_max) {
    if (c.epsilon) return make_green_epsilon(c.params(), g, grid, mode_max, *c.epsilon);
    return make_green(c.params(), g, grid, mode_max);
}

void cmd_green(const RunConfig& c, const std::string& mode) {
    c.validate();
    if (mode == "epsilon" && !c.epsilon) throw ConfigError("config field 'epsilon': required by green epsilon");
    if (c.epsilon && c.r_start < *c.epsilon) throw ConfigError("config field 'r_start': must be >= epsilon");
    const Geometry g = mode_geometry(mode);
    const int D = geometry_dimension(g, c.D);
    const fs::path dir = c.out;
    const auto times = c.times();
    const auto radii = c.radii();
    std::vector<double> angles{0.0};
    if (g != Geometry::Spherical) {
        const double lo = c.theta_start.value_or(g == Geometry::Planar ? -0.5 * std::numbers::pi : 0.0);
        const double hi = c.theta_end.value_or(g == Geometry::Planar ? 0.5 * std::numbers::pi : std::numbers::pi);
        angles.clear();
        for (int j = 0; j < c.theta_points; ++j)
            angles.push_back(c.theta_points > 1 ? lo + (hi - lo) * j / (c.theta_points - 1) : lo);
    }
    const auto grid = c.epsilon ? make_graded_k_grid(c.k_max, c.k_nodes, 16, 1.0, 60, 0.7) : make_k_grid(c.k_max, c.k_nodes);
    const SpectralField f = build_field(c, g, grid, c.mode_max);
    const SpectralField ref = build_field(c, g, refine(grid), g == Geometry::Spherical ? 0 : c.mode_max + 10);
    const std::size_t na = angles.size(), nt = times.size();

    // values[(i * na + a) * nt + j] at radii[i], angles[a], times[j].
    std::vector<double> values(radii.size() * na * nt);
    parallel_for(radii.size(), c.worker_count(), [&](std::size_t i) {
        const auto v = f.values(radii[i], angles, times);
        const auto w = ref.values(radii[i], angles, times);
        for (std::size_t q = 0; q < v.size(); ++q)
            if (std::abs(v[q] - w[q]) > 1e-3 * std::max(1.0, std::abs(w[q])))
                throw ConvergenceError("green: quadrature not converged at r = " + format_number(radii[i]));
        std::copy(v.begin(), v.end(), values.begin() + i * na * nt);
    });

    if (c.modified) {
        if (c.epsilon) throw ConfigError("config field 'modified': not available with a cutoff");
        std::vector<std::size_t> idx;
        for (double t : times) {
            const double q = t / c.fp_dt;
            if (std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, q))
                throw ConfigError("config field 'fp_dt': every field time must be a multiple of fp_dt when modified = true");
            idx.push_back(static_cast<std::size_t>(std::llround(q)));
        }
        const auto series_times = uniform_times(c.fp_dt, times.back());
        const auto s = survival_series(D, c.h, series_times, c.worker_count());
        const auto m = modified_field(batch_from_field(f), s, radii, angles, series_times.size(), c.modification(),
                                      c.worker_count());
        const std::size_t ns = series_times.size();
        for (std::size_t i = 0; i < radii.size(); ++i)
            for (std::size_t a = 0; a < na; ++a)
                for (std::size_t j = 0; j < nt; ++j) values[(i * na + a) * nt + j] = m[(i * na + a) * ns + idx[j]];
    }

    const fs::path csv = dir / "green.csv";
    CsvWriter w(csv, {"t", "r", "theta", "value"});
    for (std::size_t j = 0; j < nt; ++j)
        for (std::size_t i = 0; i < radii.size(); ++i)
            for (std::size_t a = 0; a < na; ++a)
                w.row(std::vector<double>{times[j], radii[i], angles[a], values[(i * na + a) * nt + j]});
    w.close();
    auto meta = c.echo();
    meta["command"] = "green";
    meta["mode"] = mode;
    meta["geometry"] = geometry_name(g);
    meta["D"] = std::to_string(D);
    meta["excluded_modes"] = join(f.excluded_modes);
    meta["grid_hash"] = grid_hash({times, radii, angles});
    meta["modified"] = c.modified ? "true" : "false";
    write_metadata(csv, meta);

    const std::string what = c.modified ? "modified G" : "G";
    if (g == Geometry::Spherical) {
        std::vector<plot::Series> series;
        for (std::size_t j = 0; j < nt; ++j) {
            plot::Series s{"t=2^" + plot::detail::num(std::log2(times[j])), radii, {}};
            for (std::size_t i = 0; i < radii.size(); ++i) s.y.push_back(values[i * nt + j]);
            series.push_back(std::move(s));
        }
        plot::line_chart(dir / "green.svg", series, {what + "(r,t), D=" + std::to_string(D), "r", what, false});
    } else {
        for (std::size_t j = 0; j < nt; ++j) {
            std::vector<double> slice(radii.size() * na);
            for (std::size_t i = 0; i < radii.size(); ++i)
                for (std::size_t a = 0; a < na; ++a) slice[i * na + a] = values[(i * na + a) * nt + j];
            plot::heatmap(dir / ("green_t" + std::to_string(j) + ".svg"), radii, angles, slice,
                          {what + " D=" + std::to_string(D) + ", t=" + plot::detail::num(times[j]), "r", "theta", false});
        }
    }
    std::cout << "green " << mode << ": " << radii.size() * na * nt << " values -> " << csv.string() << "\n";
}

// ---- unitarity ----

ProbabilitySeries run_unitarity(const RunConfig& c, const fs::path& dir) {
    const auto times = uniform_times(c.fp_dt, c.t_end);
    const auto s = survival_series(c.D, c.h, times, c.worker_count());
    const fs::path csv = dir / ("unitarity_D" + std::to_string(c.D) + ".csv");
    CsvWriter w(csv, {"t", "N", "Ndot"});
    for (std::size_t i = 0; i < times.size(); ++i) w.row(std::vector<double>{s.times[i], s.N[i], s.Ndot[i]});
    w.close();
    auto meta = c.echo();
    meta["command"] = "unitarity";
    write_metadata(csv, meta);
    return s;
}

void cmd_unitarity(const RunConfig& c) {
    c.validate();
    const fs::path dir = c.out;
    const auto s = run_unitarity(c, dir);
    plot::Series line{"D=" + std::to_string(c.D), {}, {}};
    for (std::size_t i = 1; i < s.times.size(); ++i) {
        line.x.push_back(s.times[i]);
        line.y.push_back(s.N[i]);
    }
    plot::line_chart(dir / ("unitarity_D" + std::to_string(c.D) + ".svg"), {line}, {"total probability", "t", "N(t)", true});
    std::cout << "unitarity: N(" << format_number(s.times.back()) << ") = " << format_number(s.N.back()) << "\n";
}

// ---- fractal ----

void write_hurst(const RunConfig& c, const HurstSeries& H, const fs::path& dir, const std::string& route) {
    const fs::path csv = dir / "hurst.csv";
    CsvWriter w(csv, {"t", "Hr", "Htheta", "H", "Df"});
    for (std::size_t i = 0; i < H.times.size(); ++i)
        w.row(std::vector<double>{H.times[i], H.H_r[i], H.H_theta[i], H.H[i], H.D_f[i]});
    w.close();
    auto meta = c.echo();
    meta["command"] = "fractal";
    meta["route"] = route;
    write_metadata(csv, meta);
    const std::string tag = "D=" + std::to_string(c.D) + (c.epsilon ? ", eps=" + format_number(*c.epsilon) : "");
    plot::line_chart(dir / "hurst.svg", {{"H_r", H.times, H.H_r}, {"H_theta", H.times, H.H_theta}, {"H", H.times, H.H}},
                     {"Hurst exponents, " + tag, "t", "H", false});
    plot::line_chart(dir / "fractal_dimension.svg", {{"D_f", H.times, H.D_f}}, {"latent fractal dimension, " + tag, "t", "D_f", false});
}

HurstSeries run_analytic(const RunConfig& c) {
    PipelineConfig pc;
    pc.params = c.params();
    pc.geometry = c.D == 2 ? Geometry::Planar : Geometry::Axial;
    pc.k_max = c.k_max;
    pc.k_nodes = c.k_nodes;
    pc.dt = c.fp_dt;
    pc.window = c.window();
    pc.order = c.modification();
    pc.epsilon = c.epsilon;
    pc.threads = c.worker_count();
    return run_hurst_pipeline(pc).hurst;
}

void cmd_fractal(const RunConfig& c, const std::string& route) {
    c.validate();
    const fs::path dir = c.out;
    if (route == "analytic") {
        const auto H = run_analytic(c);
        write_hurst(c, H, dir, route);
        std::cout << "fractal analytic: median D_f = " << format_number(median(H.D_f)) << "\n";
        return;
    }
    // Ensemble moments: each Euler step of size fp_dt advances Fokker-Planck time by fp_dt.
    DipoleParams matched = c.params();
    matched.d_H = matched_strength(c.D, c.h, c.fp_dt);
    const auto steps = static_cast<std::size_t>(std::ceil(c.window_end / c.fp_dt)) + 1;
    const auto m = ensemble_moments(unit_start(c.D), c.fp_dt, steps, c.recovery_rule(), matched, c.seed, c.trajectories,
                                    c.worker_count());
    const auto H = hurst_series(m, c.window());
    write_hurst(c, H, dir, route);

    // Box counting and multifractal spectrum of one trajectory with the configured d_H and dt.
    const auto tr = simulate_trajectory(unit_start(c.D), c.dt, c.steps, c.recovery_rule(), c.params(), stream_seed(c.seed, 0));
    const auto meshes = mesh_ladder(trajectory_extent(tr.positions));
    const auto bc = box_counting(tr.positions, meshes);
    const fs::path bcsv = dir / "boxcount.csv";
    CsvWriter bw(bcsv, {"mesh", "count"});
    for (std::size_t i = 0; i < bc.mesh.size(); ++i)
        bw.row(std::vector<std::string>{format_number(bc.mesh[i]), std::to_string(bc.count[i])});
    bw.close();
    auto meta = c.echo();
    meta["command"] = "fractal";
    meta["route"] = route;
    meta["F0"] = format_number(bc.F0);
    meta["r_squared"] = format_number(bc.r_squared);
    write_metadata(bcsv, meta);

    const std::vector<double> T_list{0.0, 0.5, 1.0, 2.0, 3.0};
    const auto mf = multifractal_free_energy(cell_probabilities(tr.positions, meshes), meshes, T_list);
    const fs::path mcsv = dir / "multifractal.csv";
    CsvWriter mw(mcsv, {"T", "F", "Dq"});
    for (const auto& q : mf) mw.row(std::vector<double>{q.T, q.F, q.Dq});
    mw.close();
    meta.erase("F0");
    meta.erase("r_squared");
    write_metadata(mcsv, meta);

    plot::Series s{"N(l)", {}, {}};
    for (std::size_t i = 0; i < bc.mesh.size(); ++i) {
        s.x.push_back(std::log2(1.0 / bc.mesh[i]));
        s.y.push_back(std::log2(static_cast<double>(bc.count[i])));
    }
    plot::line_chart(dir / "boxcount.svg", {s}, {"box counting, F0=" + plot::detail::num(bc.F0), "log2(1/l)", "log2 N", false});
    std::cout << "fractal montecarlo: median D_f = " << format_number(median(H.D_f)) << ", F0 = " << format_number(bc.F0)
              << "\n";
}

// ---- reproduce ----

const std::vector<std::string> figure_ids{"fig1a", "fig1b", "fig2", "fig3a", "fig3b", "fig4",
                                          "fig5",  "fig6",  "fig9", "fig10", "fig11"};

void cmd_reproduce(RunConfig c, const std::string& id) {
    c.validate();
    const fs::path root = fs::path(c.out) / id;
    auto at = [&](const std::string& sub) {
        RunConfig x = c;
        x.out = (root / sub).string();
        return x;
    };
    if (id == "fig1a" || id == "fig1b") {
        auto x = at("");
        x.D = id == "fig1a" ? 2 : 3;
        x.t_start = std::pow(2.0, -9);
        x.t_end = 1.0;
        x.t_points = 10;
        x.t_spacing = "log";
        cmd_green(x, "spherical");
    } else if (id == "fig2") {
        for (int D : {2, 3}) {
            auto x = at("");
            x.D = D;
            x.t_end = 1.0;
            cmd_unitarity(x);
        }
    } else if (id == "fig3a" || id == "fig3b") {
        auto x = at("");
        x.t_start = x.t_end = std::pow(2.0, -8);
        x.t_points = 1;
        x.r_start = 0.5;
        x.r_end = 3.0;
        cmd_green(x, id == "fig3a" ? "d2" : "d3");
    } else if (id == "fig4") {
        auto x = at("");
        x.t_start = std::pow(2.0, -8);
        x.t_end = std::pow(2.0, -5);
        x.t_points = 4;
        x.r_start = 0.5;
        x.r_end = 3.0;
        x.modified = true;
        cmd_green(x, "d2");
    } else if (id == "fig5" || id == "fig6") {
        auto x = at("");
        x.D = id == "fig5" ? 2 : 3;
        cmd_fractal(x, "analytic");
    } else if (id == "fig9") {
        for (int D : {2, 3}) {
            auto x = at("D" + std::to_string(D));
            x.D = D;
            cmd_fractal(x, "analytic");
        }
    } else if (id == "fig10") {
        for (int D : {2, 3}) {
            auto x = at("D" + std::to_string(D));
            x.D = D;
            x.epsilon = c.epsilon.value_or(0.5);
            x.r_start = *x.epsilon;
            x.t_start = std::pow(2.0, -9);
            x.t_end = 1.0;
            x.t_points = 10;
            cmd_green(x, "epsilon");
        }
    } else if (id == "fig11") {
        for (int D : {2, 3}) {
            auto x = at("D" + std::to_string(D));
            x.D = D;
            x.epsilon = c.epsilon.value_or(0.5);
            cmd_fractal(x, "analytic");
        }
    } else {
        std::string known;
        for (const auto& f : figure_ids) known += " " + f;
        throw ConfigError("unknown figure id '" + id + "'; known:" + known);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomly modulated dipole: Monte Carlo and Fokker-Planck spectral routes"};
    app.set_help_flag("--help", "print this help message and exit");  // -h would clash with --h
    app.set_config("--config", "", "key = value configuration file");
    app.require_subcommand(1);
    app.fallthrough();

    RunConfig c;
    app.add_option("--seed", c.seed, "master RNG seed");
    app.add_option("--out", c.out, "output directory");
    app.add_option("--threads", c.threads, "worker threads (0: hardware parallelism)");
    app.add_option("--D", c.D, "spatial dimension (2 or 3)");
    app.add_option("--d_H", c.d_H, "dipole strength");
    app.add_option("--h", c.h, "diffusion constant of the Fokker-Planck equation");
    app.add_option("--k_max", c.k_max, "spectral cutoff");
    app.add_option("--k_nodes", c.k_nodes, "spectral quadrature nodes");
    app.add_option("--mode_max", c.mode_max, "highest angular mode");
    app.add_option("--dt", c.dt, "Euler step of the simulator");
    app.add_option("--steps", c.steps, "Euler steps per trajectory");
    app.add_option("--trajectories", c.trajectories, "ensemble size");
    app.add_option("--stride", c.stride, "trajectory rows kept: every stride-th step");
    app.add_option("--L", c.L, "recovery box half-width");
    app.add_option("--recovery", c.recovery, "periodic, reset or none");
    app.add_option("--epsilon", c.epsilon, "reflecting cutoff radius in (0, 1)");
    app.add_option("--modified", c.modified, "export the recovered density (true/false)");
    app.add_option("--t_start", c.t_start, "first field time");
    app.add_option("--t_end", c.t_end, "last field time (also the unitarity horizon)");
    app.add_option("--t_points", c.t_points, "field times");
    app.add_option("--t_spacing", c.t_spacing, "log or uniform");
    app.add_option("--r_start", c.r_start, "first field radius");
    app.add_option("--r_end", c.r_end, "last field radius");
    app.add_option("--r_points", c.r_points, "field radii");
    app.add_option("--theta_start", c.theta_start, "first field angle");
    app.add_option("--theta_end", c.theta_end, "last field angle");
    app.add_option("--theta_points", c.theta_points, "field angles");
    app.add_option("--fp_dt", c.fp_dt, "step of the probability series");
    app.add_option("--window_start", c.window_start, "Hurst window start");
    app.add_option("--window_end", c.window_end, "Hurst window end");
    app.add_option("--window_skip", c.window_skip, "leading window points dropped (-1: 0 for D=2, 2 for D=3)");
    app.add_option("--order", c.order, "recovery modification: none, first, second, third or volterra");

    std::string green_mode, route, figure;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo trajectories and ensemble summary");
    auto* green = app.add_subcommand("green", "Green's function field on a grid");
    green->add_option("mode", green_mode, "spherical, d2, d3 or epsilon")
        ->required()
        ->check(CLI::IsMember({"spherical", "d2", "d3", "epsilon"}));
    auto* uni = app.add_subcommand("unitarity", "total probability N(t) and its derivative");
    auto* frac = app.add_subcommand("fractal", "Hurst exponents and fractal dimensions");
    frac->add_option("route", route, "analytic or montecarlo")->required()->check(CLI::IsMember({"analytic", "montecarlo"}));
    auto* rep = app.add_subcommand("reproduce", "all artifacts for one figure");
    rep->add_option("figure", figure, "figure id")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim->parsed()) cmd_simulate(c);
        else if (green->parsed()) cmd_green(c, green_mode);
        else if (uni->parsed()) cmd_unitarity(c);
        else if (frac->parsed()) cmd_fractal(c, route);
        else if (rep->parsed()) cmd_reproduce(c, figure);
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    } catch (const ConvergenceError& e) {
        std::cerr << "convergence failure: " << e.what() << "\n";
        return 3;
    } catch (const SingularityError& e) {
        std::cerr << "singularity: " << e.what() << "\n";
        return 3;
    } catch (const DegenerateFitError& e) {
        std::cerr << "degenerate fit: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
