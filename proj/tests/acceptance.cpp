// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion; exits 1 if any numbered
// criterion fails. The box-counting soft target is reported but does not affect the exit status.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "dipole/fractal.hpp"
#include "dipole/sde.hpp"
#include "dipole/spectral.hpp"
#include "dipole/unitarity.hpp"

using namespace dipole;

namespace {

int failures = 0;

void report(const std::string& id, bool ok, const std::string& detail, bool counts = true) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok && counts) ++failures;
}

std::string fmt(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.4g", v);
    return b;
}

double lo(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }
double hi(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

std::string range(const std::vector<double>& v) { return "[" + fmt(lo(v)) + ", " + fmt(hi(v)) + "]"; }

PipelineConfig pipeline(int D) {
    PipelineConfig c;
    c.params = {D, 1.0, 1.0};
    c.geometry = D == 2 ? Geometry::Planar : Geometry::Axial;
    c.window = {std::pow(2.0, -9), 0.03, static_cast<std::size_t>(D == 3 ? 2 : 0)};
    return c;
}

// ---- 1 to 3: latent fractal dimension and Hurst windows ----

void fractal_dimension(const HurstSeries& h2, const HurstSeries& h3) {
    const double m2 = median(h2.D_f), m3 = median(h3.D_f);
    report("criterion 1", lo(h2.D_f) >= 1.5 && hi(h2.D_f) <= 1.9 && m2 >= 1.6 && m2 <= 1.8,
           "D=2 D_f in " + range(h2.D_f) + " (want [1.5, 1.9]), median " + fmt(m2) + " (want [1.6, 1.8])");
    report("criterion 2", m3 >= 2.2 && m3 <= 2.6,
           "D=3 median D_f " + fmt(m3) + " (want [2.2, 2.6]), range " + range(h3.D_f));

    const bool r2 = lo(h2.H_r) > 0.55 && hi(h2.H_r) < 0.85;
    const bool th2 = lo(h2.H_theta) > 0.35 && hi(h2.H_theta) < 0.65;
    const double mr3 = median(h3.H_r);
    const bool r3 = mr3 >= 0.15 && mr3 <= 0.30;
    const bool th3 = lo(h3.H_theta) > 0.45 && hi(h3.H_theta) < 0.65;
    report("criterion 3", r2 && th2 && r3 && th3,
           "D=2 H_r " + range(h2.H_r) + " (want (0.55, 0.85)), H_theta " + range(h2.H_theta) +
               " (want (0.35, 0.65)); D=3 median H_r " + fmt(mr3) + " (want [0.15, 0.30]), H_theta " +
               range(h3.H_theta) + " (want (0.45, 0.65))");
}

// ---- 4: probability decay ----

void probability_decay() {
    const double a = survival_probability(3, 1.0, std::pow(2.0, -9));
    const double b = survival_probability(3, 1.0, 0.25);
    const double c = survival_probability(3, 1.0, 1.0);
    bool slower = true;
    double worst = 1.0;
    for (int i = 0; i <= 36; ++i) {
        const double t = std::pow(2.0, -9 + 0.25 * i);
        const double gap = survival_probability(2, 1.0, t) - survival_probability(3, 1.0, t);
        worst = std::min(worst, gap);
        slower = slower && gap > 0.0;
    }
    report("criterion 4", a > 0.95 && b < 0.2 && c < 0.1 && slower,
           "D=3 N(2^-9)=" + fmt(a) + " N(0.25)=" + fmt(b) + " N(1)=" + fmt(c) +
               "; min N_2 - N_3 over t in [2^-9, 1] = " + fmt(worst));
}

// ---- 5: unitarity restoration ----

void unitarity(const PipelineResult& r2, const PipelineResult& r3) {
    const double t_lo = std::pow(2.0, -9), t_hi = std::pow(2.0, -5);
    std::string detail;
    bool ok = true;
    for (const auto* r : {&r2, &r3}) {
        const int D = r == &r2 ? 2 : 3;
        const auto v = modify_series(r->plain.M0, r->survival, Modification::Volterra);
        const auto n2 = modify_series(r->plain.M0, r->survival, Modification::SecondOrder);
        double ev = 0.0, e2 = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double t = r->plain.times[i];
            if (t < t_lo * (1 - 1e-12) || t > t_hi * (1 + 1e-12)) continue;
            ev = std::max(ev, std::abs(v[i] - 1.0));
            e2 = std::max(e2, std::abs(n2[i] - 1.0));
        }
        ok = ok && ev <= 0.02 && e2 <= 0.05;
        detail += (D == 2 ? "" : "; ") + std::string("D=") + std::to_string(D) + " max |total - 1| Volterra " + fmt(ev) +
                  " (want 0.02), second order " + fmt(e2) + " (want 0.05)";
    }
    report("criterion 5", ok, detail + ", t in [2^-9, 2^-5]");
}

// ---- 6: Fokker-Planck residuals ----

void residuals() {
    const auto k = make_k_grid();
    const DipoleParams p2{2, 1.0, 1.0}, p3{3, 1.0, 1.0};
    ResidualGrid grid;
    for (double r = 0.5; r <= 2.0001; r += 0.25) grid.r.push_back(r);
    for (double t = std::pow(2.0, -8); t <= std::pow(2.0, -4) * 1.0001; t *= 2) grid.times.push_back(t);
    std::vector<double> rel;
    rel.push_back(fp_residual(batch_from_field(make_green_spherical(p2, k)), p2, Geometry::Spherical, grid).relative());
    rel.push_back(fp_residual(batch_from_field(make_green_spherical(p3, k)), p3, Geometry::Spherical, grid).relative());
    grid.angles = {0.0, 0.6, 2.0};
    rel.push_back(fp_residual(batch_from_field(make_green_2d(p2, k)), p2, Geometry::Planar, grid).relative());
    grid.angles = {0.3, 1.2, 2.4};
    rel.push_back(fp_residual(batch_from_field(make_green_3d(p3, k)), p3, Geometry::Axial, grid).relative());

    ResidualGrid eg;
    for (double r = 0.3; r <= 2.0; r += 0.1) eg.r.push_back(r);
    eg.times = {0.01, 0.05, 0.2, 1.0};
    double exact = 0.0;
    for (const auto& p : {p2, p3}) {
        auto P = batch_from_point([&](double r, double, double t) { return op_exact_solution(p, r, t); });
        exact = std::max(exact, fp_residual(P, p, Geometry::Spherical, eg).relative());
    }
    const bool ok = hi(rel) < 1e-3 && exact < 1e-5;
    report("criterion 6", ok,
           "relative residual spherical D=2 " + fmt(rel[0]) + ", D=3 " + fmt(rel[1]) + ", planar " + fmt(rel[2]) +
               ", axial " + fmt(rel[3]) + " (want 1e-3); exact solution " + fmt(exact) + " (want 1e-5)");
}

// ---- 7: Monte Carlo against the spectral radial law ----

void cross_route() {
    const int D = 3;
    const double t = std::pow(2.0, -7), dt = std::pow(2.0, -17);
    const DipoleParams p{D, matched_strength(D, 1.0, dt), 1.0};
    const auto steps = static_cast<std::size_t>(std::llround(t / dt));
    const auto pts = ensemble_endpoints({1, 0, 0}, dt, steps, RecoveryRule::none(), p, 2024, 10000);
    std::vector<double> r;
    for (const auto& x : pts)
        if (!x.empty()) r.push_back(norm(x));
    std::sort(r.begin(), r.end());

    // Surviving mass in the spectral solution sits within r < 3 at this time; the CDF is conditioned on it.
    const auto field = make_green_spherical(p, make_k_grid());
    const auto quad = composite_gauss(0.0, 3.0, 300, 8);
    std::vector<double> edges{0.0}, cdf{0.0};
    for (std::size_t i = 0; i < quad.size(); ++i) {
        const double rr = quad.nodes[i];
        cdf.push_back(cdf.back() + quad.weights[i] * std::pow(rr, D - 1.0) * std::max(0.0, field.value(rr, 0.0, t)));
        edges.push_back(rr);
    }
    for (double& c : cdf) c /= cdf.back();
    auto F = [&](double x) {
        if (x >= edges.back()) return 1.0;
        const auto it = std::upper_bound(edges.begin(), edges.end(), x);
        const std::size_t j = it - edges.begin();
        const double w = (x - edges[j - 1]) / (edges[j] - edges[j - 1]);
        return cdf[j - 1] + w * (cdf[j] - cdf[j - 1]);
    };
    double ks = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double f = F(r[i]);
        ks = std::max({ks, std::abs(f - static_cast<double>(i) / r.size()), std::abs(f - (i + 1.0) / r.size())});
    }
    report("criterion 7", ks < 0.05,
           "KS distance " + fmt(ks) + " (want < 0.05), " + std::to_string(r.size()) + " of 10000 trajectories survive");
}

// ---- 8: controls ----

void controls() {
    std::vector<double> t, d;
    for (int i = 1; i <= 50; ++i) {
        t.push_back(0.01 * i);
        d.push_back(2.0 * 0.01 * i);
    }
    double h_err = 0.0;
    for (double h : hurst(t, d)) h_err = std::max(h_err, std::abs(h - 0.5));

    std::vector<Vec> line;
    for (int i = 0; i <= 100000; ++i) line.push_back({0.3 + 0.6 * i / 1e5, -0.2 + 0.8 * i / 1e5});
    const double F_line = box_counting(line, mesh_ladder(trajectory_extent(line))).F0;

    const auto path = brownian_path(2, 100000, 7);
    const auto meshes = mesh_ladder(trajectory_extent(path));
    const double F_bm = box_counting(path, meshes).F0;
    const double F_T0 = multifractal_free_energy(cell_probabilities(path, meshes), meshes, std::vector<double>{0.0})[0].F;

    const bool ok = h_err < 1e-12 && std::abs(F_line - 1.0) <= 0.1 && std::abs(F_bm - 2.0) <= 0.15 && F_T0 == F_bm;
    report("criterion 8", ok,
           "hurst error " + fmt(h_err) + "; line F0 " + fmt(F_line) + " (want 1 +- 0.1); Brownian F0 " + fmt(F_bm) +
               " (want 2 +- 0.15); F(0) - F0 = " + fmt(F_T0 - F_bm));
}

// ---- 9: reflecting cutoff ----

void cutoff(const HurstSeries& plain2, const HurstSeries& plain3) {
    std::string detail;
    bool ok = true;
    for (int D : {2, 3}) {
        auto c = pipeline(D);
        c.epsilon = 0.5;
        const auto cut = run_hurst_pipeline(c).hurst;
        const auto& ref = D == 2 ? plain2 : plain3;
        const std::size_t n = std::min(cut.D_f.size(), ref.D_f.size());
        const double start = cut.D_f[0] - ref.D_f[0], end = std::abs(cut.D_f[n - 1] - ref.D_f[n - 1]);
        ok = ok && start > 0.0 && end < 0.2;
        detail += (D == 2 ? "" : "; ") + std::string("D=") + std::to_string(D) + " D_f(eps) - D_f at window start " +
                  fmt(start) + " (want > 0), |difference| at end " + fmt(end) + " (want < 0.2)";
    }
    report("criterion 9", ok, detail);
}

// ---- 10: scaling symmetry ----

void scaling() {
    // r <= 5 keeps r / 2 inside the radial domain of the analysis; beyond it the D = 3 field with
    // r0 = 2 oscillates faster than the k grid resolves.
    const auto k = make_k_grid();
    const double g = 2.0;
    double worst = 0.0;
    for (int D : {2, 3}) {
        const DipoleParams p{D, 1.0, 1.0};
        const auto G1 = make_green_spherical(p, k), G2 = make_green_spherical(p, k, g);
        for (double t1 : {std::pow(2.0, -6), std::pow(2.0, -4), 0.25})
            for (double r = 0.25; r <= 5.0001; r += 0.25)
                worst = std::max(worst,
                                 std::abs(G2.value(r, 0, rescale_time(D, g, t1)) - std::pow(g, -D) * G1.value(r / g, 0, t1)));
    }
    report("criterion 10", worst <= 1e-4,
           "max |G_2(r, t) - 2^-D G_1(r/2, t/2^(2D+2))| = " + fmt(worst) + " (want 1e-4), r in [0.25, 5], t1 in {2^-6, 2^-4, 1/4}");
}

// ---- soft target: box counting of dipole trajectories ----

void soft_target() {
    std::string detail;
    bool ok = true;
    for (int D : {2, 3}) {
        const double dt = 1e-4;
        const DipoleParams p{D, matched_strength(D, 1.0, dt), 1.0};
        std::vector<double> F;
        for (std::uint64_t k = 0; k < 8; ++k) {
            const auto tr = simulate_trajectory(Vec(D == 2 ? Vec{1, 0} : Vec{1, 0, 0}), dt, 100000,
                                                RecoveryRule::periodic(5.0), p, stream_seed(99, k));
            F.push_back(box_counting(tr.positions, mesh_ladder(trajectory_extent(tr.positions))).F0);
        }
        const double m = median(F);
        const bool in = D == 2 ? (m >= 1.5 && m <= 2.1) : (m >= 2.2 && m <= 2.9);
        ok = ok && in;
        detail += (D == 2 ? "" : "; ") + std::string("D=") + std::to_string(D) + " median F0 " + fmt(m) +
                  (D == 2 ? " (want [1.5, 2.1])" : " (want [2.2, 2.9])");
    }
    report("soft target", ok, detail, false);
}

}  // namespace

int main() {
    const auto r2 = run_hurst_pipeline(pipeline(2));
    const auto r3 = run_hurst_pipeline(pipeline(3));
    fractal_dimension(r2.hurst, r3.hurst);
    probability_decay();
    unitarity(r2, r3);
    residuals();
    cross_route();
    controls();
    cutoff(r2.hurst, r3.hurst);
    scaling();
    soft_target();
    std::printf("%d of 10 criteria failed\n", failures);
    return failures ? 1 : 0;
}
