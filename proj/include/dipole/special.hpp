#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dipole {

namespace detail {

inline void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::domain_error(std::string(what) + " must be finite");
}

// Hankel expansion of J and Y for large x. Stops at the smallest term.
inline void bessel_jy_asymptotic(double nu, double x, double& j, double& y) {
    const double mu = 4.0 * nu * nu;
    double p = 1.0, q = 0.0, term = 1.0, last = 1.0;
    for (int k = 1; k < 200; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= (mu - odd * odd) / (k * 8.0 * x);
        const double a = std::abs(term);
        if (a > last && k > 2) break;
        // a_k / x^k: even k feed P, odd k feed Q, signs alternate in pairs
        switch (k % 4) {
            case 1: q += term; break;
            case 2: p -= term; break;
            case 3: q -= term; break;
            default: p += term; break;
        }
        if (a < 1e-17 * (std::abs(p) + std::abs(q))) break;
        last = a;
    }
    const double chi = x - (0.5 * nu + 0.25) * std::numbers::pi;
    const double amp = std::sqrt(2.0 / (std::numbers::pi * x));
    const double c = std::cos(chi), s = std::sin(chi);
    j = amp * (p * c - q * s);
    y = amp * (p * s + q * c);
}

inline double asymptotic_threshold(double nu) { return std::max(40.0, 1.2 * nu * nu); }

}  // namespace detail

// J_nu(x), nu >= 0, x >= 0.
inline double bessel_j(double nu, double x) {
    detail::require_finite(nu, "bessel order");
    detail::require_finite(x, "bessel argument");
    if (nu < 0.0 || x < 0.0) throw std::domain_error("bessel_j needs nu >= 0 and x >= 0");
    if (x == 0.0) return nu == 0.0 ? 1.0 : 0.0;
    if (x >= detail::asymptotic_threshold(nu)) {
        double j, y;
        detail::bessel_jy_asymptotic(nu, x, j, y);
        return j;
    }
    return std::cyl_bessel_j(nu, x);
}

// Y_nu(x), nu >= 0, x > 0.
inline double bessel_y(double nu, double x) {
    detail::require_finite(nu, "bessel order");
    detail::require_finite(x, "bessel argument");
    if (nu < 0.0 || x <= 0.0) throw std::domain_error("bessel_y needs nu >= 0 and x > 0");
    if (x >= detail::asymptotic_threshold(nu)) {
        double j, y;
        detail::bessel_jy_asymptotic(nu, x, j, y);
        return y;
    }
    return std::cyl_neumann(nu, x);
}

inline bool is_integer_order(double nu) { return std::abs(nu - std::round(nu)) < 1e-12; }

// J_{-nu}(x) for non-integer nu > 0.
inline double bessel_j_negative(double nu, double x) {
    detail::require_finite(nu, "bessel order");
    detail::require_finite(x, "bessel argument");
    if (nu <= 0.0 || x <= 0.0) throw std::domain_error("bessel_j_negative needs nu > 0 and x > 0");
    if (is_integer_order(nu)) throw std::domain_error("bessel_j_negative: integer order aliases J_n");
    const double s = std::sin(nu * std::numbers::pi), c = std::cos(nu * std::numbers::pi);
    if (x < 2.0) {
        // direct series avoids cancellation in cos*J - sin*Y near the origin
        const double h = 0.5 * x, h2 = h * h;
        double term = std::pow(h, -nu) / std::tgamma(1.0 - nu);
        double sum = term;
        for (int m = 1; m < 200; ++m) {
            term *= -h2 / (m * (m - nu));
            sum += term;
            if (std::abs(term) < 1e-17 * std::abs(sum)) break;
        }
        return sum;
    }
    return c * bessel_j(nu, x) - s * bessel_y(nu, x);
}

// J_alpha(x) for any real alpha (x > 0 when alpha < 0).
inline double bessel_j_real(double alpha, double x) {
    if (alpha >= 0.0) return bessel_j(alpha, x);
    if (is_integer_order(alpha)) {
        const long n = std::lround(-alpha);
        return (n % 2 ? -1.0 : 1.0) * bessel_j(static_cast<double>(n), x);
    }
    return bessel_j_negative(-alpha, x);
}

// dJ_alpha/dx = J_{alpha-1} - (alpha/x) J_alpha.
inline double bessel_j_derivative(double alpha, double x) {
    if (x <= 0.0) throw std::domain_error("bessel_j_derivative needs x > 0");
    return bessel_j_real(alpha - 1.0, x) - alpha / x * bessel_j_real(alpha, x);
}

inline double legendre_p(int l, double x) {
    if (l < 0) throw std::domain_error("legendre_p needs l >= 0");
    if (!(std::abs(x) <= 1.0)) throw std::domain_error("legendre_p needs |x| <= 1");
    if (l == 0) return 1.0;
    double p0 = 1.0, p1 = x;
    for (int n = 1; n < l; ++n) {
        const double p2 = ((2.0 * n + 1.0) * x * p1 - n * p0) / (n + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

struct QuadratureGrid {
    std::vector<double> nodes;
    std::vector<double> weights;
    double k_max = 0.0;
    std::vector<double> edges;  // panel boundaries
    int order = 0;              // nodes per panel

    std::size_t size() const { return nodes.size(); }
};

// Gauss-Legendre nodes and weights on [-1, 1] (Newton on the three-term recurrence).
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    if (n < 1) throw std::invalid_argument("gauss_legendre needs n >= 1");
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 1; k < n; ++k) {
                const double p2 = ((2.0 * k + 1.0) * z * p1 - k * p0) / (k + 1.0);
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        {
            double p0 = 1.0, p1 = z;
            for (int k = 1; k < n; ++k) {
                const double p2 = ((2.0 * k + 1.0) * z * p1 - k * p0) / (k + 1.0);
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    if (n % 2) x[n / 2] = 0.0;
}

// Gauss-Legendre rule of `order` nodes on every panel [edges[p], edges[p+1]].
inline QuadratureGrid panel_gauss(std::vector<double> edges, int order) {
    if (edges.size() < 2) throw std::invalid_argument("panel_gauss needs at least one panel");
    for (std::size_t p = 0; p + 1 < edges.size(); ++p)
        if (!(edges[p + 1] > edges[p])) throw std::invalid_argument("panel edges must increase");
    std::vector<double> x, w;
    gauss_legendre(order, x, w);
    QuadratureGrid g;
    g.k_max = edges.back();
    g.order = order;
    g.nodes.reserve((edges.size() - 1) * order);
    g.weights.reserve(g.nodes.capacity());
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        const double mid = 0.5 * (edges[p] + edges[p + 1]), half = 0.5 * (edges[p + 1] - edges[p]);
        for (int i = 0; i < order; ++i) {
            g.nodes.push_back(mid + half * x[i]);
            g.weights.push_back(half * w[i]);
        }
    }
    g.edges = std::move(edges);
    return g;
}

// Composite Gauss-Legendre rule on [a, b] with equal panels.
inline QuadratureGrid composite_gauss(double a, double b, int panels, int order) {
    if (!(b > a) || panels < 1) throw std::invalid_argument("composite_gauss needs b > a and panels >= 1");
    std::vector<double> edges(panels + 1);
    for (int p = 0; p <= panels; ++p) edges[p] = a + (b - a) * p / panels;
    edges.back() = b;
    return panel_gauss(std::move(edges), order);
}

// Default k-grid: `nodes` Gauss-Legendre nodes on [0, k_max] in panels of `order`.
inline QuadratureGrid make_k_grid(double k_max = 60.0, int nodes = 2048, int order = 16) {
    if (!(k_max > 0.0)) throw std::invalid_argument("k_max must be positive");
    if (nodes < order || nodes % order) throw std::invalid_argument("node count must be a multiple of the panel order");
    return composite_gauss(0.0, k_max, nodes / order, order);
}

// Uniform panels above k_split, geometrically shrinking panels below it.
// Resolves integrable power-law behavior at k = 0.
inline QuadratureGrid make_graded_k_grid(double k_max, int nodes, int order = 16, double k_split = 1.0,
                                         int graded_panels = 24, double ratio = 0.5) {
    if (!(k_split > 0.0 && k_split < k_max)) throw std::invalid_argument("k_split must lie inside (0, k_max)");
    std::vector<double> edges{0.0};
    for (int i = graded_panels - 1; i >= 0; --i) edges.push_back(k_split * std::pow(ratio, i));
    const int rest = std::max(1, nodes / order - graded_panels - 1);
    for (int p = 1; p <= rest; ++p) edges.push_back(k_split + (k_max - k_split) * p / rest);
    return panel_gauss(std::move(edges), order);
}

// Splits every panel in two: twice the nodes, same panel order.
inline QuadratureGrid refine(const QuadratureGrid& g) {
    if (g.edges.size() < 2 || g.order < 1) throw std::invalid_argument("refine needs a panel grid");
    std::vector<double> e;
    e.reserve(2 * g.edges.size());
    for (std::size_t p = 0; p + 1 < g.edges.size(); ++p) {
        e.push_back(g.edges[p]);
        e.push_back(0.5 * (g.edges[p] + g.edges[p + 1]));
    }
    e.push_back(g.edges.back());
    return panel_gauss(std::move(e), g.order);
}

// Largest oscillation rate (radians per unit k) the grid resolves at pi/4 per mean node spacing.
inline double resolvable_rate(const QuadratureGrid& g) {
    return (std::numbers::pi / 4.0) * static_cast<double>(g.size()) / g.k_max;
}

inline double integrate_k(const std::function<double(double)>& f, const QuadratureGrid& grid) {
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) s += grid.weights[i] * f(grid.nodes[i]);
    return s;
}

struct HankelResult {
    std::vector<double> values;
    bool decay_ok = true;
};

// f~(k) = int x f(x) J_nu(k x) dx with f sampled on the nodes of `xgrid`; output on the nodes of `kgrid`.
inline HankelResult hankel_transform(std::span<const double> f, double nu, const QuadratureGrid& xgrid,
                                     const QuadratureGrid& kgrid) {
    if (f.size() != xgrid.size()) throw std::invalid_argument("hankel_transform: sample count mismatch");
    HankelResult out;
    double fmax = 0.0;
    for (double v : f) fmax = std::max(fmax, std::abs(v));
    out.decay_ok = f.empty() || std::abs(f.back()) < 1e-6 * fmax;
    out.values.assign(kgrid.size(), 0.0);
    for (std::size_t j = 0; j < kgrid.size(); ++j) {
        const double k = kgrid.nodes[j];
        double s = 0.0;
        for (std::size_t i = 0; i < xgrid.size(); ++i) {
            const double x = xgrid.nodes[i];
            s += xgrid.weights[i] * x * f[i] * bessel_j(nu, k * x);
        }
        out.values[j] = s;
    }
    return out;
}

}  // namespace dipole
