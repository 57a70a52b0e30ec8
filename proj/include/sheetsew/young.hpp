#pragma once

// Regularization-by-noise demonstrator: averaged fields Gamma_{s,t}(x) built
// from a nonlinearity and a driving sheet (directly or through the local time
// of the reflected path), the 2D nonlinear Young integral as a Riemann sum of
// Gamma over dyadic cells, Picard iteration for the transformed Goursat
// problem, and the plug-in regularization condition checks. Spatial dimension
// n = 1 throughout.

#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sheetsew/conditioning.hpp"
#include "sheetsew/gaussian_field.hpp"
#include "sheetsew/multiindex.hpp"
#include "sheetsew/parallel.hpp"
#include "sheetsew/rng.hpp"

namespace sheetsew {

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

struct NonlinearitySpec {
    std::function<double(double)> smooth;  // closed form when set
    struct Mode {
        double freq, amp, phase;
    };
    std::vector<Mode> modes;     // b(x) = sum amp * cos(freq x + phase), real by construction
    double sobolev_index = 0.0;  // declared H^rho index of the table

    bool has_smooth() const { return static_cast<bool>(smooth); }

    double eval(double x) const
    {
        if (smooth) return smooth(x);
        double acc = 0.0;
        for (const auto& m : modes) acc += m.amp * std::cos(m.freq * x + m.phase);
        return acc;
    }

    static NonlinearitySpec from_function(std::function<double(double)> f)
    {
        NonlinearitySpec b;
        b.smooth = std::move(f);
        return b;
    }

    /// Band-limited surrogate of an H^rho element: modes at frequencies
    /// 1..n_modes with amplitudes k^-(rho + 0.6) and seeded random phases.
    static NonlinearitySpec band_limited(double rho, int n_modes, std::uint64_t seed,
                                         double amplitude = 1.0)
    {
        NonlinearitySpec b;
        b.sobolev_index = rho;
        RandomStream rng(seed, derive_stream(stream_purpose::kNonlinearity));
        for (int k = 1; k <= n_modes; ++k) {
            Mode m;
            m.freq = static_cast<double>(k);
            m.amp = amplitude * std::pow(static_cast<double>(k), -(rho + 0.6));
            m.phase = rng.uniform(0.0, 2.0 * M_PI);
            b.modes.push_back(m);
        }
        return b;
    }
};

// ---------------------------------------------------------------------------
// Averaged field Gamma_{s,t}(x)
// ---------------------------------------------------------------------------

enum class AveragedFieldRoute { Direct, Convolution };

/// Cumulative表 G(t)(x) = Gamma_{0,t}(x) on a dyadic time lattice; rectangle
/// values come from the signed corner combination (Gamma is additive by
/// construction), spatial evaluation is piecewise linear.
struct AveragedField {
    SampleGrid lattice;  // d=2 dyadic nodes
    double x_min = 0.0, dx = 0.0;
    int bins = 0;
    std::vector<double> G;  // [node_flat * (bins+1) + xindex]
    AveragedFieldRoute route = AveragedFieldRoute::Direct;

    int nodes1() const { return static_cast<int>(lattice.axes[0].size()); }
    int nodes2() const { return static_cast<int>(lattice.axes[1].size()); }

    double g_at(int i1, int i2, double x) const
    {
        const double pos = (x - x_min) / dx;
        if (pos < 0.0 || pos > bins)
            throw std::invalid_argument("AveragedField: x outside the spatial grid");
        const int j = std::min(static_cast<int>(pos), bins - 1);
        const double frac = pos - j;
        const double* row =
            G.data() + (static_cast<std::size_t>(i1) * nodes2() + i2) * (bins + 1);
        return row[j] * (1.0 - frac) + row[j + 1] * frac;
    }

    /// Gamma_{s,t}(x) for lattice-aligned corners.
    double gamma(const Point& s, const Point& t, double x) const
    {
        const int a1 = lattice.coord_index(0, s[0]), b1 = lattice.coord_index(0, t[0]);
        const int a2 = lattice.coord_index(1, s[1]), b2 = lattice.coord_index(1, t[1]);
        return g_at(b1, b2, x) - g_at(a1, b2, x) - g_at(b1, a2, x) + g_at(a1, a2, x);
    }
};

struct AveragedFieldSpec {
    int level = 6;                  // dyadic time lattice level
    double x_min = -3.0, x_max = 3.0;
    int bins = 256;
    AveragedFieldRoute route = AveragedFieldRoute::Direct;
};

/// Builds the cumulative averaged field over [0,T]^2 from a driving path
/// sampled on (at least) the dyadic lattice. Passing no path means w = 0.
/// Direct route: per-cell corner-average quadrature of b(x + w_r).
/// Convolution route: cell time-volumes deposited at the reflected-path value
/// and convolved with b on the shared spatial grid.
inline AveragedField averaged_field(const NonlinearitySpec& b, const Rect& box,
                                    const std::optional<FieldSample>& w,
                                    const AveragedFieldSpec& spec)
{
    if (spec.bins < 8) throw std::invalid_argument("averaged_field: too few bins");
    AveragedField f;
    f.lattice = SampleGrid::dyadic(box, spec.level);
    f.x_min = spec.x_min;
    f.bins = spec.bins;
    f.dx = (spec.x_max - spec.x_min) / spec.bins;
    f.route = spec.route;
    const int n1 = f.nodes1(), n2 = f.nodes2();
    const int nx = spec.bins + 1;
    f.G.assign(static_cast<std::size_t>(n1) * n2 * nx, 0.0);

    // path values at lattice nodes (zero path when absent)
    std::vector<double> wv(static_cast<std::size_t>(n1) * n2, 0.0);
    if (w) {
        if (w->n != 1) throw std::invalid_argument("averaged_field: n=1 paths only");
        for (int i = 0; i < n1; ++i)
            for (int j = 0; j < n2; ++j) {
                Point p{f.lattice.axes[0][i], f.lattice.axes[1][j]};
                wv[static_cast<std::size_t>(i) * n2 + j] = w->value_at(p);
            }
        // range check: convolution deposits and direct evaluations must stay
        // inside the spatial window with margin
        double wmin = 0.0, wmax = 0.0;
        for (double v : wv) {
            wmin = std::min(wmin, v);
            wmax = std::max(wmax, v);
        }
        if (spec.route == AveragedFieldRoute::Convolution &&
            (-wmin > spec.x_max || -wmax < spec.x_min))
            throw std::invalid_argument("averaged_field: spatial grid does not cover the path");
    }

    // per-cell contributions, then 2D prefix sums into the cumulative table
    auto cell_contrib = [&](int i, int j) {
        // corner-average of w over cell (i,j)..(i+1,j+1)
        const double wavg = 0.25 * (wv[static_cast<std::size_t>(i) * n2 + j] +
                                    wv[static_cast<std::size_t>(i + 1) * n2 + j] +
                                    wv[static_cast<std::size_t>(i) * n2 + j + 1] +
                                    wv[static_cast<std::size_t>(i + 1) * n2 + j + 1]);
        const double area = (f.lattice.axes[0][i + 1] - f.lattice.axes[0][i]) *
                            (f.lattice.axes[1][j + 1] - f.lattice.axes[1][j]);
        return std::pair{wavg, area};
    };

    if (spec.route == AveragedFieldRoute::Direct) {
        if (!b.has_smooth() && b.modes.empty())
            throw std::invalid_argument("averaged_field: empty nonlinearity");
        // cache b(x + w_node) per node and x
        std::vector<double> bx(static_cast<std::size_t>(n1) * n2 * nx);
        parallel_for(static_cast<std::size_t>(n1) * n2, 0, [&](std::size_t node) {
            const double wval = wv[node];
            double* row = bx.data() + node * nx;
            for (int xk = 0; xk < nx; ++xk) row[xk] = b.eval(spec.x_min + xk * f.dx + wval);
        });
        for (int i = 0; i < n1 - 1; ++i)
            for (int j = 0; j < n2 - 1; ++j) {
                const double area = (f.lattice.axes[0][i + 1] - f.lattice.axes[0][i]) *
                                    (f.lattice.axes[1][j + 1] - f.lattice.axes[1][j]);
                const double* r00 = bx.data() + (static_cast<std::size_t>(i) * n2 + j) * nx;
                const double* r01 = bx.data() + (static_cast<std::size_t>(i) * n2 + j + 1) * nx;
                const double* r10 = bx.data() + (static_cast<std::size_t>(i + 1) * n2 + j) * nx;
                const double* r11 =
                    bx.data() + (static_cast<std::size_t>(i + 1) * n2 + j + 1) * nx;
                double* out = f.G.data() + (static_cast<std::size_t>(i + 1) * n2 + j + 1) * nx;
                for (int xk = 0; xk < nx; ++xk)
                    out[xk] = 0.25 * area * (r00[xk] + r01[xk] + r10[xk] + r11[xk]);
            }
    } else {
        // deposit cell volumes at the cell value of -w (the reflected path),
        // convolve with b over the shared spatial grid
        std::vector<double> brel(2 * nx - 1);
        for (int k = 0; k < 2 * nx - 1; ++k) brel[k] = b.eval((k - (nx - 1)) * f.dx);
        for (int i = 0; i < n1 - 1; ++i)
            for (int j = 0; j < n2 - 1; ++j) {
                auto [wavg, area] = cell_contrib(i, j);
                const double u = -wavg;  // L^{-w} deposit location
                const double pos = (u - spec.x_min) / f.dx;
                if (pos < 0.0 || pos > spec.bins)
                    throw std::invalid_argument(
                        "averaged_field: spatial grid does not cover the path");
                const int jb = std::min(static_cast<int>(pos), spec.bins - 1);
                const double frac = pos - jb;
                double* out = f.G.data() + (static_cast<std::size_t>(i + 1) * n2 + j + 1) * nx;
                // (b * delta_u)(x_i) = b(x_i - u): linear split between bins
                for (int xk = 0; xk < nx; ++xk) {
                    const double b0 = brel[xk - jb + (nx - 1)];
                    const double b1 = brel[xk - (jb + 1) + (nx - 1)];
                    out[xk] += area * ((1.0 - frac) * b0 + frac * b1);
                }
            }
    }

    // prefix sums over both lattice axes
    for (int i = 1; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
            double* cur = f.G.data() + (static_cast<std::size_t>(i) * n2 + j) * nx;
            const double* prev = f.G.data() + (static_cast<std::size_t>(i - 1) * n2 + j) * nx;
            for (int xk = 0; xk < nx; ++xk) cur[xk] += prev[xk];
        }
    for (int i = 0; i < n1; ++i)
        for (int j = 1; j < n2; ++j) {
            double* cur = f.G.data() + (static_cast<std::size_t>(i) * n2 + j) * nx;
            const double* prev = f.G.data() + (static_cast<std::size_t>(i) * n2 + j - 1) * nx;
            for (int xk = 0; xk < nx; ++xk) cur[xk] += prev[xk];
        }
    return f;
}

// ---------------------------------------------------------------------------
// 2D nonlinear Young integral
// ---------------------------------------------------------------------------

/// Riemann sum of Gamma_{u,v}(y_u) over the level-n dyadic partition of rect,
/// clamped onto the field's lattice. y is given at lattice nodes.
inline double nonlinear_young_integral(const AveragedField& field,
                                       const std::vector<double>& y, const Rect& rect,
                                       int level)
{
    const auto& lat = field.lattice;
    const int n2 = field.nodes2();
    auto p = clamp_partition(dyadic_partition(lat.box(), level, IndexSet::full(2)), rect);
    double acc = 0.0;
    p.for_each_cell([&](const Point& u, const Point& v) {
        if (u[0] == v[0] || u[1] == v[1]) return;
        const int i1 = lat.coord_index(0, u[0]), i2 = lat.coord_index(1, u[1]);
        acc += field.gamma(u, v, y[static_cast<std::size_t>(i1) * n2 + i2]);
    });
    return acc;
}

// ---------------------------------------------------------------------------
// Cumulative tensor quadrature weights (direct Picard route)
// ---------------------------------------------------------------------------

namespace detail {

/// Cumulative Newton-Cotes/Gregory weights: W[i][j] is the weight of node j in
/// the quadrature of int_0^{x_i}. order 2 = trapezoid, order 4 = Gregory with
/// two end corrections (closed composite rules for short ranges).
inline std::vector<std::vector<double>> cumulative_weights(int n_nodes, double h, int order)
{
    std::vector<std::vector<double>> W(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
        auto& w = W[i];
        w.assign(n_nodes, 0.0);
        const int cells = i;
        if (cells == 0) continue;
        if (order <= 2 || cells == 1) {
            w[0] = w[cells] = 0.5;
            for (int j = 1; j < cells; ++j) w[j] = 1.0;
        } else if (cells == 2) {
            w[0] = w[2] = 1.0 / 3.0;
            w[1] = 4.0 / 3.0;
        } else if (cells == 3) {
            w[0] = w[3] = 3.0 / 8.0;
            w[1] = w[2] = 9.0 / 8.0;
        } else if (cells == 4) {
            w[0] = w[4] = 1.0 / 3.0;
            w[1] = w[3] = 4.0 / 3.0;
            w[2] = 2.0 / 3.0;
        } else if (cells == 5) {
            // Simpson on [0,2] + 3/8 on [2,5]
            w[0] = 1.0 / 3.0;
            w[1] = 4.0 / 3.0;
            w[2] = 1.0 / 3.0 + 3.0 / 8.0;
            w[3] = w[4] = 9.0 / 8.0;
            w[5] = 3.0 / 8.0;
        } else {
            for (int j = 0; j <= cells; ++j) w[j] = 1.0;
            w[0] = w[cells] = 3.0 / 8.0;
            w[1] = w[cells - 1] = 7.0 / 6.0;
            w[2] = w[cells - 2] = 23.0 / 24.0;
        }
        for (auto& x : w) x *= h;
    }
    return W;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Picard solver
// ---------------------------------------------------------------------------

struct GoursatBoundary {
    std::function<double(double)> xi1;  // y on {t2 = 0}
    std::function<double(double)> xi2;  // y on {t1 = 0}

    static GoursatBoundary constant(double x0)
    {
        return {[x0](double) { return x0; }, [x0](double) { return x0; }};
    }

    /// Interior extension xi(t) = xi1(t1) + xi2(t2) - xi1(0); restricts to the
    /// given data on the coordinate axes.
    double operator()(double t1, double t2) const
    {
        if (std::abs(xi1(0.0) - xi2(0.0)) > 1e-12)
            throw std::invalid_argument("GoursatBoundary: corner mismatch xi1(0) != xi2(0)");
        return xi1(t1) + xi2(t2) - xi1(0.0);
    }
};

struct PicardOptions {
    double tol = 1e-10;
    int max_iter = 80;
    int level = 6;  // Young-route partition level
    enum class Mode { YoungField, DirectQuadrature } mode = Mode::YoungField;
    int quadrature_order = 4;  // direct route only
};

struct PathSolution {
    SampleGrid lattice;
    std::vector<double> y;  // node-major (axis 0 slowest)
    std::vector<double> update_log;
    int iterations = 0;
    bool converged = false;
};

/// Fixed-point iteration y <- xi + I[y] on all lattice nodes (Jacobi update).
/// Young route: I is the nonlinear Young sum of the averaged field.
/// Direct route: I is tensor cumulative quadrature of b(y + w) (smooth b).
/// Three consecutive growing sup-updates abort with a divergence error.
inline PathSolution solve_picard(const GoursatBoundary& xi, const AveragedField& field,
                                 const PicardOptions& opt,
                                 const NonlinearitySpec* b_direct = nullptr,
                                 const std::optional<FieldSample>& w = std::nullopt)
{
    const auto& lat = field.lattice;
    const int n1 = static_cast<int>(lat.axes[0].size());
    const int n2 = static_cast<int>(lat.axes[1].size());
    const std::size_t nn = static_cast<std::size_t>(n1) * n2;

    PathSolution sol;
    sol.lattice = lat;
    sol.y.resize(nn);
    std::vector<double> xi_val(nn), wv(nn, 0.0);
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
            xi_val[static_cast<std::size_t>(i) * n2 + j] = xi(lat.axes[0][i], lat.axes[1][j]);
            if (w)
                wv[static_cast<std::size_t>(i) * n2 + j] =
                    w->value_at(Point{lat.axes[0][i], lat.axes[1][j]});
        }
    sol.y = xi_val;

    const bool direct = opt.mode == PicardOptions::Mode::DirectQuadrature;
    if (direct && b_direct == nullptr)
        throw std::invalid_argument("solve_picard: direct mode needs the nonlinearity");

    std::vector<std::vector<double>> W1, W2;
    if (direct) {
        W1 = detail::cumulative_weights(n1, lat.axes[0][1] - lat.axes[0][0],
                                        opt.quadrature_order);
        W2 = detail::cumulative_weights(n2, lat.axes[1][1] - lat.axes[1][0],
                                        opt.quadrature_order);
    }

    std::vector<double> next(nn), integrand(nn), partial(nn);
    int growing = 0;
    for (int it = 0; it < opt.max_iter; ++it) {
        if (direct) {
            for (std::size_t k = 0; k < nn; ++k)
                integrand[k] = b_direct->eval(sol.y[k] + wv[k]);
            // axis-1 cumulative transform, then axis-0
            for (int i = 0; i < n1; ++i)
                for (int j2 = 0; j2 < n2; ++j2) {
                    double acc = 0.0;
                    const auto& w2 = W2[j2];
                    for (int j = 0; j <= j2; ++j)
                        acc += w2[j] * integrand[static_cast<std::size_t>(i) * n2 + j];
                    partial[static_cast<std::size_t>(i) * n2 + j2] = acc;
                }
            for (int i1 = 0; i1 < n1; ++i1) {
                const auto& w1 = W1[i1];
                for (int j = 0; j < n2; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i <= i1; ++i)
                        acc += w1[i] * partial[static_cast<std::size_t>(i) * n2 + j];
                    next[static_cast<std::size_t>(i1) * n2 + j] = xi_val[static_cast<std::size_t>(i1) * n2 + j] + acc;
                }
            }
        } else {
            parallel_for(nn, 0, [&](std::size_t k) {
                const int i1 = static_cast<int>(k) / n2, i2 = static_cast<int>(k) % n2;
                double integral = 0.0;
                if (i1 > 0 && i2 > 0) {
                    Rect sub(lat.box().lo, Point{lat.axes[0][i1], lat.axes[1][i2]});
                    integral = nonlinear_young_integral(field, sol.y, sub, opt.level);
                }
                next[k] = xi_val[k] + integral;
            });
        }
        double update = 0.0;
        for (std::size_t k = 0; k < nn; ++k) update = std::max(update, std::abs(next[k] - sol.y[k]));
        sol.update_log.push_back(update);
        sol.y.swap(next);
        ++sol.iterations;
        if (update < opt.tol) {
            sol.converged = true;
            break;
        }
        const std::size_t L = sol.update_log.size();
        growing = (L >= 2 && sol.update_log[L - 1] > sol.update_log[L - 2]) ? growing + 1 : 0;
        if (growing >= 3)
            throw std::runtime_error("solve_picard: diverging (sup updates grew for 3 "
                                     "consecutive iterations)");
    }
    return sol;
}

/// Truncated series solution of the lambda-linear Goursat equation
/// y = x0 + lambda int_0^t y: sum (lambda t1 t2)^k / (k!)^2.
inline double goursat_series(double x0, double lambda, double t1, double t2, int terms = 40)
{
    double acc = 0.0, term = 1.0;
    for (int k = 0; k < terms; ++k) {
        acc += term;
        const double kk = k + 1.0;
        term *= lambda * t1 * t2 / (kk * kk);
    }
    return x0 * acc;
}

// ---------------------------------------------------------------------------
// Regularization condition
// ---------------------------------------------------------------------------

struct RegularizationCheck {
    bool satisfied = false;
    double margin = 0.0;  // slack of the binding inequality
    std::string binding;
};

/// d=2 corollary forms: additive  rho + 1/(2 zeta1) + 1/(2 zeta2) - n/2 > 3,
/// multiplicative rho + 1/(2 max zeta) - n/2 > 3.
inline RegularizationCheck check_regularization_condition(double rho,
                                                          std::span<const double> zeta, int n,
                                                          LndNotion notion)
{
    if (zeta.size() != 2)
        throw std::invalid_argument("check_regularization_condition: d=2 corollary form");
    RegularizationCheck out;
    double lhs;
    if (notion == LndNotion::Multiplicative) {
        lhs = rho + 1.0 / (2.0 * std::max(zeta[0], zeta[1])) - 0.5 * n;
        out.binding = "rho + 1/(2 max zeta) - n/2 > 3";
    } else {
        lhs = rho + 1.0 / (2.0 * zeta[0]) + 1.0 / (2.0 * zeta[1]) - 0.5 * n;
        out.binding = "rho + 1/(2 zeta1) + 1/(2 zeta2) - n/2 > 3";
    }
    out.margin = lhs - 3.0;
    out.satisfied = out.margin > 0.0;
    return out;
}

/// General form: gamma_i (1 + eta) > 1 for all i and (rho + alpha) > 2 + eta.
inline RegularizationCheck check_regularization_condition_general(
    double rho, std::span<const double> gamma, double alpha, double eta)
{
    RegularizationCheck out;
    double gmin = gamma.front();
    for (double g : gamma) gmin = std::min(gmin, g);
    const double m1 = gmin * (1.0 + eta) - 1.0;
    const double m2 = (rho + alpha) - (2.0 + eta);
    if (m1 <= m2) {
        out.margin = m1;
        out.binding = "gamma (1 + eta) > 1";
    } else {
        out.margin = m2;
        out.binding = "rho + alpha > 2 + eta";
    }
    out.satisfied = m1 > 0.0 && m2 > 0.0;
    return out;
}

}  // namespace sheetsew
