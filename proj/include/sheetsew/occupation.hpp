#pragma once

// Empirical occupation measures: Fourier transforms over sampled paths,
// L_m moment decay fits in |z|, local-time densities with mass control,
// Bessel/Sobolev norms by radial quadrature, and the per-axis Hoelder
// exponent fits for local-time increments.

#include <complex>
#include <string>
#include <vector>

#include "sheetsew/gaussian_field.hpp"
#include "sheetsew/multiindex.hpp"
#include "sheetsew/parallel.hpp"
#include "sheetsew/rng.hpp"
#include "sheetsew/sewing.hpp"
#include "sheetsew/stats.hpp"

namespace sheetsew {

// ---------------------------------------------------------------------------
// Oscillatory quadrature over sampled paths
// ---------------------------------------------------------------------------

namespace detail {

struct RectNodeView {
    std::vector<int> first, count;            // per-axis node index ranges
    std::vector<std::vector<double>> weight;  // per-axis trapezoid weights
};

inline RectNodeView rect_node_view(const SampleGrid& grid, const Rect& rect)
{
    const int d = grid.dim();
    RectNodeView v;
    v.first.resize(d);
    v.count.resize(d);
    v.weight.resize(d);
    for (int i = 0; i < d; ++i) {
        const int a = grid.coord_index(i, rect.lo.v[i]);
        const int b = grid.coord_index(i, rect.hi.v[i]);
        v.first[i] = a;
        v.count[i] = b - a + 1;
        v.weight[i].assign(v.count[i], 0.0);
        const auto& axis = grid.axes[i];
        for (int k = a; k < b; ++k) {
            const double half = 0.5 * (axis[k + 1] - axis[k]);
            v.weight[i][k - a] += half;
            v.weight[i][k - a + 1] += half;
        }
        if (a == b) v.weight[i][0] = 0.0;  // degenerate axis: zero measure
    }
    return v;
}

}  // namespace detail

/// Largest field-value change across one grid cell edge within rect (all
/// components); |z| * oscillation < 1/2 is the pointwise phase-resolution
/// heuristic for the oscillatory quadrature.
inline double max_cell_oscillation(const FieldSample& path, const Rect& rect)
{
    const auto view = detail::rect_node_view(path.grid, rect);
    const int d = path.grid.dim();
    std::vector<long long> stride(d, 1);
    for (int i = d - 2; i >= 0; --i)
        stride[i] = stride[i + 1] * static_cast<long long>(path.grid.axes[i + 1].size());

    double worst = 0.0;
    std::vector<int> idx(d, 0);
    long long total = 1;
    for (int i = 0; i < d; ++i) total *= view.count[i];
    for (long long f = 0; f < total; ++f) {
        long long flat = 0;
        for (int i = 0; i < d; ++i)
            flat += static_cast<long long>(view.first[i] + idx[i]) * stride[i];
        for (int comp = 0; comp < path.n; ++comp) {
            const double v0 = path.value(flat, comp);
            for (int i = 0; i < d; ++i) {
                if (idx[i] + 1 >= view.count[i]) continue;
                const double v1 = path.value(flat + stride[i], comp);
                worst = std::max(worst, std::abs(v1 - v0));
            }
        }
        for (int i = d - 1; i >= 0; --i) {
            if (++idx[i] < view.count[i]) break;
            idx[i] = 0;
        }
    }
    return worst;
}

enum class OscillationPolicy { Enforce, Report };

/// Tensor trapezoid quadrature of int_rect exp(i <z, W_r>) dr on the sample
/// grid. Splitting rect at any grid plane is exactly additive.
inline Complex occupation_fourier(const FieldSample& path, const Rect& rect,
                                  std::span<const double> z,
                                  OscillationPolicy policy = OscillationPolicy::Enforce)
{
    if (static_cast<int>(z.size()) != path.n)
        throw std::invalid_argument("occupation_fourier: z must have n components");
    if (policy == OscillationPolicy::Enforce) {
        double z_abs = 0.0;
        for (double c : z) z_abs += c * c;
        z_abs = std::sqrt(z_abs);
        const double osc = max_cell_oscillation(path, rect);
        if (z_abs * osc >= 0.5)
            throw std::invalid_argument(
                "occupation_fourier: |z| * cell oscillation = " + std::to_string(z_abs * osc) +
                " >= 0.5; refine the grid or lower |z|");
    }
    const auto view = detail::rect_node_view(path.grid, rect);
    const int d = path.grid.dim();
    std::vector<long long> stride(d, 1);
    for (int i = d - 2; i >= 0; --i)
        stride[i] = stride[i + 1] * static_cast<long long>(path.grid.axes[i + 1].size());

    Complex acc{};
    std::vector<int> idx(d, 0);
    long long total = 1;
    for (int i = 0; i < d; ++i) total *= view.count[i];
    for (long long f = 0; f < total; ++f) {
        long long flat = 0;
        double w = 1.0;
        for (int i = 0; i < d; ++i) {
            flat += static_cast<long long>(view.first[i] + idx[i]) * stride[i];
            w *= view.weight[i][idx[i]];
        }
        double phase = 0.0;
        for (int comp = 0; comp < path.n; ++comp) phase += z[comp] * path.value(flat, comp);
        acc += w * Complex(std::cos(phase), std::sin(phase));
        for (int i = d - 1; i >= 0; --i) {
            if (++idx[i] < view.count[i]) break;
            idx[i] = 0;
        }
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Spectra over ensembles
// ---------------------------------------------------------------------------

struct OccupationSpectrum {
    Rect rect;
    std::vector<std::vector<double>> z_points;   // each entry an n-vector
    std::vector<std::vector<Complex>> values;    // [sample][z]
    double max_oscillation = 0.0;                // over the first sample
    bool phase_resolved = true;                  // |z|*osc < 1/2 for all z
};

template <class PathAt>
OccupationSpectrum occupation_spectrum_impl(PathAt&& path_at, std::size_t n_samples,
                                            const Rect& rect,
                                            const std::vector<std::vector<double>>& zs,
                                            int workers)
{
    OccupationSpectrum spec;
    spec.rect = rect;
    spec.z_points = zs;
    spec.values.assign(n_samples, {});
    spec.max_oscillation = max_cell_oscillation(path_at(0), rect);
    double zmax = 0.0;
    for (const auto& z : zs) {
        double a = 0.0;
        for (double c : z) a += c * c;
        zmax = std::max(zmax, std::sqrt(a));
    }
    spec.phase_resolved = zmax * spec.max_oscillation < 0.5;
    parallel_for(n_samples, workers, [&](std::size_t k) {
        auto& row = spec.values[k];
        row.resize(zs.size());
        for (std::size_t j = 0; j < zs.size(); ++j)
            row[j] = occupation_fourier(path_at(k), rect, zs[j], OscillationPolicy::Report);
    });
    return spec;
}

inline OccupationSpectrum occupation_spectrum(const PathEnsemble& ensemble, const Rect& rect,
                                              const std::vector<std::vector<double>>& zs,
                                              int workers = 0)
{
    return occupation_spectrum_impl([&](std::size_t k) -> const FieldSample& {
        return ensemble.path(k);
    }, ensemble.size(), rect, zs, workers);
}

// ---------------------------------------------------------------------------
// Fourier moment decay fit
// ---------------------------------------------------------------------------

struct RegularityFit {
    std::string kind;          // "fourier_decay" or "holder_time"
    double exponent = 0.0;     // decay exponent in (1+|z|^2), or unused
    double band = 0.0;         // jackknife error of the exponent
    std::vector<double> per_axis_exponent, per_axis_band;  // holder fit
    double theory_target = 0.0;
    std::size_t n_samples = 0;
    int resolution = 0;  // grid nodes per axis
    bool quadrature_resolved = true;
    bool noise_floor = false;
    std::vector<double> abscissae, values;  // fitted data (logs not applied)
};

/// Decay exponent targets from the moment-bound bookkeeping, evaluated 5%
/// inside the admissible region (eta_i < 1/(2 zeta_i), theta < 1/(2 max zeta)).
inline double decay_theory_target(LndNotion notion, std::span<const double> zeta)
{
    if (notion == LndNotion::Multiplicative) {
        double zmax = 0.0;
        for (double z : zeta) zmax = std::max(zmax, z);
        return 0.95 / (2.0 * zmax) / 2.0;
    }
    double acc = 0.0;
    for (double z : zeta) acc += 0.95 / (2.0 * z) / 2.0;
    return acc;
}

/// Fits log ||box mu_hat(z)||_m against log(1 + |z|^2) over a radius ladder.
/// For n = 1 the two directions are conjugate, so a single direction is used;
/// for n > 1 moments pool 8 seeded random unit directions per radius.
template <class PathAt>
RegularityFit moment_decay_fit_impl(PathAt&& path_at, std::size_t n_samples, int n_components,
                                    const Rect& rect, std::span<const double> radii, int m,
                                    std::uint64_t seed, LndNotion notion,
                                    std::span<const double> zeta, int workers)
{
    if (radii.size() < 5) throw std::invalid_argument("moment_decay_fit: need >= 5 radii");
    double rmin = radii.front(), rmax = radii.front();
    for (double r : radii) {
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
    }
    if (rmax / rmin < 31.0)
        throw std::invalid_argument("moment_decay_fit: radii must span >= 1.5 decades");

    std::vector<std::vector<double>> zs;
    std::vector<std::size_t> radius_of;
    const int n_dirs = n_components == 1 ? 1 : 8;
    RandomStream dir_rng(seed, derive_stream(stream_purpose::kDirections));
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        for (int dir = 0; dir < n_dirs; ++dir) {
            std::vector<double> z(n_components);
            if (n_components == 1) {
                z[0] = radii[ri];
            } else {
                double norm = 0.0;
                for (auto& c : z) {
                    c = dir_rng.normal();
                    norm += c * c;
                }
                norm = std::sqrt(norm);
                for (auto& c : z) c *= radii[ri] / norm;
            }
            zs.push_back(std::move(z));
            radius_of.push_back(ri);
        }
    }

    auto spectrum = occupation_spectrum_impl(path_at, n_samples, rect, zs, workers);

    RegularityFit fit;
    fit.kind = "fourier_decay";
    fit.n_samples = n_samples;
    fit.quadrature_resolved = spectrum.phase_resolved;
    fit.theory_target = decay_theory_target(notion, zeta);

    // pooled |value| observations per radius
    std::vector<std::vector<double>> pooled(radii.size());
    for (std::size_t k = 0; k < n_samples; ++k)
        for (std::size_t j = 0; j < zs.size(); ++j)
            pooled[radius_of[j]].push_back(std::abs(spectrum.values[k][j]));

    auto fit_slope = [&](int drop_block) {
        std::vector<double> xs, ys;
        for (std::size_t ri = 0; ri < radii.size(); ++ri) {
            double acc = 0.0;
            std::size_t cnt = 0;
            for (std::size_t k = 0; k < pooled[ri].size(); ++k) {
                if (drop_block >= 0 && static_cast<int>(k % 10) == drop_block) continue;
                acc += std::pow(pooled[ri][k], m);
                ++cnt;
            }
            const double lm = std::pow(acc / cnt, 1.0 / m);
            xs.push_back(std::log1p(radii[ri] * radii[ri]));
            ys.push_back(std::log(lm));
        }
        return std::pair{linear_fit(xs, ys).slope, ys};
    };

    auto [slope, ys] = fit_slope(-1);
    fit.exponent = -slope;
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        fit.abscissae.push_back(radii[ri]);
        fit.values.push_back(std::exp(ys[ri]));
    }
    std::vector<double> jk(10);
    for (int b = 0; b < 10; ++b) jk[b] = -fit_slope(b).first;
    double mn = 0.0;
    for (double v : jk) mn += v;
    mn /= jk.size();
    double var = 0.0;
    for (double v : jk) var += (v - mn) * (v - mn);
    fit.band = std::sqrt(var * (jk.size() - 1.0) / jk.size());

    // noise-floor heuristic: the last two moment values are indistinguishable
    if (fit.values.size() >= 2) {
        const double a = fit.values[fit.values.size() - 2], b = fit.values.back();
        if (std::abs(a - b) < 0.05 * a && fit.exponent < 0.05) fit.noise_floor = true;
    }
    return fit;
}

inline RegularityFit moment_decay_fit(const PathEnsemble& ensemble, const Rect& rect,
                                      std::span<const double> radii, int m, std::uint64_t seed,
                                      LndNotion notion, std::span<const double> zeta,
                                      int workers = 0)
{
    if (ensemble.size() < 500)
        throw std::invalid_argument("moment_decay_fit: ensemble >= 500 required");
    auto fit = moment_decay_fit_impl(
        [&](std::size_t k) -> const FieldSample& { return ensemble.path(k); }, ensemble.size(),
        ensemble.model().n, rect, radii, m, seed, notion, zeta, workers);
    fit.resolution = static_cast<int>(ensemble.path(0).grid.axes[0].size());
    return fit;
}

/// Control: a single deterministic path has no ensemble averaging gain.
inline RegularityFit moment_decay_fit_deterministic(const FieldSample& path, const Rect& rect,
                                                    std::span<const double> radii, int m,
                                                    LndNotion notion,
                                                    std::span<const double> zeta)
{
    std::vector<double> dummy_zeta(zeta.begin(), zeta.end());
    auto fit = moment_decay_fit_impl([&](std::size_t) -> const FieldSample& { return path; }, 1,
                                     path.n, rect, radii, m, 1, notion, dummy_zeta, 1);
    fit.resolution = static_cast<int>(path.grid.axes[0].size());
    return fit;
}

inline FieldSample make_constant_path(const SampleGrid& grid, int n, double value)
{
    FieldSample s;
    s.grid = grid;
    s.n = n;
    s.values.assign(static_cast<std::size_t>(grid.num_points()) * n, value);
    return s;
}

// ---------------------------------------------------------------------------
// Local-time density (spatial dimension n = 1)
// ---------------------------------------------------------------------------

struct LocalTimeEstimate {
    double x_min = 0.0;
    double bin_width = 0.0;
    std::vector<double> density;  // mass / bin_width
    double rect_volume = 0.0;
    double clipped_mass = 0.0;
    double mollifier_scale = 0.0;

    double total_mass() const
    {
        double acc = 0.0;
        for (double v : density) acc += v;
        return acc * bin_width;
    }
    double l2_norm() const
    {
        double acc = 0.0;
        for (double v : density) acc += v * v;
        return std::sqrt(acc * bin_width);
    }
};

struct SpatialWindow {
    double lo = 0.0, hi = 0.0;
};

/// Default window [min - 3 sigma, max + 3 sigma] of the sampled values.
inline SpatialWindow auto_window(const FieldSample& path, const Rect& rect)
{
    const auto view = detail::rect_node_view(path.grid, rect);
    const int d = path.grid.dim();
    std::vector<long long> stride(d, 1);
    for (int i = d - 2; i >= 0; --i)
        stride[i] = stride[i + 1] * static_cast<long long>(path.grid.axes[i + 1].size());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    double acc = 0.0, acc2 = 0.0;
    long long cnt = 0;
    std::vector<int> idx(d, 0);
    long long total = 1;
    for (int i = 0; i < d; ++i) total *= view.count[i];
    for (long long f = 0; f < total; ++f) {
        long long flat = 0;
        for (int i = 0; i < d; ++i)
            flat += static_cast<long long>(view.first[i] + idx[i]) * stride[i];
        const double v = path.value(flat, 0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        acc += v;
        acc2 += v * v;
        ++cnt;
        for (int i = d - 1; i >= 0; --i) {
            if (++idx[i] < view.count[i]) break;
            idx[i] = 0;
        }
    }
    const double mean = acc / cnt;
    const double sigma = std::sqrt(std::max(0.0, acc2 / cnt - mean * mean));
    return {lo - 3.0 * sigma - 1e-9, hi + 3.0 * sigma + 1e-9};
}

/// Time-weighted value histogram: every grid cell deposits its time volume at
/// the cell-average value, linearly split between the two adjacent bins.
/// Mass equals the rect volume; clipping beyond 1% is an error.
inline LocalTimeEstimate local_time_density(const FieldSample& path, const Rect& rect,
                                            const SpatialWindow& window, int bins,
                                            double mollifier_scale = 0.0)
{
    if (path.n != 1)
        throw std::invalid_argument("local_time_density: spatial dimension n=1 only");
    if (bins < 2 || window.hi <= window.lo)
        throw std::invalid_argument("local_time_density: bad window/bins");

    LocalTimeEstimate lt;
    lt.x_min = window.lo;
    lt.bin_width = (window.hi - window.lo) / bins;
    lt.density.assign(bins, 0.0);
    lt.rect_volume = rect.volume();
    lt.mollifier_scale = mollifier_scale;

    const auto view = detail::rect_node_view(path.grid, rect);
    const int d = path.grid.dim();
    std::vector<long long> stride(d, 1);
    for (int i = d - 2; i >= 0; --i)
        stride[i] = stride[i + 1] * static_cast<long long>(path.grid.axes[i + 1].size());

    // iterate cells of the rect (count-1 per axis, degenerate axes skip)
    std::vector<int> cells(d);
    long long ncells = 1;
    for (int i = 0; i < d; ++i) {
        cells[i] = std::max(1, view.count[i] - 1);
        ncells *= cells[i];
    }
    std::vector<int> idx(d, 0);
    for (long long c = 0; c < ncells; ++c) {
        double vol = 1.0;
        long long base = 0;
        for (int i = 0; i < d; ++i) {
            const auto& axis = path.grid.axes[i];
            const int a = view.first[i] + idx[i];
            vol *= view.count[i] > 1 ? axis[a + 1] - axis[a] : 0.0;
            base += static_cast<long long>(a) * stride[i];
        }
        // cell-average value over the 2^d corners
        double val = 0.0;
        int corners = 0;
        for (int mask = 0; mask < (1 << d); ++mask) {
            long long flat = base;
            bool ok = true;
            for (int i = 0; i < d; ++i)
                if (mask & (1 << i)) {
                    if (view.count[i] == 1) {
                        ok = false;
                        break;
                    }
                    flat += stride[i];
                }
            if (!ok) continue;
            val += path.value(flat, 0);
            ++corners;
        }
        val /= corners;

        const double pos = (val - lt.x_min) / lt.bin_width - 0.5;
        const double fl = std::floor(pos);
        const int b0 = static_cast<int>(fl);
        const double frac = pos - fl;
        auto deposit = [&](int b, double mass) {
            if (b < 0 || b >= bins)
                lt.clipped_mass += mass;
            else
                lt.density[b] += mass / lt.bin_width;
        };
        deposit(b0, vol * (1.0 - frac));
        deposit(b0 + 1, vol * frac);

        for (int i = d - 1; i >= 0; --i) {
            if (++idx[i] < cells[i]) break;
            idx[i] = 0;
        }
    }

    if (lt.clipped_mass > 0.01 * lt.rect_volume)
        throw std::invalid_argument("local_time_density: window clips " +
                                    std::to_string(100.0 * lt.clipped_mass / lt.rect_volume) +
                                    "% of the mass");

    if (mollifier_scale > 0.0) {
        const int half = static_cast<int>(std::ceil(4.0 * mollifier_scale / lt.bin_width));
        std::vector<double> kernel(2 * half + 1);
        double ksum = 0.0;
        for (int k = -half; k <= half; ++k) {
            const double x = k * lt.bin_width / mollifier_scale;
            kernel[k + half] = std::exp(-0.5 * x * x);
            ksum += kernel[k + half];
        }
        for (auto& v : kernel) v /= ksum;
        std::vector<double> out(bins, 0.0);
        for (int b = 0; b < bins; ++b)
            for (int k = -half; k <= half; ++k) {
                int src = b + k;
                if (src < 0) src = 0;  // reflect mass at the window edge
                if (src >= bins) src = bins - 1;
                out[b] += lt.density[src] * kernel[k + half];
            }
        lt.density = std::move(out);
    }
    return lt;
}

// ---------------------------------------------------------------------------
// Sobolev (Bessel-potential) norms by radial quadrature, n = 1
// ---------------------------------------------------------------------------

/// Tail handling for the radial quadrature: power-law extrapolation from the
/// last two ladder points (default), a declared compact support, or a forced
/// decay exponent (used when per-sample values are too noisy to fit).
struct SobolevTail {
    enum Mode { Extrapolate, Compact, Forced } mode = Extrapolate;
    double exponent = 0.0;       // |f(z)| ~ z^-exponent, Forced mode
    double max_fraction = 0.05;  // error when the tail exceeds this share
};

/// sqrt( int_R (1+z^2)^alpha |f(z)|^2 dz ) from samples of |f| on a
/// nonnegative radius ladder (f(-z) = conj f(z) for real-valued data, so the
/// two half-lines contribute equally).
inline double sobolev_norm(std::span<const double> radii, std::span<const double> abs_values,
                           double alpha, SobolevTail tail_spec = {})
{
    const std::size_t K = radii.size();
    if (K < 3 || abs_values.size() != K)
        throw std::invalid_argument("sobolev_norm: need matched radius/value ladders");
    for (std::size_t k = 0; k + 1 < K; ++k)
        if (!(radii[k] < radii[k + 1]))
            throw std::invalid_argument("sobolev_norm: radii must increase");

    auto integrand = [&](double r, double v) {
        return std::pow(1.0 + r * r, alpha) * v * v;
    };
    double core = 0.0;
    for (std::size_t k = 0; k + 1 < K; ++k) {
        const double g0 = integrand(radii[k], abs_values[k]);
        const double g1 = integrand(radii[k + 1], abs_values[k + 1]);
        core += 0.5 * (g0 + g1) * (radii[k + 1] - radii[k]);
    }
    core *= 2.0;  // both half-lines

    double tail = 0.0;
    if (tail_spec.mode != SobolevTail::Compact) {
        const double vK = abs_values[K - 1], vP = abs_values[K - 2];
        const double rK = radii[K - 1], rP = radii[K - 2];
        double p = tail_spec.exponent;
        if (tail_spec.mode == SobolevTail::Extrapolate) {
            if (vK > 0.0 && vP > 0.0 && rP > 0.0)
                p = -(std::log(vK) - std::log(vP)) / (std::log(rK) - std::log(rP));
            else
                p = std::numeric_limits<double>::infinity();
        }
        if (std::isfinite(p)) {
            const double decay = 2.0 * p - 2.0 * alpha;  // integrand falls like z^-decay
            if (decay <= 1.0)
                throw std::invalid_argument(
                    "sobolev_norm: alpha too large for the observed decay (integrand falls "
                    "like z^-" +
                    std::to_string(decay) + "); extend the truncation radius ladder");
            tail = 2.0 * integrand(rK, vK) * rK / (decay - 1.0);
        }
    }
    const double total = core + tail;
    if (total > 0.0 && tail > tail_spec.max_fraction * total) {
        const double needed = radii[K - 1] * std::pow(tail / (tail_spec.max_fraction * total),
                                                      2.0);  // crude growth guess
        throw std::invalid_argument("sobolev_norm: truncation tail is " +
                                    std::to_string(100.0 * tail / total) +
                                    "% of the norm; extend radii to about " +
                                    std::to_string(needed));
    }
    return std::sqrt(total);
}

// ---------------------------------------------------------------------------
// Hoelder-in-time fit for local-time increments
// ---------------------------------------------------------------------------

struct HolderFitSpec {
    double alpha = 0.3;
    std::vector<double> gaps;   // per-axis |t_i - s_i| ladder (grid aligned)
    std::vector<double> radii;  // Sobolev radius ladder (z >= 0)
    int m = 2;
    Point base;                 // lower corner of the varied rectangles
    double other_extent = 0.5;  // fixed gap on the non-varied axis
};

inline double holder_alpha_bound(LndNotion notion, std::span<const double> zeta, int n)
{
    if (notion == LndNotion::Multiplicative) {
        double zmax = 0.0;
        for (double z : zeta) zmax = std::max(zmax, z);
        return 1.0 / (2.0 * zmax) - 0.5 * n;
    }
    double acc = 0.0;
    for (double z : zeta) acc += 1.0 / (2.0 * z);
    return acc - 0.5 * n;
}

/// Estimates || ||box_{s,t} L||_{H^alpha} ||_m on rectangles with one axis gap
/// swept through `gaps`, fits the per-axis slope gamma_i of log norm vs log
/// gap, and reports whether gamma_i exceeds the 1/2 threshold the 2D Young
/// theory demands.
inline RegularityFit holder_time_fit(const PathEnsemble& ensemble, const HolderFitSpec& spec,
                                     LndNotion notion, std::span<const double> zeta,
                                     int workers = 0)
{
    if (ensemble.model().n != 1)
        throw std::invalid_argument("holder_time_fit: n=1 required");
    const double bound = holder_alpha_bound(notion, zeta, 1);
    if (spec.alpha >= bound)
        throw std::invalid_argument("holder_time_fit: alpha " + std::to_string(spec.alpha) +
                                    " is above the admissible bound " + std::to_string(bound));
    if (spec.gaps.size() < 3)
        throw std::invalid_argument("holder_time_fit: need >= 3 gaps");
    const int d = ensemble.model().d;
    const std::size_t N = ensemble.size();

    std::vector<std::vector<double>> zs;
    for (double r : spec.radii) zs.push_back({r});

    RegularityFit fit;
    fit.kind = "holder_time";
    fit.n_samples = N;
    fit.theory_target = 0.5;
    fit.resolution = static_cast<int>(ensemble.path(0).grid.axes[0].size());

    for (int axis = 0; axis < d; ++axis) {
        std::vector<double> log_gap, log_norm;
        std::vector<std::vector<double>> per_gap_norms;
        for (double g : spec.gaps) {
            Point hi = spec.base;
            for (int i = 0; i < d; ++i)
                hi.v[i] += (i == axis) ? g : spec.other_extent;
            Rect rect(spec.base, hi);
            auto spectrum = occupation_spectrum(ensemble, rect, zs, workers);

            // pooled decay exponent: per-sample tails are too noisy to fit,
            // the aggregate validates the truncation once per rectangle
            std::vector<double> pooled(zs.size(), 0.0);
            for (std::size_t k = 0; k < N; ++k)
                for (std::size_t j = 0; j < zs.size(); ++j)
                    pooled[j] += std::norm(spectrum.values[k][j]);
            for (auto& v : pooled) v = std::sqrt(v / N);

            const std::size_t J = zs.size();
            const std::size_t tail_pts = std::min<std::size_t>(4, J - 1);
            std::vector<double> lx, ly;
            for (std::size_t j = J - tail_pts; j < J; ++j) {
                lx.push_back(std::log(spec.radii[j]));
                ly.push_back(std::log(pooled[j]));
            }
            const double p_hat = -linear_fit(lx, ly).slope;
            SobolevTail tail;
            tail.mode = SobolevTail::Forced;
            tail.exponent = p_hat;
            tail.max_fraction = 1.0;
            {
                SobolevTail check = tail;
                check.max_fraction = 0.05;
                sobolev_norm(spec.radii, pooled, spec.alpha, check);  // throws on a fat tail
            }

            std::vector<double> norms(N);
            for (std::size_t k = 0; k < N; ++k) {
                std::vector<double> vals(zs.size());
                for (std::size_t j = 0; j < zs.size(); ++j)
                    vals[j] = std::abs(spectrum.values[k][j]);
                norms[k] = sobolev_norm(spec.radii, vals, spec.alpha, tail);
            }
            fit.quadrature_resolved = fit.quadrature_resolved && spectrum.phase_resolved;
            per_gap_norms.push_back(norms);
            log_gap.push_back(std::log(g));
            log_norm.push_back(std::log(lm_norm<double>(norms, spec.m)));
        }
        fit.per_axis_exponent.push_back(linear_fit(log_gap, log_norm).slope);

        // jackknife the slope over sample blocks
        std::vector<double> jk(10);
        for (int b = 0; b < 10; ++b) {
            std::vector<double> ys;
            for (std::size_t gi = 0; gi < spec.gaps.size(); ++gi) {
                std::vector<double> kept;
                for (std::size_t k = 0; k < N; ++k)
                    if (static_cast<int>(k % 10) != b) kept.push_back(per_gap_norms[gi][k]);
                ys.push_back(std::log(lm_norm<double>(kept, spec.m)));
            }
            jk[b] = linear_fit(log_gap, ys).slope;
        }
        double mn = 0.0;
        for (double v : jk) mn += v;
        mn /= jk.size();
        double var = 0.0;
        for (double v : jk) var += (v - mn) * (v - mn);
        fit.per_axis_band.push_back(std::sqrt(var * (jk.size() - 1.0) / jk.size()));
    }
    return fit;
}

}  // namespace sheetsew
