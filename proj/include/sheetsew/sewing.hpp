#pragma once

// Multilevel Riemann sums of stochastic germs, theta-sewing limit estimates,
// L_m convergence-rate fits, BDG-inequality Monte Carlo checks, and the
// conditional-exponential germ driving the occupation-measure bounds.

#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "sheetsew/conditioning.hpp"
#include "sheetsew/gaussian_field.hpp"
#include "sheetsew/multiindex.hpp"
#include "sheetsew/parallel.hpp"
#include "sheetsew/rng.hpp"
#include "sheetsew/stats.hpp"

namespace sheetsew {

using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// Germs and path ensembles
// ---------------------------------------------------------------------------

/// Two-parameter evaluator Xi_{s,t}(omega); the sample context is the index
/// into whatever ensemble the germ captured.
struct StochasticGerm {
    std::function<Complex(const Point& s, const Point& t, std::size_t sample)> eval;
    bool increment_type = true;  // degenerate boxes evaluate to 0
    std::optional<double> alpha, beta, gamma;

    Complex operator()(const Point& s, const Point& t, std::size_t sample) const
    {
        if (increment_type)
            for (int i = 0; i < s.dim; ++i)
                if (t.v[i] == s.v[i]) return {};
        return eval(s, t, sample);
    }
};

/// Shared read-only ensemble of exact field samples on one grid.
class PathEnsemble {
public:
    PathEnsemble(FieldModel model, SampleGrid grid, std::uint64_t master_seed,
                 std::size_t n_samples, SampleRoute route = SampleRoute::Auto, int workers = 0)
        : model_(std::move(model)), samples_(n_samples)
    {
        parallel_for(n_samples, workers, [&](std::size_t k) {
            samples_[k] = sample_exact(model_, grid, master_seed, k, route);
        });
    }

    const FieldModel& model() const { return model_; }
    std::size_t size() const { return samples_.size(); }
    const FieldSample& path(std::size_t k) const { return samples_[k]; }

private:
    FieldModel model_;
    std::vector<FieldSample> samples_;
};

// ---------------------------------------------------------------------------
// Multilevel sums and rate estimation
// ---------------------------------------------------------------------------

struct SewingResult {
    IndexSet theta;
    int m = 2;
    std::vector<int> levels;
    std::vector<std::vector<Complex>> sums;  // [level][sample]
    std::vector<Estimate> cauchy_lm;         // ||P_{n+1} - P_n||_m per level pair
    std::vector<Complex> limit;              // finest-level sum per sample
    double fitted_rate = 0.0;                // log2 slope of cauchy vs level
    bool rate_is_infinite = false;
};

/// Riemann sums of the germ over uniform dyadic partitions refining the axes
/// in theta, for levels min_level..max_level, over the whole ensemble.
inline SewingResult multilevel_sums(const StochasticGerm& germ, const Rect& rect,
                                    const IndexSet& theta, int min_level, int max_level,
                                    std::size_t n_samples, int m = 2, int workers = 0,
                                    long long max_cells = 1LL << 22)
{
    if (n_samples == 0) throw std::invalid_argument("multilevel_sums: empty ensemble");
    if (min_level > max_level) throw std::invalid_argument("multilevel_sums: bad level range");

    SewingResult res;
    res.theta = theta;
    res.m = m;
    std::vector<GridPartition> partitions;
    for (int n = min_level; n <= max_level; ++n) {
        auto p = dyadic_partition(rect, n, theta);
        if (p.cell_count() > max_cells)
            throw std::invalid_argument("multilevel_sums: cell count exceeds limit");
        partitions.push_back(std::move(p));
        res.levels.push_back(n);
    }
    res.sums.assign(partitions.size(), std::vector<Complex>(n_samples));
    parallel_for(n_samples, workers, [&](std::size_t k) {
        auto g = [&](const Point& u, const Point& v) { return germ(u, v, k); };
        for (std::size_t li = 0; li < partitions.size(); ++li)
            res.sums[li][k] = riemann_sum(g, partitions[li]);
    });
    res.limit = res.sums.back();

    for (std::size_t li = 0; li + 1 < partitions.size(); ++li) {
        std::vector<Complex> diff(n_samples);
        for (std::size_t k = 0; k < n_samples; ++k)
            diff[k] = res.sums[li + 1][k] - res.sums[li][k];
        res.cauchy_lm.push_back(n_samples >= 4
                                    ? lm_norm_jackknife<Complex>(diff, m)
                                    : Estimate{lm_norm<Complex>(diff, m), 0.0});
    }

    // rate fit happens here so the result is self-contained
    double scale = 0.0;
    for (const auto& s : res.limit) scale = std::max(scale, std::abs(s));
    std::vector<double> xs, ys;
    for (std::size_t li = 0; li < res.cauchy_lm.size(); ++li) {
        if (res.cauchy_lm[li].value > 1e-13 * std::max(scale, 1.0)) {
            xs.push_back(static_cast<double>(res.levels[li]));
            ys.push_back(std::log2(res.cauchy_lm[li].value));
        }
    }
    if (xs.size() < 2) {
        res.rate_is_infinite = true;
        res.fitted_rate = -std::numeric_limits<double>::infinity();
    } else {
        res.fitted_rate = linear_fit(xs, ys).slope;
    }
    return res;
}

/// Least-squares slope of log2 Cauchy differences vs level (recomputed from a
/// result; +infinity flag when the differences sit at the rounding floor).
inline double estimate_rate(const SewingResult& result)
{
    if (result.rate_is_infinite) return -std::numeric_limits<double>::infinity();
    return result.fitted_rate;
}

/// Optional geometric extrapolation of the limit from the fitted rate
/// (off the default path: extrapolation can mask non-convergence, so the
/// plain finest-level estimate is what SewingResult::limit carries).
inline std::vector<Complex> extrapolated_limit(const SewingResult& result)
{
    if (result.sums.size() < 2 || result.rate_is_infinite) return result.limit;
    const double q = std::pow(2.0, result.fitted_rate);
    if (!(q > 0.0 && q < 1.0)) return result.limit;
    const auto& last = result.sums.back();
    const auto& prev = result.sums[result.sums.size() - 2];
    std::vector<Complex> out(last.size());
    for (std::size_t k = 0; k < last.size(); ++k)
        out[k] = last[k] + (last[k] - prev[k]) * (q / (1.0 - q));
    return out;
}

/// Theoretical slope targets: a stochastic germ in C_2^{a,b} L_m loses
/// (b - 1/2) per refined axis and level, a deterministic germ (b - 1).
inline double stochastic_rate_target(double beta, const IndexSet& theta)
{
    return -static_cast<double>(theta.size()) * (beta - 0.5);
}
inline double deterministic_rate_target(double beta, const IndexSet& theta)
{
    return -static_cast<double>(theta.size()) * (beta - 1.0);
}

// ---------------------------------------------------------------------------
// Exponential germ  A_{s,t}(z) = int_s^t E[exp(i<z,W_r>)|F_s] dr
// ---------------------------------------------------------------------------

/// Conditional law drivers: the Brownian sheet has closed-form strong-past
/// moments (mean W_s, variance prod r_i - prod s_i); other models fall back to
/// conditioning on the sample grid restricted to [0, s] at `conditioning_level`.
struct ExponentialGermSpec {
    std::vector<double> z;
    int quadrature = 2;              // midpoint nodes per axis and cell
    int conditioning_level = -1;     // generic models only
};

inline StochasticGerm exponential_germ(const FieldModel& model, const PathEnsemble& ensemble,
                                       const ExponentialGermSpec& spec)
{
    if (spec.quadrature < 1) throw std::invalid_argument("exponential_germ: resolution 0");
    if (static_cast<int>(spec.z.size()) != model.n)
        throw std::invalid_argument("exponential_germ: z must have n components");
    const bool closed_form = model.kind == FieldKind::BrownianSheet;
    if (!closed_form && spec.conditioning_level < 0)
        throw std::invalid_argument(
            "exponential_germ: model lacks a closed conditional law and level is unset");

    double z2 = 0.0;
    for (double zc : spec.z) z2 += zc * zc;
    const std::vector<double> z = spec.z;
    const int q = spec.quadrature;
    const int cond_level = spec.conditioning_level;

    StochasticGerm germ;
    germ.increment_type = true;
    germ.eval = [&ensemble, &model = ensemble.model(), z, z2, q, closed_form, cond_level](
                    const Point& s, const Point& t, std::size_t sample) -> Complex {
        const int d = s.dim;
        const FieldSample& path = ensemble.path(sample);

        // phase at the conditioning corner: <z, W_s>
        double corner_phase = 0.0;
        if (closed_form) {
            for (int c = 0; c < model.n; ++c)
                corner_phase += z[c] * path.value_at(s, c);
        }

        const double svol = [&] {
            double p = 1.0;
            for (int i = 0; i < d; ++i) p *= s.v[i];
            return p;
        }();

        Complex acc{};
        std::array<int, kMaxDim> idx{};
        double cellvol = 1.0;
        for (int i = 0; i < d; ++i) cellvol *= (t.v[i] - s.v[i]) / q;
        const long long nodes = [&] {
            long long n = 1;
            for (int i = 0; i < d; ++i) n *= q;
            return n;
        }();
        for (long long f = 0; f < nodes; ++f) {
            Point r(d);
            for (int i = 0; i < d; ++i)
                r.v[i] = s.v[i] + (idx[i] + 0.5) * (t.v[i] - s.v[i]) / q;

            if (closed_form) {
                double rvol = 1.0;
                for (int i = 0; i < d; ++i) rvol *= r.v[i];
                const double decay = 0.5 * z2 * (rvol - svol);
                acc += std::exp(Complex(-decay, corner_phase));
            } else {
                // grid conditioning: observed = sample-grid nodes <= s,
                // thinned by 2^{-cond_level} strides
                std::vector<std::vector<double>> kept(d);
                for (int i = 0; i < d; ++i) {
                    const auto& axis = path.grid.axes[i];
                    std::vector<double> below;
                    for (double c : axis)
                        if (c <= s.v[i] + 1e-12) below.push_back(c);
                    const std::size_t want = (1u << cond_level) + 1;
                    const std::size_t stride =
                        std::max<std::size_t>(1, below.size() / want);
                    for (std::size_t kk = 0; kk < below.size(); kk += stride)
                        kept[i].push_back(below[kk]);
                    if (kept[i].empty() || kept[i].back() != below.back())
                        kept[i].push_back(below.back());
                }
                std::vector<Point> obs;
                std::vector<int> sizes(d);
                long long total = 1;
                for (int i = 0; i < d; ++i) {
                    sizes[i] = static_cast<int>(kept[i].size());
                    total *= sizes[i];
                }
                for (long long p = 0; p < total; ++p) {
                    Point pt(d);
                    long long rem = p;
                    for (int i = d - 1; i >= 0; --i) {
                        pt.v[i] = kept[i][rem % sizes[i]];
                        rem /= sizes[i];
                    }
                    obs.push_back(pt);
                }
                auto cm = conditional_moments(ConditioningProblem(model, r, obs));
                double phase = 0.0;
                for (int c = 0; c < model.n; ++c) {
                    double mean = 0.0;
                    for (std::size_t kk = 0; kk < obs.size(); ++kk)
                        mean += cm.mean_weights[kk] * path.value_at(obs[kk], c);
                    phase += z[c] * mean;
                }
                const double decay = 0.5 * z2 * cm.variance;
                acc += std::exp(Complex(-decay, phase));
            }
            for (int i = d - 1; i >= 0; --i) {
                if (++idx[i] < q) break;
                idx[i] = 0;
            }
        }
        return acc * cellvol;
    };
    return germ;
}

// ---------------------------------------------------------------------------
// Tower-property vanishing check
// ---------------------------------------------------------------------------

struct TowerCheck {
    double projection_rms = 0.0;  // RMS of the fitted linear projection
    double null_rms = 0.0;        // expected under a true zero projection
    double stderr = 0.0;          // jackknife error of projection_rms
    int regressors = 0;
    std::size_t samples = 0;
};

/// Estimates || E[ delta^theta_u Xi_{s,t} | field at grid points <=_eta s ] ||_2
/// by OLS of the per-sample delta values on the observed field values. The
/// tower property makes the true projection zero; the fitted RMS should sit at
/// its overfitting floor null_rms = sigma sqrt(k/N).
inline TowerCheck verify_tower_vanishing(const StochasticGerm& germ, const PathEnsemble& ensemble,
                                         const Rect& rect, const IndexSet& theta,
                                         const IndexSet& eta, int regressor_level = 2,
                                         std::optional<Point> cut = std::nullopt)
{
    if (eta.is_empty() || !eta.subset_of(theta))
        throw std::invalid_argument("verify_tower_vanishing: need nonempty eta within theta");
    const int d = rect.dim();
    const Point u = cut.value_or(midpoint(rect.lo, rect.hi));
    const std::size_t N = ensemble.size();

    // regressors: field values at dyadic nodes of [0, hi] with p_i <= s_i for i in eta
    std::vector<Point> regress_pts;
    {
        const long long n = 1LL << regressor_level;
        std::vector<std::vector<double>> coords(d);
        for (int i = 0; i < d; ++i) {
            const double top = eta.contains(i) ? rect.lo.v[i] : rect.hi.v[i];
            for (long long k = 0; k <= n; ++k)
                coords[i].push_back(top * static_cast<double>(k) / static_cast<double>(n));
        }
        std::vector<int> sizes(d);
        long long total = 1;
        for (int i = 0; i < d; ++i) {
            sizes[i] = static_cast<int>(coords[i].size());
            total *= sizes[i];
        }
        for (long long p = 0; p < total; ++p) {
            Point pt(d);
            long long rem = p;
            for (int i = d - 1; i >= 0; --i) {
                pt.v[i] = coords[i][rem % sizes[i]];
                rem /= sizes[i];
            }
            regress_pts.push_back(pt);
        }
    }
    const int k = static_cast<int>(regress_pts.size());

    Eigen::MatrixXd X(N, k);
    Eigen::VectorXd yr(N), yi(N);
    for (std::size_t s = 0; s < N; ++s) {
        auto g = [&](const Point& a, const Point& b) { return germ(a, b, s); };
        const Complex delta = delta_apply(g, u, theta, rect);
        yr(s) = delta.real();
        yi(s) = delta.imag();
        for (int j = 0; j < k; ++j) X(s, j) = ensemble.path(s).value_at(regress_pts[j]);
    }

    auto fit_rms = [&](const Eigen::MatrixXd& Xs, const Eigen::VectorXd& ar,
                       const Eigen::VectorXd& ai) {
        PsdPseudoInverse pinv(Xs.transpose() * Xs, 1e-12);
        const Eigen::VectorXd br = pinv.solve(Xs.transpose() * ar);
        const Eigen::VectorXd bi = pinv.solve(Xs.transpose() * ai);
        const double ss = (Xs * br).squaredNorm() + (Xs * bi).squaredNorm();
        return std::sqrt(ss / static_cast<double>(Xs.rows()));
    };

    TowerCheck out;
    out.regressors = k;
    out.samples = N;
    out.projection_rms = fit_rms(X, yr, yi);
    const double sigma2 = (yr.squaredNorm() + yi.squaredNorm()) / static_cast<double>(N);
    out.null_rms = std::sqrt(sigma2 * k / static_cast<double>(N));

    // block jackknife on the fitted RMS
    const int blocks = 10;
    std::vector<double> leave(blocks);
    for (int b = 0; b < blocks; ++b) {
        std::vector<Eigen::Index> keep;
        for (std::size_t s = 0; s < N; ++s)
            if (static_cast<int>(s % blocks) != b) keep.push_back(s);
        Eigen::MatrixXd Xb(keep.size(), k);
        Eigen::VectorXd rb(keep.size()), ib(keep.size());
        for (std::size_t r = 0; r < keep.size(); ++r) {
            Xb.row(r) = X.row(keep[r]);
            rb(r) = yr(keep[r]);
            ib(r) = yi(keep[r]);
        }
        leave[b] = fit_rms(Xb, rb, ib);
    }
    double mjk = 0.0;
    for (double v : leave) mjk += v;
    mjk /= blocks;
    double var = 0.0;
    for (double v : leave) var += (v - mjk) * (v - mjk);
    out.stderr = std::sqrt(var * (blocks - 1) / blocks);
    return out;
}

// ---------------------------------------------------------------------------
// BDG Monte Carlo check
// ---------------------------------------------------------------------------

struct BDGCheck {
    int m = 2;
    Estimate lhs;   // || sum_k Z_k ||_m
    Estimate rhs;   // ( sum_k ||Z_k||_m^2 )^{1/2}
    double ratio = 0.0;
    double ratio_stderr = 0.0;
    long long cells = 0;
};

/// rows[sample][cell]; both sides estimated on the same ensemble with block
/// jackknife errors.
inline BDGCheck bdg_check(const std::vector<std::vector<double>>& rows, int m, int blocks = 20)
{
    const std::size_t N = rows.size();
    if (N < 8) throw std::invalid_argument("bdg_check: ensemble too small");
    const std::size_t K = rows.front().size();
    for (const auto& r : rows)
        if (r.size() != K) throw std::invalid_argument("bdg_check: ragged rows");
    if (m >= 4 && N < 500)
        throw std::invalid_argument("bdg_check: ensemble too small for m >= 4 moments");

    auto eval = [&](const std::vector<std::size_t>& idx) {
        std::vector<double> sums(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            double acc = 0.0;
            for (double v : rows[idx[r]]) acc += v;
            sums[r] = acc;
        }
        const double lhs = lm_norm<double>(sums, m);
        double rhs2 = 0.0;
        std::vector<double> col(idx.size());
        for (std::size_t c = 0; c < K; ++c) {
            for (std::size_t r = 0; r < idx.size(); ++r) col[r] = rows[idx[r]][c];
            const double nm = lm_norm<double>(col, m);
            rhs2 += nm * nm;
        }
        return std::pair{lhs, std::sqrt(rhs2)};
    };

    std::vector<std::size_t> all(N);
    for (std::size_t i = 0; i < N; ++i) all[i] = i;
    auto [lhs, rhs] = eval(all);

    std::vector<double> jk_lhs(blocks), jk_rhs(blocks), jk_ratio(blocks);
    for (int b = 0; b < blocks; ++b) {
        std::vector<std::size_t> keep;
        keep.reserve(N);
        for (std::size_t i = 0; i < N; ++i)
            if (static_cast<int>(i % blocks) != b) keep.push_back(i);
        auto [l, r] = eval(keep);
        jk_lhs[b] = l;
        jk_rhs[b] = r;
        jk_ratio[b] = l / r;
    }
    auto jk_se = [&](const std::vector<double>& vs) {
        double mn = 0.0;
        for (double v : vs) mn += v;
        mn /= vs.size();
        double var = 0.0;
        for (double v : vs) var += (v - mn) * (v - mn);
        return std::sqrt(var * (vs.size() - 1) / vs.size());
    };

    BDGCheck out;
    out.m = m;
    out.cells = static_cast<long long>(K);
    out.lhs = {lhs, jk_se(jk_lhs)};
    out.rhs = {rhs, jk_se(jk_rhs)};
    out.ratio = lhs / rhs;
    out.ratio_stderr = jk_se(jk_ratio);
    return out;
}

/// Martingale-difference array for the BDG check: Z over the cells of an NxN
/// dyadic grid on [0,1]^2, Z_cell = (sheet rectangle increment) * weight(W at
/// the cell corner), plus an optional deterministic bias * sqrt(cell area)
/// that breaks the vanishing marginal conditional means (falsification
/// control).
inline std::vector<std::vector<double>> sheet_increment_array(
    int cells_per_axis, std::size_t n_samples, std::uint64_t master_seed, double bias = 0.0,
    const std::function<double(double)>& weight = [](double w) { return std::cos(w); },
    int workers = 0)
{
    const int N = cells_per_axis;
    auto model = FieldModel::brownian_sheet(2);
    auto grid = SampleGrid::uniform(Rect(Point{0.0, 0.0}, Point{1.0, 1.0}), N + 1);
    std::vector<std::vector<double>> rows(n_samples);
    const double root_area = 1.0 / N;
    parallel_for(n_samples, workers, [&](std::size_t k) {
        auto sample = sample_exact(model, grid, master_seed, k, SampleRoute::SheetIncrements);
        auto& row = rows[k];
        row.resize(static_cast<std::size_t>(N) * N);
        const long long stride = N + 1;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                const long long a = i * stride + j;
                const double inc = sample.value(a + stride + 1) - sample.value(a + stride) -
                                   sample.value(a + 1) + sample.value(a);
                row[static_cast<std::size_t>(i) * N + j] =
                    inc * weight(sample.value(a)) + bias * root_area;
            }
    });
    return rows;
}

// ---------------------------------------------------------------------------
// Every-partition convergence
// ---------------------------------------------------------------------------

/// Random grid-like partition with mesh at most mesh_target on active axes.
inline GridPartition random_partition(const Rect& rect, const IndexSet& theta,
                                      double mesh_target, RandomStream& rng)
{
    GridPartition p;
    p.active = theta;
    p.axes.resize(rect.dim());
    for (int i = 0; i < rect.dim(); ++i) {
        auto& axis = p.axes[i];
        axis.push_back(rect.lo.v[i]);
        if (theta.contains(i)) {
            double x = rect.lo.v[i];
            while (true) {
                x += rng.uniform(0.4, 1.0) * mesh_target;
                if (x >= rect.hi.v[i] - 1e-12) break;
                axis.push_back(x);
            }
        }
        if (rect.hi.v[i] > rect.lo.v[i]) axis.push_back(rect.hi.v[i]);
    }
    return p;
}

/// L_m distances from partition sums to a per-sample reference limit
/// (typically the finest dyadic estimate). Meshes must strictly decrease.
inline std::vector<Estimate> every_partition_convergence(
    const StochasticGerm& germ, const std::vector<GridPartition>& partitions,
    const std::vector<Complex>& reference, int m = 2, int workers = 0)
{
    for (std::size_t i = 0; i + 1 < partitions.size(); ++i)
        if (!(partitions[i + 1].mesh() < partitions[i].mesh()))
            throw std::invalid_argument(
                "every_partition_convergence: meshes must strictly decrease");
    const std::size_t N = reference.size();
    std::vector<std::vector<Complex>> diffs(partitions.size(), std::vector<Complex>(N));
    parallel_for(N, workers, [&](std::size_t k) {
        auto g = [&](const Point& u, const Point& v) { return germ(u, v, k); };
        for (std::size_t pi = 0; pi < partitions.size(); ++pi)
            diffs[pi][k] = riemann_sum(g, partitions[pi]) - reference[k];
    });
    std::vector<Estimate> out;
    for (auto& dv : diffs) out.push_back(lm_norm_jackknife<Complex>(dv, m));
    return out;
}

}  // namespace sheetsew
