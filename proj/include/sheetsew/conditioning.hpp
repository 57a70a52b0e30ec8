#pragma once

// Exact finite-dimensional Gaussian conditioning and the local
// non-determinism checks: conditional moments given point observations,
// strong-past conditional variance via dyadic observation grids, the explicit
// fractional-sheet lower bound, and the additive/multiplicative/sectorial LND
// probes with their boundary falsifier.
//
// Gaussian conditional variance never depends on the observed values, only on
// covariances; accordingly nothing in this header consumes samples.

#include <optional>
#include <string>
#include <vector>

#include "sheetsew/gaussian_field.hpp"
#include "sheetsew/linalg.hpp"
#include "sheetsew/multiindex.hpp"
#include "sheetsew/parallel.hpp"
#include "sheetsew/rng.hpp"

namespace sheetsew {

// ---------------------------------------------------------------------------
// Conditioning on arbitrary finite observation sets
// ---------------------------------------------------------------------------

struct ConditioningProblem {
    FieldModel model;
    Point target;
    std::vector<Point> observed;  // deduplicated on construction

    ConditioningProblem(FieldModel m, Point u, std::vector<Point> pts)
        : model(std::move(m)), target(std::move(u)), observed(std::move(pts))
    {
        for (auto& p : observed)
            if (p.dim != model.d || !leq(Point::zero(model.d), p))
                throw std::invalid_argument("ConditioningProblem: bad observation point");
        std::vector<Point> unique;
        for (const auto& p : observed) {
            bool seen = false;
            for (const auto& q : unique) seen = seen || (q == p);
            if (!seen) unique.push_back(p);
        }
        observed = std::move(unique);
    }
};

struct ConditionalMoments {
    std::vector<double> mean_weights;  // coefficients on the observed values
    double variance = 0.0;
};

/// variance = R(u,u) - r^T C^+ r, weights = C^+ r, pseudo-inverse with
/// relative eigenvalue cutoff 1e-10 (observation sets touching the boundary
/// are rank-deficient by construction).
inline ConditionalMoments conditional_moments(const ConditioningProblem& problem)
{
    const auto& pts = problem.observed;
    const Eigen::Index m = static_cast<Eigen::Index>(pts.size());
    ConditionalMoments out;
    const double r_uu = covariance(problem.model, problem.target, problem.target);
    if (m == 0) {
        out.variance = r_uu;
        return out;
    }
    const Eigen::MatrixXd C = dense_cov_gram(problem.model, pts);
    Eigen::VectorXd r(m);
    for (Eigen::Index k = 0; k < m; ++k)
        r(k) = covariance(problem.model, problem.target, pts[k]);
    PsdPseudoInverse pinv(C);
    const Eigen::VectorXd w = pinv.solve(r);
    out.mean_weights.assign(w.data(), w.data() + m);
    out.variance = std::max(0.0, r_uu - r.dot(w));
    return out;
}

// ---------------------------------------------------------------------------
// Strong-past conditional variance via dyadic observation grids
// ---------------------------------------------------------------------------

/// Grid approximation of the strong past F_s: all dyadic nodes of [origin, s].
struct StrongPastApprox {
    Point s;
    int level = 5;
    Point origin;  // defaults to 0

    StrongPastApprox(Point past, int lvl) : s(past), level(lvl), origin(Point::zero(past.dim)) {}
    StrongPastApprox(Point past, int lvl, Point org) : s(past), level(lvl), origin(org)
    {
        if (!leq(origin, s)) throw std::invalid_argument("StrongPastApprox: origin <= s required");
    }
};

namespace detail {

inline std::vector<double> dyadic_axis_coords(double lo, double hi, int level)
{
    std::vector<double> c;
    if (hi <= lo) {
        c.push_back(lo);
        return c;
    }
    const long long n = 1LL << level;
    c.reserve(n + 1);
    for (long long k = 0; k <= n; ++k)
        c.push_back(lo + (hi - lo) * (static_cast<double>(k) / static_cast<double>(n)));
    c.back() = hi;
    return c;
}

/// Dense covariance Gram of a grid-structured point set, assembled from
/// per-axis Grams (avoids per-entry kernel quadrature for the
/// boundary-augmented model).
inline Eigen::MatrixXd grid_cov_gram(const FieldModel& model,
                                     const std::vector<std::vector<double>>& coords)
{
    const int d = model.d;
    long long npts = 1;
    for (const auto& c : coords) npts *= static_cast<long long>(c.size());
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(npts, npts);

    auto expand = [&](const std::vector<Eigen::MatrixXd>& axis_grams, double weight,
                      bool product_all) {
        // entry = weight * prod_i G_i(p_i, q_i) (or a single-axis factor)
        std::vector<long long> sizes(d);
        for (int i = 0; i < d; ++i) sizes[i] = static_cast<long long>(coords[i].size());
        std::vector<int> pi(d), qi(d);
        for (long long p = 0; p < npts; ++p) {
            long long rem = p;
            for (int i = d - 1; i >= 0; --i) {
                pi[i] = static_cast<int>(rem % sizes[i]);
                rem /= sizes[i];
            }
            for (long long q = 0; q <= p; ++q) {
                long long rq = q;
                for (int i = d - 1; i >= 0; --i) {
                    qi[i] = static_cast<int>(rq % sizes[i]);
                    rq /= sizes[i];
                }
                double v = weight;
                if (product_all)
                    for (int i = 0; i < d; ++i) v *= axis_grams[i](pi[i], qi[i]);
                else
                    v *= axis_grams[0](pi[0], qi[0]);
                C(p, q) += v;
                C(q, p) = C(p, q);
            }
        }
    };

    if (model.factorizes()) {
        std::vector<Eigen::MatrixXd> grams(d);
        for (int i = 0; i < d; ++i) grams[i] = axis_cov_gram(model, i, coords[i]);
        expand(grams, 1.0, true);
        return C;
    }
    for (int i = 0; i < d; ++i) {
        const double w = model.boundary_weight[i];
        if (w == 0.0) continue;
        // boundary term varies along axis i only: reorder via a single-axis view
        Eigen::MatrixXd b = rl_axis_gram(model.hurst_boundary[i], coords[i]);
        std::vector<long long> sizes(d);
        for (int k = 0; k < d; ++k) sizes[k] = static_cast<long long>(coords[k].size());
        std::vector<int> pi(d), qi(d);
        for (long long p = 0; p < npts; ++p) {
            long long rem = p;
            for (int k = d - 1; k >= 0; --k) {
                pi[k] = static_cast<int>(rem % sizes[k]);
                rem /= sizes[k];
            }
            for (long long q = 0; q <= p; ++q) {
                long long rq = q;
                for (int k = d - 1; k >= 0; --k) {
                    qi[k] = static_cast<int>(rq % sizes[k]);
                    rq /= sizes[k];
                }
                C(p, q) += w * w * b(pi[i], qi[i]);
                C(q, p) = C(p, q);
            }
        }
    }
    if (model.interior_weight != 0.0) {
        std::vector<Eigen::MatrixXd> grams(d);
        for (int i = 0; i < d; ++i) grams[i] = rl_axis_gram(model.hurst_interior[i], coords[i]);
        expand(grams, model.interior_weight * model.interior_weight, true);
    }
    return C;
}

}  // namespace detail

/// Var(W_t | field at all dyadic nodes of [origin, s]); monotone nonincreasing
/// in the level and an upper bound for the continuum Var(W_t | F_s).
/// Factorized models use the Kronecker identity (A (x) B)^+ = A^+ (x) B^+.
inline double strong_past_variance(const FieldModel& model, const Point& t,
                                   const StrongPastApprox& approx)
{
    if (t.dim != model.d) throw std::invalid_argument("strong_past_variance: dim mismatch");
    if (!leq(approx.s, t))
        throw std::invalid_argument("strong_past_variance: t >= s required");

    const int d = model.d;
    std::vector<std::vector<double>> coords(d);
    for (int i = 0; i < d; ++i)
        coords[i] = detail::dyadic_axis_coords(approx.origin.v[i], approx.s.v[i], approx.level);

    if (model.factorizes()) {
        double var_t = 1.0, qprod = 1.0;
        for (int i = 0; i < d; ++i) {
            var_t *= axis_cov(model, i, t.v[i], t.v[i]);
            Eigen::MatrixXd A = axis_cov_gram(model, i, coords[i]);
            Eigen::VectorXd r(static_cast<Eigen::Index>(coords[i].size()));
            for (Eigen::Index k = 0; k < r.size(); ++k)
                r(k) = axis_cov(model, i, t.v[i], coords[i][k]);
            qprod *= PsdPseudoInverse(A).quad_form(r);
        }
        return std::max(0.0, var_t - qprod);
    }

    // dense route (boundary-augmented): Gram from per-axis pieces
    long long npts = 1;
    for (const auto& c : coords) npts *= static_cast<long long>(c.size());
    Eigen::MatrixXd C = detail::grid_cov_gram(model, coords);
    Eigen::VectorXd r(npts);
    std::vector<long long> sizes(d);
    for (int i = 0; i < d; ++i) sizes[i] = static_cast<long long>(coords[i].size());
    std::vector<int> qi(d);
    for (long long q = 0; q < npts; ++q) {
        long long rq = q;
        Point p(d);
        for (int i = d - 1; i >= 0; --i) {
            qi[i] = static_cast<int>(rq % sizes[i]);
            rq /= sizes[i];
            p.v[i] = coords[i][qi[i]];
        }
        r(q) = covariance(model, t, p);
    }
    const double var_t = covariance(model, t, t);
    return std::max(0.0, var_t - PsdPseudoInverse(C).quad_form(r));
}

// ---------------------------------------------------------------------------
// Fractional-sheet explicit conditional-variance lower bound (d = 2)
// ---------------------------------------------------------------------------

/// The three-term bracket of the direct moving-average calculation,
/// without any normalization constant.
inline double fbs_variance_bracket(const std::array<double, 2>& H, const Point& s, const Point& t)
{
    if (s.dim != 2 || t.dim != 2)
        throw std::invalid_argument("fbs_variance_bracket: d=2 required");
    if (!leq(Point::zero(2), s) || !leq(s, t))
        throw std::invalid_argument("fbs_variance_bracket: 0 <= s <= t required");
    const double g1 = std::pow(t[0] - s[0], 2.0 * H[0]);
    const double g2 = std::pow(t[1] - s[1], 2.0 * H[1]);
    const double f1 = std::pow(t[0], 2.0 * H[0]) - g1;
    const double f2 = std::pow(t[1], 2.0 * H[1]) - g2;
    return g1 * g2 + g1 * f2 + g2 * f1;
}

/// Normalization making the bracket a true lower bound for the *normalized*
/// fractional Brownian sheet: 1 / (4 H1 H2 kappa1^2 kappa2^2). Equals the
/// exact conditional variance at H = (1/2, 1/2).
inline double fbs_lnd_constant(const std::array<double, 2>& H)
{
    return 1.0 / (4.0 * H[0] * H[1] * kappa_squared_1d(H[0]) * kappa_squared_1d(H[1]));
}

inline double fbs_variance_lower_bound(const std::array<double, 2>& H, const Point& s,
                                       const Point& t)
{
    return fbs_lnd_constant(H) * fbs_variance_bracket(H, s, t);
}

// ---------------------------------------------------------------------------
// LND probes
// ---------------------------------------------------------------------------

enum class LndNotion { Sectorial, Strong, Additive, Multiplicative };

inline std::string to_string(LndNotion n)
{
    switch (n) {
        case LndNotion::Sectorial: return "sectorial";
        case LndNotion::Strong: return "strong";
        case LndNotion::Additive: return "additive";
        case LndNotion::Multiplicative: return "multiplicative";
    }
    return "?";
}

struct LNDReport {
    LndNotion notion = LndNotion::Additive;
    std::vector<double> zeta;
    double c_hat = 0.0;
    Point worst_s, worst_t;
    double worst_variance = 0.0;
    double worst_comparison = 0.0;
    long long pairs_tested = 0;
    long long pairs_skipped = 0;  // zero comparison function
    int level = 0;
    double epsilon = 0.0;
};

/// Sum or product of per-axis gap powers, per the notion.
inline double lnd_comparison(LndNotion notion, std::span<const double> zeta, const Point& s,
                             const Point& t)
{
    double acc = (notion == LndNotion::Multiplicative) ? 1.0 : 0.0;
    for (int i = 0; i < s.dim; ++i) {
        const double g = std::pow(std::abs(t.v[i] - s.v[i]), 2.0 * zeta[i]);
        if (notion == LndNotion::Multiplicative)
            acc *= g;
        else
            acc += g;
    }
    return acc;
}

/// Estimates the infimum of Var(W_t | grid past of s) over pairs in `domain`
/// relative to the notion's comparison function. Random pairs plus a
/// deterministic sweep over near-degenerate geometry (one gap to zero, pairs
/// on the coordinate axes) where the infimum typically lives.
inline LNDReport check_lnd(const FieldModel& model, LndNotion notion,
                           std::span<const double> zeta, const Rect& domain, int trials,
                           int level, std::uint64_t seed = 1, double epsilon = -1.0,
                           int workers = 0)
{
    if (static_cast<int>(zeta.size()) != model.d)
        throw std::invalid_argument("check_lnd: zeta dimension mismatch");
    for (double z : zeta)
        if (!(z > 0.0 && z < 1.0)) throw std::invalid_argument("check_lnd: zeta in (0,1)");
    if (domain.volume() == 0.0 && notion == LndNotion::Multiplicative)
        throw std::invalid_argument("check_lnd: empty domain");

    const int d = model.d;
    Rect box = domain;
    double eps = 0.0;
    if (notion == LndNotion::Sectorial) {
        eps = epsilon;
        if (eps < 0.0) {
            double top = 0.0;
            for (int i = 0; i < d; ++i) top = std::max(top, domain.hi.v[i]);
            eps = 0.1 * top;
        }
        Point lo = domain.lo;
        for (int i = 0; i < d; ++i) lo.v[i] = std::max(lo.v[i], eps);
        box = Rect(lo, domain.hi);
    }

    std::vector<std::pair<Point, Point>> pairs;
    RandomStream rng(seed, derive_stream(stream_purpose::kPairSampling));
    for (int k = 0; k < trials; ++k) {
        Point s(d), t(d);
        for (int i = 0; i < d; ++i) {
            double a = rng.uniform(box.lo.v[i], box.hi.v[i]);
            double b = rng.uniform(box.lo.v[i], box.hi.v[i]);
            if (a > b) std::swap(a, b);
            s.v[i] = a;
            t.v[i] = b;
        }
        pairs.emplace_back(s, t);
    }
    // deterministic sweep: shrink one gap toward (and onto) zero
    for (int i = 0; i < d; ++i) {
        for (double frac : {0.1, 0.01, 0.001, 0.0}) {
            Point s(d), t(d);
            for (int j = 0; j < d; ++j) {
                const double span = box.gap(j);
                if (j == i) {
                    s.v[j] = box.lo.v[j];
                    t.v[j] = box.lo.v[j] + frac * span;
                } else {
                    s.v[j] = box.lo.v[j] + 0.25 * span;
                    t.v[j] = box.lo.v[j] + 0.75 * span;
                }
            }
            pairs.emplace_back(s, t);
        }
    }

    struct Row {
        double ratio = std::numeric_limits<double>::infinity();
        double variance = 0.0, comparison = 0.0;
        bool skipped = true;
    };
    std::vector<Row> rows(pairs.size());
    parallel_for(pairs.size(), workers, [&](std::size_t k) {
        const auto& [s, t] = pairs[k];
        const double cmp = lnd_comparison(notion, zeta, s, t);
        if (cmp <= 0.0) return;  // skipped, counted below
        const double var = strong_past_variance(model, t, StrongPastApprox(s, level));
        rows[k] = {var / cmp, var, cmp, false};
    });

    LNDReport rep;
    rep.notion = notion;
    rep.zeta.assign(zeta.begin(), zeta.end());
    rep.level = level;
    rep.epsilon = eps;
    rep.c_hat = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k].skipped) {
            ++rep.pairs_skipped;
            continue;
        }
        ++rep.pairs_tested;
        if (rows[k].ratio < rep.c_hat) {
            rep.c_hat = rows[k].ratio;
            rep.worst_s = pairs[k].first;
            rep.worst_t = pairs[k].second;
            rep.worst_variance = rows[k].variance;
            rep.worst_comparison = rows[k].comparison;
        }
    }
    if (rep.pairs_tested == 0) throw std::invalid_argument("check_lnd: no valid pairs");
    return rep;
}

// ---------------------------------------------------------------------------
// Boundary falsifier
// ---------------------------------------------------------------------------

struct BoundaryWitness {
    Point witness;
    double variance = 0.0;
    double additive_comparison = 0.0;
};

/// For a model with deterministic boundary, exhibits t = (t1, 0, ...) with
/// zero conditional variance but positive additive comparison, witnessing the
/// failure of additive LND. Models with stochastic boundary yield no witness.
inline std::optional<BoundaryWitness> boundary_deterministic_falsifier(const FieldModel& model,
                                                                       double t1 = 0.5,
                                                                       int level = 3)
{
    if (!model.deterministic_boundary()) return std::nullopt;
    BoundaryWitness w;
    w.witness = Point::zero(model.d);
    w.witness.v[0] = t1;
    w.variance = strong_past_variance(model, w.witness,
                                      StrongPastApprox(Point::zero(model.d), level));
    std::vector<double> zeta(model.d, 0.5);
    w.additive_comparison =
        lnd_comparison(LndNotion::Additive, zeta, Point::zero(model.d), w.witness);
    return w;
}

}  // namespace sheetsew
