#pragma once

// Rectangular-increment algebra on [0,T]^d: axis subsets, projections,
// square increments, the psi/delta cutting operators, grid-like partitions
// and germ Riemann sums. Everything here is exact (no randomness) and pure.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

namespace sheetsew {

inline constexpr int kMaxDim = 8;

// ---------------------------------------------------------------------------
// IndexSet: subset of axes {0,...,d-1} with bitmask semantics
// ---------------------------------------------------------------------------

struct IndexSet {
    std::uint32_t bits = 0;
    int dim = 0;

    static IndexSet empty(int d) { return check_dim(d), IndexSet{0u, d}; }
    static IndexSet full(int d) { return check_dim(d), IndexSet{mask(d), d}; }
    static IndexSet of(int d, std::initializer_list<int> axes)
    {
        check_dim(d);
        IndexSet s{0u, d};
        for (int a : axes) {
            if (a < 0 || a >= d) throw std::invalid_argument("IndexSet: axis out of range");
            s.bits |= (1u << a);
        }
        return s;
    }
    static IndexSet singleton(int d, int axis) { return of(d, {axis}); }

    bool contains(int axis) const { return (bits >> axis) & 1u; }
    int size() const { return __builtin_popcount(bits); }
    bool is_empty() const { return bits == 0; }
    IndexSet complement() const { return IndexSet{~bits & mask(dim), dim}; }
    IndexSet with(int axis) const { return IndexSet{bits | (1u << axis), dim}; }
    IndexSet without(int axis) const { return IndexSet{bits & ~(1u << axis), dim}; }
    bool subset_of(const IndexSet& other) const { return (bits & ~other.bits) == 0; }

    bool operator==(const IndexSet& o) const { return bits == o.bits && dim == o.dim; }

    static std::uint32_t mask(int d) { return (d == 32) ? ~0u : ((1u << d) - 1u); }
    static void check_dim(int d)
    {
        if (d < 1 || d > kMaxDim) throw std::invalid_argument("IndexSet: dim must be in [1,8]");
    }
};

// Visits every subset eta of theta (including empty and theta itself).
template <class Fn>
void for_each_subset(const IndexSet& theta, Fn&& fn)
{
    std::uint32_t sub = theta.bits;
    while (true) {
        fn(IndexSet{sub, theta.dim});
        if (sub == 0) break;
        sub = (sub - 1) & theta.bits;
    }
}

// ---------------------------------------------------------------------------
// Point / Rect
// ---------------------------------------------------------------------------

struct Point {
    std::array<double, kMaxDim> v{};
    int dim = 0;

    Point() = default;
    explicit Point(int d) : dim(d) { IndexSet::check_dim(d); }
    Point(std::initializer_list<double> coords)
    {
        if (coords.size() < 1 || coords.size() > kMaxDim)
            throw std::invalid_argument("Point: dim must be in [1,8]");
        dim = static_cast<int>(coords.size());
        int i = 0;
        for (double c : coords) v[i++] = c;
    }

    static Point constant(int d, double value)
    {
        Point p(d);
        for (int i = 0; i < d; ++i) p.v[i] = value;
        return p;
    }
    static Point zero(int d) { return constant(d, 0.0); }

    double operator[](int i) const { return v[i]; }
    double& operator[](int i) { return v[i]; }
    int size() const { return dim; }

    bool operator==(const Point& o) const
    {
        if (dim != o.dim) return false;
        for (int i = 0; i < dim; ++i)
            if (v[i] != o.v[i]) return false;
        return true;
    }
};

inline std::ostream& operator<<(std::ostream& os, const Point& p)
{
    os << '(';
    for (int i = 0; i < p.dim; ++i) os << (i ? "," : "") << p.v[i];
    return os << ')';
}

// Componentwise partial order s <= t.
inline bool leq(const Point& a, const Point& b)
{
    if (a.dim != b.dim) throw std::invalid_argument("leq: dimension mismatch");
    for (int i = 0; i < a.dim; ++i)
        if (!(a.v[i] <= b.v[i])) return false;
    return true;
}

inline Point midpoint(const Point& a, const Point& b)
{
    Point m(a.dim);
    for (int i = 0; i < a.dim; ++i) m.v[i] = 0.5 * (a.v[i] + b.v[i]);
    return m;
}

/// Axis-aligned box [lo, hi], lo <= hi componentwise.
struct Rect {
    Point lo, hi;

    Rect() = default;
    Rect(Point l, Point h) : lo(std::move(l)), hi(std::move(h))
    {
        if (lo.dim != hi.dim) throw std::invalid_argument("Rect: dimension mismatch");
        if (!leq(lo, hi)) throw std::invalid_argument("Rect: lo must be <= hi");
    }

    int dim() const { return lo.dim; }
    double gap(int axis) const { return hi.v[axis] - lo.v[axis]; }
    double volume() const
    {
        double vol = 1.0;
        for (int i = 0; i < dim(); ++i) vol *= gap(i);
        return vol;
    }
    bool contains(const Point& u) const { return leq(lo, u) && leq(u, hi); }
    bool contains(const Rect& r) const { return leq(lo, r.lo) && leq(r.hi, hi); }
};

// ---------------------------------------------------------------------------
// Projection and square increment
// ---------------------------------------------------------------------------

/// pi^theta_base(target): base_i on axes in theta, target_i elsewhere.
inline Point project(const Point& base, const Point& target, const IndexSet& theta)
{
    if (base.dim != target.dim || base.dim != theta.dim)
        throw std::invalid_argument("project: dimension mismatch");
    Point r = target;
    for (int i = 0; i < base.dim; ++i)
        if (theta.contains(i)) r.v[i] = base.v[i];
    return r;
}

inline Point project_axis(const Point& base, const Point& target, int axis)
{
    Point r = target;
    r.v[axis] = base.v[axis];
    return r;
}

/// Square increment of a point function over [lo,hi] restricted to axes theta,
/// via the signed corner sum over subsets of theta. theta empty gives f(lo).
template <class F>
auto square_increment(F&& f, const Rect& rect, const IndexSet& theta)
    -> std::invoke_result_t<F, const Point&>
{
    using R = std::invoke_result_t<F, const Point&>;
    R acc{};
    for_each_subset(theta, [&](const IndexSet& eta) {
        // corner: hi on axes in eta, lo elsewhere
        Point corner = project(rect.hi, rect.lo, eta);
        int sign_bits = theta.size() - eta.size();
        if (sign_bits % 2 == 0)
            acc += f(corner);
        else
            acc -= f(corner);
    });
    return acc;
}

// ---------------------------------------------------------------------------
// psi / delta operators on two-parameter germs
// ---------------------------------------------------------------------------

struct SignedPair {
    int sign;
    Point s, t;
};

/// Signed germ-evaluation list for delta^theta_u applied at (s,t).
/// Product expansion of (Id - psi^i_u) over i in theta: 3^{|theta|} terms.
inline std::vector<SignedPair> delta_terms(const Point& s, const Point& t, const Point& u,
                                           const IndexSet& theta)
{
    if (theta.is_empty()) throw std::invalid_argument("delta_terms: theta must be nonempty");
    std::vector<SignedPair> terms{{1, s, t}};
    for (int i = 0; i < theta.dim; ++i) {
        if (!theta.contains(i)) continue;
        std::vector<SignedPair> next;
        next.reserve(terms.size() * 3);
        for (const auto& p : terms) {
            next.push_back(p);
            next.push_back({-p.sign, project_axis(u, p.s, i), p.t});
            next.push_back({-p.sign, p.s, project_axis(u, p.t, i)});
        }
        terms = std::move(next);
    }
    return terms;
}

/// psi^eta_u Xi_{s,t} = Xi(pi^eta_u s, t) + Xi(s, pi^eta_u t).
template <class G>
auto psi_apply(G&& germ, const Point& u, const IndexSet& eta, const Rect& rect)
    -> std::invoke_result_t<G, const Point&, const Point&>
{
    if (!rect.contains(u)) throw std::invalid_argument("psi_apply: u outside rect");
    return germ(project(u, rect.lo, eta), rect.hi) + germ(rect.lo, project(u, rect.hi, eta));
}

/// Composition prod_{i in eta} psi^i_u: cuts [s,t] into the 2^{|eta|}
/// subrectangles meeting at u along the axes in eta. Coincides with psi_apply
/// for singletons; for larger eta this is the operator appearing in the
/// decomposition Id - psi^theta = sum of signed deltas.
template <class G>
auto psi_compose(G&& germ, const Point& u, const IndexSet& eta, const Rect& rect)
    -> std::invoke_result_t<G, const Point&, const Point&>
{
    if (!rect.contains(u)) throw std::invalid_argument("psi_compose: u outside rect");
    using R = std::invoke_result_t<G, const Point&, const Point&>;
    std::vector<std::pair<Point, Point>> pairs{{rect.lo, rect.hi}};
    for (int i = 0; i < eta.dim; ++i) {
        if (!eta.contains(i)) continue;
        std::vector<std::pair<Point, Point>> next;
        next.reserve(pairs.size() * 2);
        for (const auto& [a, b] : pairs) {
            next.emplace_back(project_axis(u, a, i), b);
            next.emplace_back(a, project_axis(u, b, i));
        }
        pairs = std::move(next);
    }
    R acc{};
    for (const auto& [a, b] : pairs) acc += germ(a, b);
    return acc;
}

/// delta^theta_u Xi_{s,t} with [s,t] = rect.
template <class G>
auto delta_apply(G&& germ, const Point& u, const IndexSet& theta, const Rect& rect)
    -> std::invoke_result_t<G, const Point&, const Point&>
{
    if (!rect.contains(u)) throw std::invalid_argument("delta_apply: u outside rect");
    using R = std::invoke_result_t<G, const Point&, const Point&>;
    R acc{};
    for (const auto& term : delta_terms(rect.lo, rect.hi, u, theta)) {
        if (term.sign > 0)
            acc += germ(term.s, term.t);
        else
            acc -= germ(term.s, term.t);
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Weight m_x(s,t) = prod |t_i - s_i|^{x_i}
// ---------------------------------------------------------------------------

struct Weight {
    std::array<double, kMaxDim> exponents{};
    int dim = 0;

    Weight() = default;
    Weight(std::initializer_list<double> e)
    {
        if (e.size() < 1 || e.size() > kMaxDim)
            throw std::invalid_argument("Weight: dim must be in [1,8]");
        dim = static_cast<int>(e.size());
        int i = 0;
        for (double x : e) exponents[i++] = x;
    }
    static Weight constant(int d, double x)
    {
        IndexSet::check_dim(d);
        Weight w;
        w.dim = d;
        for (int i = 0; i < d; ++i) w.exponents[i] = x;
        return w;
    }
    /// Exponent a on axes in theta, b elsewhere (the alpha*theta^c + beta*theta pattern).
    static Weight on(const IndexSet& theta, double a, double b)
    {
        Weight w;
        w.dim = theta.dim;
        for (int i = 0; i < theta.dim; ++i) w.exponents[i] = theta.contains(i) ? a : b;
        return w;
    }
};

inline double weight_eval(const Weight& w, const Rect& rect)
{
    if (w.dim != rect.dim()) throw std::invalid_argument("weight_eval: dimension mismatch");
    double prod = 1.0;
    for (int i = 0; i < w.dim; ++i) {
        const double x = w.exponents[i];
        if (x == 0.0) continue;  // zero exponent contributes 1 even at zero gap
        const double gap = std::abs(rect.gap(i));
        if (gap == 0.0 && x < 0.0)
            throw std::domain_error("weight_eval: 0^negative on axis " + std::to_string(i));
        prod *= std::pow(gap, x);
    }
    return prod;
}

// ---------------------------------------------------------------------------
// Grid-like partitions
// ---------------------------------------------------------------------------

/// Per-axis breakpoint lists; axes outside `active` hold exactly the endpoints.
/// A degenerate axis (lo == hi) holds the single breakpoint and contributes one
/// zero-length cell.
struct GridPartition {
    std::vector<std::vector<double>> axes;
    IndexSet active;

    int dim() const { return active.dim; }

    Point lo() const
    {
        Point p(dim());
        for (int i = 0; i < dim(); ++i) p.v[i] = axes[i].front();
        return p;
    }
    Point hi() const
    {
        Point p(dim());
        for (int i = 0; i < dim(); ++i) p.v[i] = axes[i].back();
        return p;
    }
    Rect box() const { return Rect(lo(), hi()); }

    /// Max gap over active axes (inactive axes are a single fixed cell).
    double mesh() const
    {
        double m = 0.0;
        for (int i = 0; i < dim(); ++i) {
            if (!active.contains(i)) continue;
            for (std::size_t k = 0; k + 1 < axes[i].size(); ++k)
                m = std::max(m, axes[i][k + 1] - axes[i][k]);
        }
        return m;
    }

    int axis_cells(int i) const
    {
        return axes[i].size() <= 1 ? 1 : static_cast<int>(axes[i].size()) - 1;
    }

    long long cell_count() const
    {
        long long n = 1;
        for (int i = 0; i < dim(); ++i) n *= axis_cells(i);
        return n;
    }

    void validate() const
    {
        if (static_cast<int>(axes.size()) != dim())
            throw std::invalid_argument("GridPartition: axis count mismatch");
        for (int i = 0; i < dim(); ++i) {
            if (axes[i].empty()) throw std::invalid_argument("GridPartition: empty axis");
            for (std::size_t k = 0; k + 1 < axes[i].size(); ++k)
                if (!(axes[i][k] < axes[i][k + 1]))
                    throw std::invalid_argument("GridPartition: breakpoints not increasing");
            if (!active.contains(i) && axes[i].size() > 2)
                throw std::invalid_argument("GridPartition: inactive axis has interior points");
        }
    }

    /// Visits cells [u,v] row-major over axis 0,...,d-1.
    template <class Fn>
    void for_each_cell(Fn&& fn) const
    {
        const int d = dim();
        std::array<int, kMaxDim> idx{};
        Point u(d), v(d);
        while (true) {
            for (int i = 0; i < d; ++i) {
                if (axes[i].size() <= 1) {
                    u.v[i] = v.v[i] = axes[i][0];
                } else {
                    u.v[i] = axes[i][idx[i]];
                    v.v[i] = axes[i][idx[i] + 1];
                }
            }
            fn(u, v);
            int i = d - 1;
            for (; i >= 0; --i) {
                if (++idx[i] < axis_cells(i)) break;
                idx[i] = 0;
            }
            if (i < 0) break;
        }
    }
};

/// Uniform dyadic partition: active axis i carries 2^{levels_i}+1 breakpoints.
inline GridPartition dyadic_partition(const Rect& rect, const std::array<int, kMaxDim>& levels,
                                      const IndexSet& theta)
{
    const int d = rect.dim();
    if (theta.dim != d) throw std::invalid_argument("dyadic_partition: dimension mismatch");
    GridPartition p;
    p.active = theta;
    p.axes.resize(d);
    for (int i = 0; i < d; ++i) {
        const double a = rect.lo.v[i], b = rect.hi.v[i];
        if (a == b) {
            p.axes[i] = {a};
            continue;
        }
        if (!theta.contains(i)) {
            p.axes[i] = {a, b};
            continue;
        }
        if (levels[i] < 0) throw std::invalid_argument("dyadic_partition: negative level");
        const long long n = 1LL << levels[i];
        p.axes[i].resize(n + 1);
        for (long long k = 0; k <= n; ++k)
            p.axes[i][k] = a + (b - a) * (static_cast<double>(k) / static_cast<double>(n));
        p.axes[i].front() = a;
        p.axes[i].back() = b;
    }
    return p;
}

inline GridPartition dyadic_partition(const Rect& rect, int level, const IndexSet& theta)
{
    std::array<int, kMaxDim> levels{};
    levels.fill(level);
    return dyadic_partition(rect, levels, theta);
}

/// Clamps a partition of an enclosing box onto rect: each breakpoint is clamped
/// into [lo_i,hi_i], the endpoints of rect are inserted, duplicates removed.
inline GridPartition clamp_partition(const GridPartition& source, const Rect& rect)
{
    if (!source.box().contains(rect))
        throw std::invalid_argument("clamp_partition: rect not contained in source box");
    const int d = rect.dim();
    GridPartition p;
    p.active = source.active;
    p.axes.resize(d);
    for (int i = 0; i < d; ++i) {
        const double a = rect.lo.v[i], b = rect.hi.v[i];
        std::vector<double>& axis = p.axes[i];
        if (source.active.contains(i)) {
            for (double u : source.axes[i]) axis.push_back(std::clamp(u, a, b));
        }
        axis.push_back(a);
        axis.push_back(b);
        std::sort(axis.begin(), axis.end());
        axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
    }
    return p;
}

/// Largest/smallest neighboring grid nodes u^- <= u <= u^+ per axis.
inline std::pair<Point, Point> neighbors(const GridPartition& partition, const Point& u)
{
    if (!partition.box().contains(u)) throw std::invalid_argument("neighbors: u outside box");
    const int d = partition.dim();
    Point lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
        const auto& axis = partition.axes[i];
        auto it = std::upper_bound(axis.begin(), axis.end(), u.v[i]);
        // it points past the last breakpoint <= u_i unless u_i is itself a node
        auto ge = std::lower_bound(axis.begin(), axis.end(), u.v[i]);
        hi.v[i] = (ge == axis.end()) ? axis.back() : *ge;
        lo.v[i] = (it == axis.begin()) ? axis.front() : *(it - 1);
        if (lo.v[i] > u.v[i]) lo.v[i] = hi.v[i];
    }
    return {lo, hi};
}

/// P Xi = sum of germ evaluations over all cells of the grid.
template <class G>
auto riemann_sum(G&& germ, const GridPartition& partition)
    -> std::invoke_result_t<G, const Point&, const Point&>
{
    using R = std::invoke_result_t<G, const Point&, const Point&>;
    R acc{};
    partition.for_each_cell([&](const Point& u, const Point& v) { acc += germ(u, v); });
    return acc;
}

}  // namespace sheetsew
