#pragma once

// Gaussian sheet models and exact samplers.
//
// Covariances: Brownian sheet, fractional Brownian sheet (per-axis factorized
// fBm covariance; `normalized` applies the conventional 2^-d factor so H=1/2
// recovers the Brownian sheet exactly), and a boundary-augmented field made of
// independent one-parameter fractional kernels on each axis plus a fractional
// interior sheet, all with one-sided Riemann-Liouville kernels on [0,t].
//
// Sampling routes: dense Cholesky of the full grid covariance, Kronecker
// per-axis Cholesky when the covariance factorizes, white-noise partial sums
// for the Brownian sheet, and the moving-average discretization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sheetsew/linalg.hpp"
#include "sheetsew/multiindex.hpp"
#include "sheetsew/rng.hpp"

namespace sheetsew {

enum class FieldKind { BrownianSheet, FractionalBrownianSheet, BoundaryAugmented };

struct FieldModel {
    FieldKind kind = FieldKind::BrownianSheet;
    int d = 2;
    int n = 1;  // independent components
    std::array<double, kMaxDim> hurst{};           // fractional Brownian sheet
    bool normalized = true;                        // 2^-d times the raw product formula
    std::array<double, kMaxDim> hurst_boundary{};  // boundary-augmented
    std::array<double, kMaxDim> hurst_interior{};
    std::array<double, kMaxDim> boundary_weight{};
    double interior_weight = 1.0;

    static FieldModel brownian_sheet(int d, int n = 1)
    {
        FieldModel m;
        m.kind = FieldKind::BrownianSheet;
        m.d = d;
        m.n = n;
        m.validate();
        return m;
    }

    static FieldModel fractional_sheet(std::initializer_list<double> H, int n = 1,
                                       bool normalized = true)
    {
        FieldModel m;
        m.kind = FieldKind::FractionalBrownianSheet;
        m.d = static_cast<int>(H.size());
        m.n = n;
        m.normalized = normalized;
        int i = 0;
        for (double h : H) m.hurst[i++] = h;
        m.validate();
        return m;
    }

    static FieldModel boundary_augmented(std::initializer_list<double> H_boundary,
                                         std::initializer_list<double> H_interior, int n = 1)
    {
        FieldModel m;
        m.kind = FieldKind::BoundaryAugmented;
        m.d = static_cast<int>(H_boundary.size());
        m.n = n;
        int i = 0;
        for (double h : H_boundary) m.hurst_boundary[i++] = h;
        if (static_cast<int>(H_interior.size()) != m.d)
            throw std::invalid_argument("boundary_augmented: H vectors must share dimension");
        i = 0;
        for (double h : H_interior) m.hurst_interior[i++] = h;
        m.boundary_weight.fill(1.0);
        m.validate();
        return m;
    }

    void validate() const
    {
        IndexSet::check_dim(d);
        if (n < 1) throw std::invalid_argument("FieldModel: n >= 1 required");
        auto check_h = [](double h) {
            if (!(h > 0.0 && h < 1.0))
                throw std::invalid_argument("FieldModel: H_i must lie in (0,1)");
        };
        if (kind == FieldKind::FractionalBrownianSheet)
            for (int i = 0; i < d; ++i) check_h(hurst[i]);
        if (kind == FieldKind::BoundaryAugmented)
            for (int i = 0; i < d; ++i) {
                check_h(hurst_boundary[i]);
                check_h(hurst_interior[i]);
            }
    }

    /// Covariance factorizes across axes (enables the Kronecker routes).
    bool factorizes() const { return kind != FieldKind::BoundaryAugmented; }

    /// Field values on the coordinate hyperplanes {t_i = 0} are a.s. zero.
    bool deterministic_boundary() const
    {
        if (kind != FieldKind::BoundaryAugmented) return true;
        for (int i = 0; i < d; ++i)
            if (boundary_weight[i] != 0.0) return false;
        return true;
    }

    std::string kind_name() const
    {
        switch (kind) {
            case FieldKind::BrownianSheet: return "BrownianSheet";
            case FieldKind::FractionalBrownianSheet:
                return normalized ? "FractionalBrownianSheet" : "FractionalBrownianSheet(raw)";
            case FieldKind::BoundaryAugmented: return "BoundaryAugmented";
        }
        return "?";
    }

    /// The Hurst vector relevant to the kind (boundary/interior pairs for the
    /// augmented model, 1/2 for the Brownian sheet).
    std::string hurst_string() const
    {
        std::ostringstream os;
        os << "(";
        for (int i = 0; i < d; ++i) {
            os << (i ? "," : "");
            switch (kind) {
                case FieldKind::BrownianSheet: os << 0.5; break;
                case FieldKind::FractionalBrownianSheet: os << hurst[i]; break;
                case FieldKind::BoundaryAugmented:
                    os << hurst_boundary[i] << "/" << hurst_interior[i];
                    break;
            }
        }
        os << ")";
        return os.str();
    }

    std::string describe() const
    {
        std::ostringstream os;
        os << kind_name() << " H=" << hurst_string() << " d=" << d << " n=" << n;
        return os.str();
    }
};

// ---------------------------------------------------------------------------
// Covariance evaluation
// ---------------------------------------------------------------------------

/// One-sided fractional kernel covariance
///   int_0^{min(s,t)} ((s-r)(t-r))^{H-1/2} dr,
/// exact for H=1/2 (= min(s,t)), graded quadrature otherwise.
inline double rl_axis_cov(double H, double s, double t)
{
    if (s < 0.0 || t < 0.0) throw std::invalid_argument("rl_axis_cov: negative coordinate");
    const double m = std::min(s, t);
    if (m == 0.0) return 0.0;
    const double a = H - 0.5;
    if (std::abs(a) < 1e-14) return m;
    // substitute u = m - r; singularity only at u = 0
    const double ds = s - m, dt = t - m;
    auto f = [&](double u) { return std::pow((ds + u) * (dt + u), a); };
    return integrate_graded_origin(f, m);
}

/// Per-axis covariance factor of a factorized model.
inline double axis_cov(const FieldModel& model, int axis, double s, double t)
{
    if (s < 0.0 || t < 0.0) throw std::invalid_argument("axis_cov: negative coordinate");
    switch (model.kind) {
        case FieldKind::BrownianSheet: return std::min(s, t);
        case FieldKind::FractionalBrownianSheet: {
            const double h2 = 2.0 * model.hurst[axis];
            const double c = model.normalized ? 0.5 : 1.0;
            return c * (std::pow(s, h2) + std::pow(t, h2) - std::pow(std::abs(t - s), h2));
        }
        case FieldKind::BoundaryAugmented:
            throw std::logic_error("axis_cov: boundary-augmented model does not factorize");
    }
    return 0.0;
}

/// Covariance of one component between points s and t.
inline double covariance(const FieldModel& model, const Point& s, const Point& t)
{
    if (s.dim != model.d || t.dim != model.d)
        throw std::invalid_argument("covariance: dimension mismatch");
    if (model.factorizes()) {
        double prod = 1.0;
        for (int i = 0; i < model.d; ++i) prod *= axis_cov(model, i, s.v[i], t.v[i]);
        return prod;
    }
    double acc = 0.0;
    for (int i = 0; i < model.d; ++i) {
        const double w = model.boundary_weight[i];
        if (w != 0.0) acc += w * w * rl_axis_cov(model.hurst_boundary[i], s.v[i], t.v[i]);
    }
    double interior = model.interior_weight * model.interior_weight;
    for (int i = 0; i < model.d; ++i)
        interior *= rl_axis_cov(model.hurst_interior[i], s.v[i], t.v[i]);
    return acc + interior;
}

/// Gram matrix of a per-axis covariance factor over a coordinate list.
inline Eigen::MatrixXd axis_cov_gram(const FieldModel& model, int axis,
                                     std::span<const double> coords)
{
    const Eigen::Index n = static_cast<Eigen::Index>(coords.size());
    Eigen::MatrixXd A(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
            A(i, j) = A(j, i) = axis_cov(model, axis, coords[i], coords[j]);
    return A;
}

inline Eigen::MatrixXd rl_axis_gram(double H, std::span<const double> coords)
{
    const Eigen::Index n = static_cast<Eigen::Index>(coords.size());
    Eigen::MatrixXd A(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
            A(i, j) = A(j, i) = rl_axis_cov(H, coords[i], coords[j]);
    return A;
}

inline Eigen::MatrixXd dense_cov_gram(const FieldModel& model, std::span<const Point> pts)
{
    const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd C(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
            C(i, j) = C(j, i) = covariance(model, pts[i], pts[j]);
    return C;
}

// ---------------------------------------------------------------------------
// Moving-average normalization constant
// ---------------------------------------------------------------------------

/// One-axis kappa^2(H) = int_{-inf}^{1} g_H(s,1)^2 ds with
/// g_H(s,t) = (t-s)_+^{H-1/2} - (-s)_+^{H-1/2}.
inline double kappa_squared_1d(double H, int resolution = 16)
{
    if (!(H > 0.0 && H < 1.0)) throw std::invalid_argument("kappa: H in (0,1) required");
    const double a = H - 0.5;
    const GaussLegendre g(resolution);
    const double head = 1.0 / (2.0 * H);  // int_0^1 (1-s)^{2H-1} ds
    if (std::abs(a) < 1e-14) return head;
    auto body = [&](double u) {
        // (1+u)^a - u^a, cancellation-safe for large u
        const double diff = u > 1.0 ? std::pow(u, a) * std::expm1(a * std::log1p(1.0 / u))
                                    : std::pow(1.0 + u, a) - std::pow(u, a);
        return diff * diff;
    };
    // int_0^inf: graded toward the u^{2H-1} singularity at 0; the dyadic tail
    // needs many octaves when H is near 1 (decay u^{2H-3})
    const double tail =
        integrate_graded_origin(body, 1.0, g, 240) + integrate_dyadic_tail(body, 1.0, g, 240);
    return head + tail;
}

/// Product over axes of the one-dimensional kappa^2 values.
inline double kappa_squared(std::span<const double> H, int resolution = 16)
{
    double prod = 1.0;
    for (double h : H) prod *= kappa_squared_1d(h, resolution);
    return prod;
}

// ---------------------------------------------------------------------------
// Sample grids and samples
// ---------------------------------------------------------------------------

struct SampleGrid {
    std::vector<std::vector<double>> axes;  // strictly increasing, >= 0

    int dim() const { return static_cast<int>(axes.size()); }

    long long num_points() const
    {
        long long n = 1;
        for (const auto& a : axes) n *= static_cast<long long>(a.size());
        return n;
    }

    void validate() const
    {
        if (axes.empty() || axes.size() > kMaxDim)
            throw std::invalid_argument("SampleGrid: dim must be in [1,8]");
        for (const auto& a : axes) {
            if (a.empty()) throw std::invalid_argument("SampleGrid: empty axis");
            if (a.front() < 0.0) throw std::invalid_argument("SampleGrid: negative coordinate");
            for (std::size_t k = 0; k + 1 < a.size(); ++k)
                if (!(a[k] < a[k + 1]))
                    throw std::invalid_argument("SampleGrid: coordinates not increasing");
        }
    }

    static SampleGrid uniform(const Rect& box, int points_per_axis)
    {
        if (points_per_axis < 2) throw std::invalid_argument("SampleGrid: >= 2 points per axis");
        SampleGrid g;
        g.axes.resize(box.dim());
        for (int i = 0; i < box.dim(); ++i) {
            g.axes[i].resize(points_per_axis);
            for (int k = 0; k < points_per_axis; ++k)
                g.axes[i][k] = box.lo.v[i] + box.gap(i) * k / double(points_per_axis - 1);
            g.axes[i].front() = box.lo.v[i];
            g.axes[i].back() = box.hi.v[i];
        }
        g.validate();
        return g;
    }

    static SampleGrid dyadic(const Rect& box, int level)
    {
        return uniform(box, (1 << level) + 1);
    }

    /// Exact-match coordinate index on an axis (tolerance 1e-9 relative).
    int coord_index(int axis, double x) const
    {
        const auto& a = axes[axis];
        auto it = std::lower_bound(a.begin(), a.end(), x - 1e-9 * std::max(1.0, std::abs(x)));
        if (it == a.end() || std::abs(*it - x) > 1e-9 * std::max(1.0, std::abs(x)))
            throw std::invalid_argument("SampleGrid: coordinate not on grid");
        return static_cast<int>(it - a.begin());
    }

    Point node(std::span<const int> idx) const
    {
        Point p(dim());
        for (int i = 0; i < dim(); ++i) p.v[i] = axes[i][idx[i]];
        return p;
    }

    Rect box() const
    {
        Point lo(dim()), hi(dim());
        for (int i = 0; i < dim(); ++i) {
            lo.v[i] = axes[i].front();
            hi.v[i] = axes[i].back();
        }
        return Rect(lo, hi);
    }
};

/// Sampled field values on a grid; layout is component-major, grid row-major
/// (axis 0 slowest). Deterministic function of (model, grid, seed, sample).
struct FieldSample {
    SampleGrid grid;
    int n = 1;
    std::vector<double> values;
    std::uint64_t master_seed = 0;
    std::uint64_t sample_index = 0;
    std::vector<double> ma_mass_ratio;  // moving-average route only

    long long npoints() const { return grid.num_points(); }

    double value(long long flat, int comp = 0) const
    {
        return values[static_cast<std::size_t>(comp) * npoints() + flat];
    }

    long long flat_index(std::span<const int> idx) const
    {
        long long f = 0;
        for (int i = 0; i < grid.dim(); ++i)
            f = f * static_cast<long long>(grid.axes[i].size()) + idx[i];
        return f;
    }

    double value_at(const Point& p, int comp = 0) const
    {
        std::array<int, kMaxDim> idx{};
        for (int i = 0; i < grid.dim(); ++i) idx[i] = grid.coord_index(i, p.v[i]);
        return value(flat_index(std::span<const int>(idx.data(), grid.dim())), comp);
    }
};

// ---------------------------------------------------------------------------
// Exact sampling
// ---------------------------------------------------------------------------

enum class SampleRoute { Auto, Dense, Kronecker, SheetIncrements, Structured };

namespace detail {

/// Tensor mode product: applies M (rows x cols) along `axis` of the row-major
/// tensor x with extents dims, replacing extent dims[axis] = cols by rows.
inline std::vector<double> apply_axis_factor(const std::vector<double>& x,
                                             std::vector<long long>& dims, int axis,
                                             const Eigen::MatrixXd& M)
{
    const long long rows = M.rows(), cols = M.cols();
    if (dims[axis] != cols) throw std::logic_error("apply_axis_factor: extent mismatch");
    long long outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= dims[i];
    for (std::size_t i = axis + 1; i < dims.size(); ++i) inner *= dims[i];

    std::vector<double> y(static_cast<std::size_t>(outer * rows * inner), 0.0);
    for (long long o = 0; o < outer; ++o) {
        const double* xo = x.data() + o * cols * inner;
        double* yo = y.data() + o * rows * inner;
        for (long long r = 0; r < rows; ++r)
            for (long long c = 0; c < cols; ++c) {
                const double m = M(r, c);
                if (m == 0.0) continue;
                const double* xi = xo + c * inner;
                double* yi = yo + r * inner;
                for (long long k = 0; k < inner; ++k) yi[k] += m * xi[k];
            }
    }
    dims[axis] = rows;
    return y;
}

inline std::vector<double> draw_normals(std::uint64_t master_seed, std::uint64_t sample_index,
                                        int component, std::size_t count)
{
    RandomStream rng(master_seed,
                     derive_stream(stream_purpose::kFieldSample, sample_index,
                                   static_cast<std::uint64_t>(component)));
    std::vector<double> z(count);
    rng.fill_normals(z.begin(), z.end());
    return z;
}

}  // namespace detail

inline constexpr long long kMaxDensePoints = 1 << 14;
inline constexpr long long kMaxKroneckerPoints = 1 << 16;
inline constexpr long long kMaxSheetPoints = 1 << 22;

/// Draws one exact sample of the model on the grid. The draw is a
/// deterministic function of (model, grid, master_seed, sample_index, route).
inline FieldSample sample_exact(const FieldModel& model, const SampleGrid& grid,
                                std::uint64_t master_seed, std::uint64_t sample_index,
                                SampleRoute route = SampleRoute::Auto)
{
    model.validate();
    grid.validate();
    if (grid.dim() != model.d) throw std::invalid_argument("sample_exact: dimension mismatch");

    if (route == SampleRoute::Auto)
        route = model.factorizes() ? SampleRoute::Kronecker : SampleRoute::Structured;
    if (route == SampleRoute::SheetIncrements && model.kind != FieldKind::BrownianSheet)
        throw std::invalid_argument("sample_exact: increment route is Brownian-sheet only");
    if (route == SampleRoute::Kronecker && !model.factorizes())
        throw std::invalid_argument("sample_exact: covariance does not factorize");
    if (route == SampleRoute::Structured && model.kind != FieldKind::BoundaryAugmented)
        throw std::invalid_argument("sample_exact: structured route is boundary-augmented only");

    const long long npts = grid.num_points();
    const long long limit = route == SampleRoute::Dense             ? kMaxDensePoints
                            : route == SampleRoute::SheetIncrements ? kMaxSheetPoints
                                                                    : kMaxKroneckerPoints;
    if (npts > limit) throw std::invalid_argument("sample_exact: grid too large for route");

    FieldSample out;
    out.grid = grid;
    out.n = model.n;
    out.master_seed = master_seed;
    out.sample_index = sample_index;
    out.values.resize(static_cast<std::size_t>(npts) * model.n);

    const int d = model.d;

    if (route == SampleRoute::Dense) {
        std::vector<Point> pts;
        pts.reserve(npts);
        std::array<int, kMaxDim> idx{};
        for (long long f = 0; f < npts; ++f) {
            pts.push_back(grid.node(std::span<const int>(idx.data(), d)));
            for (int i = d - 1; i >= 0; --i) {
                if (++idx[i] < static_cast<int>(grid.axes[i].size())) break;
                idx[i] = 0;
            }
        }
        const Eigen::MatrixXd L = psd_cholesky(dense_cov_gram(model, pts));
        for (int comp = 0; comp < model.n; ++comp) {
            auto z = detail::draw_normals(master_seed, sample_index, comp, npts);
            Eigen::Map<const Eigen::VectorXd> zv(z.data(), npts);
            Eigen::VectorXd w = L * zv;
            for (long long f = 0; f < npts; ++f)
                out.values[static_cast<std::size_t>(comp) * npts + f] = w(f);
        }
        return out;
    }

    if (route == SampleRoute::Kronecker) {
        std::vector<Eigen::MatrixXd> factors(d);
        for (int i = 0; i < d; ++i)
            factors[i] = psd_cholesky(axis_cov_gram(model, i, grid.axes[i]));
        for (int comp = 0; comp < model.n; ++comp) {
            auto z = detail::draw_normals(master_seed, sample_index, comp, npts);
            std::vector<long long> dims(d);
            for (int i = 0; i < d; ++i) dims[i] = static_cast<long long>(grid.axes[i].size());
            std::vector<double> w = std::move(z);
            for (int i = 0; i < d; ++i) w = detail::apply_axis_factor(w, dims, i, factors[i]);
            std::copy(w.begin(), w.end(),
                      out.values.begin() + static_cast<std::size_t>(comp) * npts);
        }
        return out;
    }

    if (route == SampleRoute::SheetIncrements) {
        // White-noise cells of the grid extended down to 0 on each axis,
        // cumulative sums give the sheet at the nodes.
        std::vector<std::vector<double>> ext(d);
        std::vector<int> offset(d, 0);
        long long ncells = 1;
        for (int i = 0; i < d; ++i) {
            ext[i] = grid.axes[i];
            if (ext[i].front() > 0.0) {
                ext[i].insert(ext[i].begin(), 0.0);
                offset[i] = 1;
            }
            ncells *= static_cast<long long>(ext[i].size()) - 1;
        }
        for (int comp = 0; comp < model.n; ++comp) {
            auto z = detail::draw_normals(master_seed, sample_index, comp, ncells);
            // scale by sqrt(cell volume), then prefix-sum along each axis
            std::vector<long long> dims(d);
            for (int i = 0; i < d; ++i) dims[i] = static_cast<long long>(ext[i].size()) - 1;
            {
                std::array<int, kMaxDim> idx{};
                for (long long f = 0; f < ncells; ++f) {
                    double vol = 1.0;
                    for (int i = 0; i < d; ++i) vol *= ext[i][idx[i] + 1] - ext[i][idx[i]];
                    z[f] *= std::sqrt(vol);
                    for (int i = d - 1; i >= 0; --i) {
                        if (++idx[i] < dims[i]) break;
                        idx[i] = 0;
                    }
                }
            }
            for (int axis = 0; axis < d; ++axis) {
                long long outer = 1, inner = 1;
                for (int i = 0; i < axis; ++i) outer *= dims[i];
                for (int i = axis + 1; i < d; ++i) inner *= dims[i];
                for (long long o = 0; o < outer; ++o)
                    for (long long k = 1; k < dims[axis]; ++k) {
                        double* row = z.data() + (o * dims[axis] + k) * inner;
                        const double* prev = z.data() + (o * dims[axis] + k - 1) * inner;
                        for (long long j = 0; j < inner; ++j) row[j] += prev[j];
                    }
            }
            // node (i_1,...,i_d) = cumulative cell sum up to that node
            std::array<int, kMaxDim> idx{};
            const long long npoints = npts;
            for (long long f = 0; f < npoints; ++f) {
                double v = 0.0;
                bool inside = true;
                long long cell = 0;
                for (int i = 0; i < d; ++i) {
                    const int ci = idx[i] + offset[i] - 1;  // cell ending at this node
                    if (ci < 0) {
                        inside = false;
                        break;
                    }
                    cell = cell * dims[i] + ci;
                }
                if (inside) v = z[cell];
                out.values[static_cast<std::size_t>(comp) * npoints + f] = v;
                for (int i = d - 1; i >= 0; --i) {
                    if (++idx[i] < static_cast<int>(grid.axes[i].size())) break;
                    idx[i] = 0;
                }
            }
        }
        return out;
    }

    // structured route: independent boundary processes plus a Kronecker interior
    if (route == SampleRoute::Structured) {
        std::vector<Eigen::MatrixXd> boundary_chol(d);
        std::vector<Eigen::MatrixXd> interior_chol(d);
        for (int i = 0; i < d; ++i) {
            if (model.boundary_weight[i] != 0.0)
                boundary_chol[i] = psd_cholesky(rl_axis_gram(model.hurst_boundary[i], grid.axes[i]));
            interior_chol[i] = psd_cholesky(rl_axis_gram(model.hurst_interior[i], grid.axes[i]));
        }
        for (int comp = 0; comp < model.n; ++comp) {
            std::size_t draw = 0;
            auto next_normals = [&](std::size_t count) {
                auto z = detail::draw_normals(master_seed, sample_index,
                                              comp * 1024 + static_cast<int>(draw), count);
                ++draw;
                return z;
            };
            std::vector<double> acc(static_cast<std::size_t>(npts), 0.0);
            // boundary terms, one per axis
            for (int i = 0; i < d; ++i) {
                if (model.boundary_weight[i] == 0.0) continue;
                const auto len = grid.axes[i].size();
                auto z = next_normals(len);
                Eigen::Map<const Eigen::VectorXd> zv(z.data(), len);
                Eigen::VectorXd xi = boundary_chol[i] * zv;
                std::array<int, kMaxDim> idx{};
                for (long long f = 0; f < npts; ++f) {
                    acc[f] += model.boundary_weight[i] * xi(idx[i]);
                    for (int k = d - 1; k >= 0; --k) {
                        if (++idx[k] < static_cast<int>(grid.axes[k].size())) break;
                        idx[k] = 0;
                    }
                }
            }
            // interior Kronecker term
            if (model.interior_weight != 0.0) {
                auto z = next_normals(npts);
                std::vector<long long> dims(d);
                for (int i = 0; i < d; ++i) dims[i] = static_cast<long long>(grid.axes[i].size());
                std::vector<double> w = std::move(z);
                for (int i = 0; i < d; ++i)
                    w = detail::apply_axis_factor(w, dims, i, interior_chol[i]);
                for (long long f = 0; f < npts; ++f) acc[f] += model.interior_weight * w[f];
            }
            std::copy(acc.begin(), acc.end(),
                      out.values.begin() + static_cast<std::size_t>(comp) * npts);
        }
        return out;
    }

    throw std::logic_error("sample_exact: unhandled route");
}

// ---------------------------------------------------------------------------
// Moving-average sampler
// ---------------------------------------------------------------------------

struct MovingAverageSpec {
    std::vector<double> hurst;
    std::vector<double> cutoff;      // lower integration bound per axis (< 0)
    double resolution = 1.0 / 64.0;  // white-noise cell width
    double min_mass_ratio = 0.99;
};

inline double ma_kernel(double H, double s, double t)
{
    const double a = H - 0.5;
    auto pow_plus = [&](double x) { return x > 0.0 ? std::pow(x, a) : 0.0; };
    if (std::abs(a) < 1e-14) return (t - s > 0.0 ? 1.0 : 0.0) - (-s > 0.0 ? 1.0 : 0.0);
    return pow_plus(t - s) - pow_plus(-s);
}

/// Discretized moving-average representation. Produces the normalized field
/// (unit variance scaling by kappa). White-noise cells are uniform of width
/// `resolution` on [0, T] and widen dyadically below 0 down to the cutoff
/// (the kernel tail is smooth and slowly decaying there). Throws if the
/// discretized kernel mass falls below min_mass_ratio of the exact value; the
/// achieved per-axis ratios are recorded on the sample.
inline FieldSample sample_moving_average(const MovingAverageSpec& spec, const SampleGrid& grid,
                                         std::uint64_t master_seed, std::uint64_t sample_index,
                                         int n_components = 1)
{
    grid.validate();
    const int d = grid.dim();
    if (static_cast<int>(spec.hurst.size()) != d || static_cast<int>(spec.cutoff.size()) != d)
        throw std::invalid_argument("sample_moving_average: spec dimension mismatch");
    for (int i = 0; i < d; ++i) {
        if (!(spec.hurst[i] > 0.0 && spec.hurst[i] < 1.0))
            throw std::invalid_argument("sample_moving_average: H in (0,1) required");
        if (spec.cutoff[i] >= 0.0)
            throw std::invalid_argument("sample_moving_average: cutoff must be negative");
    }

    // per-axis white-noise cells (midpoint, width) and kernel matrices
    std::vector<std::vector<double>> mids(d), widths(d);
    std::vector<Eigen::MatrixXd> kernels(d);
    std::vector<double> mass_ratio(d, 1.0);
    const double h = spec.resolution;
    for (int i = 0; i < d; ++i) {
        const double top = grid.axes[i].back();
        std::vector<double> edges;  // descending from top
        edges.push_back(top);
        double edge = top;
        while (edge > 0.0) {
            edge = std::max(edge - h, 0.0);
            edges.push_back(edge);
        }
        double w = h;
        while (edge > spec.cutoff[i]) {
            edge = std::max(edge - w, spec.cutoff[i]);
            edges.push_back(edge);
            w *= 1.09050773266525766;  // 2^(1/8): 8 tail cells per octave
        }
        const std::size_t cells = edges.size() - 1;
        mids[i].resize(cells);
        widths[i].resize(cells);
        for (std::size_t c = 0; c < cells; ++c) {
            // restore ascending order: cell c spans [edges[cells-c], edges[cells-c-1]]
            const double lo = edges[cells - c], hi = edges[cells - c - 1];
            mids[i][c] = 0.5 * (lo + hi);
            widths[i][c] = hi - lo;
        }
        const auto& nodes = grid.axes[i];
        kernels[i].resize(static_cast<Eigen::Index>(nodes.size()),
                          static_cast<Eigen::Index>(cells));
        for (std::size_t r = 0; r < nodes.size(); ++r)
            for (std::size_t c = 0; c < cells; ++c)
                kernels[i](r, c) =
                    ma_kernel(spec.hurst[i], mids[i][c], nodes[r]) * std::sqrt(widths[i][c]);

        // discrete L2 mass vs exact t^{2H} kappa^2, at the largest and the
        // smallest positive node
        const double kap = kappa_squared_1d(spec.hurst[i]);
        double worst = 1.0;
        for (double t : {top, *std::find_if(nodes.begin(), nodes.end(),
                                            [](double x) { return x > 0.0; })}) {
            double mass = 0.0;
            for (std::size_t c = 0; c < cells; ++c) {
                const double g = ma_kernel(spec.hurst[i], mids[i][c], t);
                mass += g * g * widths[i][c];
            }
            worst = std::min(worst, mass / (std::pow(t, 2.0 * spec.hurst[i]) * kap));
        }
        mass_ratio[i] = worst;
        if (worst < spec.min_mass_ratio)
            throw std::invalid_argument(
                "sample_moving_average: insufficient resolution on axis " + std::to_string(i) +
                " (mass ratio " + std::to_string(worst) + ")");
    }

    double kappa2 = 1.0;
    for (int i = 0; i < d; ++i) kappa2 *= kappa_squared_1d(spec.hurst[i]);
    const double scale = 1.0 / std::sqrt(kappa2);

    FieldSample out;
    out.grid = grid;
    out.n = n_components;
    out.master_seed = master_seed;
    out.sample_index = sample_index;
    out.ma_mass_ratio = mass_ratio;
    const long long npts = grid.num_points();
    out.values.resize(static_cast<std::size_t>(npts) * n_components);

    long long ncells = 1;
    for (int i = 0; i < d; ++i) ncells *= static_cast<long long>(mids[i].size());

    for (int comp = 0; comp < n_components; ++comp) {
        auto z = detail::draw_normals(master_seed, sample_index, comp, ncells);
        std::vector<long long> dims(d);
        for (int i = 0; i < d; ++i) dims[i] = static_cast<long long>(mids[i].size());
        std::vector<double> w = std::move(z);
        for (int i = 0; i < d; ++i) w = detail::apply_axis_factor(w, dims, i, kernels[i]);
        for (long long f = 0; f < npts; ++f)
            out.values[static_cast<std::size_t>(comp) * npts + f] = scale * w[f];
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

inline void write_field_sample_csv(std::ostream& os, const FieldModel& model,
                                   const FieldSample& sample)
{
    os << "# model=" << model.kind_name() << ", H=" << model.hurst_string()
       << ", seed=" << sample.master_seed << ", sample=" << sample.sample_index << "\n";
    const int d = sample.grid.dim();
    for (int i = 0; i < d; ++i) os << "i" << (i + 1) << ",";
    for (int i = 0; i < d; ++i) os << "t" << (i + 1) << ",";
    os << "comp,value\n";
    char buf[40];
    std::array<int, kMaxDim> idx{};
    const long long npts = sample.npoints();
    for (long long f = 0; f < npts; ++f) {
        for (int comp = 0; comp < sample.n; ++comp) {
            for (int i = 0; i < d; ++i) os << idx[i] << ",";
            for (int i = 0; i < d; ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", sample.grid.axes[i][idx[i]]);
                os << buf << ",";
            }
            std::snprintf(buf, sizeof buf, "%.17g", sample.value(f, comp));
            os << comp << "," << buf << "\n";
        }
        for (int i = d - 1; i >= 0; --i) {
            if (++idx[i] < static_cast<int>(sample.grid.axes[i].size())) break;
            idx[i] = 0;
        }
    }
}

}  // namespace sheetsew
