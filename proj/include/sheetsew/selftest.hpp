#pragma once

// Randomized identity suite for the increment algebra: inclusion-exclusion
// equivalence, delta factorization, the d=2 psi/delta decomposition,
// additive-germ delta vanishing, and partition-independent Riemann sums.
// Everything is exact up to rounding; the pass tolerance is 1e-12 relative.

#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "sheetsew/multiindex.hpp"
#include "sheetsew/parallel.hpp"
#include "sheetsew/rng.hpp"

namespace sheetsew {

struct AlgebraSelftestReport {
    struct Item {
        std::string name;
        long long checks = 0;
        long long failures = 0;
        double worst_error = 0.0;
    };
    std::vector<Item> items;
    bool all_passed() const
    {
        for (const auto& it : items)
            if (it.failures > 0) return false;
        return true;
    }
};

inline std::uint64_t fnv_name(const std::string& s)
{
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

namespace detail {

inline double table_value(std::uint64_t salt, std::initializer_list<double> coords)
{
    std::uint64_t h = salt;
    for (double c : coords) {
        std::uint64_t bits;
        std::memcpy(&bits, &c, sizeof bits);
        h = splitmix64(h ^ bits);
    }
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53 * 2.0 - 1.0;
}

inline double table_point_fn(std::uint64_t salt, const Point& p)
{
    std::uint64_t h = salt ^ 0x6A09E667F3BCC908ull;
    for (int i = 0; i < p.dim; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &p.v[i], sizeof bits);
        h = splitmix64(h ^ bits);
    }
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53 * 2.0 - 1.0;
}

inline double table_germ(std::uint64_t salt, const Point& s, const Point& t)
{
    std::uint64_t h = salt ^ 0xBB67AE8584CAA73Bull;
    for (int i = 0; i < s.dim; ++i) {
        std::uint64_t b1, b2;
        std::memcpy(&b1, &s.v[i], sizeof b1);
        std::memcpy(&b2, &t.v[i], sizeof b2);
        h = splitmix64(h ^ b1);
        h = splitmix64(h ^ b2);
    }
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53 * 2.0 - 1.0;
}

struct OrderedTriple {
    Point s, u, t;
};

inline OrderedTriple ordered_triple(RandomStream& rng, int d)
{
    OrderedTriple tr{Point(d), Point(d), Point(d)};
    for (int i = 0; i < d; ++i) {
        double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
        if (a > b) std::swap(a, b);
        if (b > c) std::swap(b, c);
        if (a > b) std::swap(a, b);
        tr.s.v[i] = a;
        tr.u.v[i] = b;
        tr.t.v[i] = c;
    }
    return tr;
}

}  // namespace detail

inline AlgebraSelftestReport algebra_selftest(long long checks_per_identity,
                                              std::uint64_t seed)
{
    AlgebraSelftestReport report;
    const double tol = 1e-12;

    auto run_item = [&](const std::string& name,
                        const std::function<double(RandomStream&, std::uint64_t)>& one) {
        AlgebraSelftestReport::Item item;
        item.name = name;
        item.checks = checks_per_identity;
        RandomStream rng(seed, derive_stream(fnv_name(name)));
        for (long long k = 0; k < checks_per_identity; ++k) {
            const double err = one(rng, static_cast<std::uint64_t>(k));
            item.worst_error = std::max(item.worst_error, err);
            if (!(err <= tol)) ++item.failures;
        }
        report.items.push_back(item);
    };

    // inclusion-exclusion sum equals the product-form evaluation
    run_item("inclusion_exclusion", [](RandomStream& rng, std::uint64_t k) {
        const int d = 1 + static_cast<int>(rng.uniform(0.0, 3.0));
        auto tr = detail::ordered_triple(rng, d);
        const IndexSet theta{rng.next_u32() & IndexSet::mask(d), d};
        auto f = [&](const Point& p) { return detail::table_point_fn(k, p); };
        std::function<double(const Point&)> g = f;
        for (int i = 0; i < d; ++i) {
            if (!theta.contains(i)) continue;
            auto prev = g;
            const Point t = tr.t;
            g = [prev, t, i](const Point& p) { return prev(project_axis(t, p, i)) - prev(p); };
        }
        const double oracle = g(tr.s);
        const double got = square_increment(f, Rect(tr.s, tr.t), theta);
        return std::abs(got - oracle) / std::max(1.0, std::abs(oracle));
    });

    // delta over a set equals sequential singleton deltas in either order
    run_item("delta_factorization", [](RandomStream& rng, std::uint64_t k) {
        const int d = 2 + static_cast<int>(rng.uniform(0.0, 2.0));
        auto tr = detail::ordered_triple(rng, d);
        int a = static_cast<int>(rng.uniform(0.0, d)), b = static_cast<int>(rng.uniform(0.0, d));
        if (a == b) b = (a + 1) % d;
        auto xi = [&](const Point& s, const Point& t) { return detail::table_germ(k, s, t); };
        const Rect box(tr.s, tr.t);
        const Point u = tr.u;
        const double joint = delta_apply(xi, u, IndexSet::of(d, {a, b}), box);
        auto inner_a = [&](const Point& s, const Point& t) {
            return delta_apply(xi, u, IndexSet::singleton(d, a), Rect(s, t));
        };
        auto inner_b = [&](const Point& s, const Point& t) {
            return delta_apply(xi, u, IndexSet::singleton(d, b), Rect(s, t));
        };
        const double ab = delta_apply(inner_a, u, IndexSet::singleton(d, b), box);
        const double ba = delta_apply(inner_b, u, IndexSet::singleton(d, a), box);
        const double scale = std::max({1.0, std::abs(joint)});
        return std::max(std::abs(joint - ab), std::abs(joint - ba)) / scale;
    });

    // Id - psi^1 psi^2 = delta^1 + delta^2 - delta^{12} on random germ tables
    run_item("psi_delta_decomposition", [](RandomStream& rng, std::uint64_t k) {
        auto tr = detail::ordered_triple(rng, 2);
        auto xi = [&](const Point& s, const Point& t) { return detail::table_germ(k, s, t); };
        const Rect box(tr.s, tr.t);
        const double lhs = xi(box.lo, box.hi) - psi_compose(xi, tr.u, IndexSet::full(2), box);
        const double rhs = delta_apply(xi, tr.u, IndexSet::of(2, {0}), box) +
                           delta_apply(xi, tr.u, IndexSet::of(2, {1}), box) -
                           delta_apply(xi, tr.u, IndexSet::full(2), box);
        return std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
    });

    // square increments of point functions are delta-annihilated
    run_item("additive_delta_vanishing", [](RandomStream& rng, std::uint64_t k) {
        const int d = 1 + static_cast<int>(rng.uniform(0.0, 3.0));
        auto tr = detail::ordered_triple(rng, d);
        auto f = [&](const Point& p) { return detail::table_point_fn(k * 31 + 7, p); };
        auto additive = [&](const Point& s, const Point& t) {
            return square_increment(f, Rect(s, t), IndexSet::full(d));
        };
        const Rect box(tr.s, tr.t);
        double worst = 0.0;
        for_each_subset(IndexSet::full(d), [&](const IndexSet& theta) {
            if (theta.is_empty()) return;
            worst = std::max(worst, std::abs(delta_apply(additive, tr.u, theta, box)));
        });
        return worst;
    });

    // Riemann sums of additive germs are partition independent
    run_item("riemann_partition_invariance", [](RandomStream& rng, std::uint64_t k) {
        const int d = 1 + static_cast<int>(rng.uniform(0.0, 2.0));
        auto tr = detail::ordered_triple(rng, d);
        auto f = [&](const Point& p) { return detail::table_point_fn(k * 17 + 3, p); };
        auto additive = [&](const Point& s, const Point& t) {
            return square_increment(f, Rect(s, t), IndexSet::full(d));
        };
        const Rect box(tr.s, tr.t);
        GridPartition p;
        p.active = IndexSet::full(d);
        p.axes.resize(d);
        for (int i = 0; i < d; ++i) {
            p.axes[i].push_back(box.lo.v[i]);
            const int extra = static_cast<int>(rng.uniform(0.0, 5.0));
            for (int m = 0; m < extra; ++m)
                p.axes[i].push_back(rng.uniform(box.lo.v[i], box.hi.v[i]));
            p.axes[i].push_back(box.hi.v[i]);
            std::sort(p.axes[i].begin(), p.axes[i].end());
            p.axes[i].erase(std::unique(p.axes[i].begin(), p.axes[i].end()), p.axes[i].end());
        }
        const double total = additive(box.lo, box.hi);
        return std::abs(riemann_sum(additive, p) - total) / std::max(1.0, std::abs(total));
    });

    return report;
}

}  // namespace sheetsew
